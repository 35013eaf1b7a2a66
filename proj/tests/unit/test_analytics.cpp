#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "memscope/analytics.hpp"
#include "memscope/error.hpp"
#include "memscope/synth.hpp"

using namespace memscope;

namespace {

SampleStream stream_of(std::uint16_t core, const std::vector<std::uint64_t>& addrs) {
  SampleStream s;
  s.core = core;
  s.kind = SampleEventKind::Load;
  for (std::size_t i = 0; i < addrs.size(); ++i) s.samples.push_back({i, 0, addrs[i], addrs[i]});
  s.events = addrs.size();
  return s;
}

}  // namespace

TEST_CASE("pearson basics") {
  CHECK(pearson({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), UndefinedValueError);
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), PreconditionError);
}

TEST_CASE("pearson agrees with the textbook formula, is symmetric and affine invariant") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(50), y(50);
    for (int i = 0; i < 50; ++i) {
      x[i] = g(rng);
      y[i] = 0.5 * x[i] + g(rng);
    }
    double r = pearson(x, y);
    CHECK(r == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-10));
    CHECK(r == pearson(y, x));
    std::vector<double> sx(x);
    for (auto& v : sx) v = 3.5 * v + 7;
    CHECK(pearson(sx, y) == doctest::Approx(r).epsilon(1e-12));
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("periodic sampling keeps every period-th event") {
  PeriodicSampler p(3);
  std::vector<bool> ticks;
  for (int i = 0; i < 7; ++i) ticks.push_back(p.tick());
  CHECK(ticks == std::vector<bool>{false, false, true, false, false, true, false});
  CHECK_THROWS_AS(PeriodicSampler(0), PreconditionError);

  SynthSpec s;
  s.n_events = 10000;
  auto t = generate(s).trace;
  auto all = sample_loads(t, 1);
  auto some = sample_loads(t, 10);
  for (std::size_t c = 0; c < all.size(); ++c) {
    CHECK(some[c].events == all[c].events);
    CHECK(some[c].samples.size() == all[c].samples.size() / 10);
    for (std::size_t k = 0; k < some[c].samples.size(); ++k) CHECK(some[c].samples[k] == all[c].samples[10 * k + 9]);
  }
  auto f = sample_ifetches(t, 1);
  std::uint64_t fetches = 0;
  for (const auto& r : t.records) fetches += r.kind == AccessKind::IFetch;
  CHECK(f[0].samples.size() + f[1].samples.size() == fetches);
  auto starved = sample_loads(t, 1'000'000);
  CHECK(starved[0].starved());
}

TEST_CASE("itlb and llc samplers count the right events") {
  SynthSpec s;
  s.n_events = 20000;
  auto out = generate(s);
  auto tl = sample_itlb_misses(out.trace, gen4_itlb(), out.page_table, 1);
  auto st = simulate_itlb(out.trace, gen4_itlb(), out.page_table);
  CHECK(tl[0].events + tl[1].events == st.l1.misses + st.l1.asid_extension_hits);
  auto llc = sample_llc_load_misses(out.trace, gen4_hierarchy(2), 1);
  for (const auto& str : llc)
    for (const auto& smp : str.samples) {
      const auto& rec = out.trace.records[smp.seq];
      CHECK(rec.kind == AccessKind::Load);
    }
}

TEST_CASE("heatmap bins by slice and sub-bin") {
  auto s = stream_of(0, {0, 4095, 4096, (2ull << 20) + 10, (2ull << 20) + 10});
  auto h = heatmap(s, 2ull << 20, 4096);
  CHECK(h.bins() == 512);
  CHECK(h.total() == 5);
  CHECK(h.rows.at(0)[0] == 2);
  CHECK(h.rows.at(0)[1] == 1);
  CHECK(h.rows.at(1)[0] == 2);
  CHECK(h.nonzero_cells() == 3);
  CHECK_THROWS_AS(heatmap(s, 3000, 1000), ConfigError);
  CHECK_THROWS_AS(heatmap(s, 4096, 8192), ConfigError);
  CHECK_THROWS_AS(heatmap(SampleStream{}, 4096, 4096), PreconditionError);
  CHECK(cosine_similarity(h, h) == doctest::Approx(1.0));
  auto csv = heatmap_csv(h);
  CHECK(csv.rfind("slice,b0,", 0) == 0);
}

TEST_CASE("page correlation uses the union of touched pages") {
  auto a = stream_of(0, {0, 0, 4096, 8192});
  auto b = stream_of(1, {0, 8192, 8192, 12288});
  auto pp = page_counts(a, b);
  CHECK(pp.pages == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(pp.a == std::vector<double>{2, 1, 1, 0});
  CHECK(pp.b == std::vector<double>{1, 0, 2, 1});
  CHECK(correlation(a, b) == doctest::Approx(oracle::pearson(pp.a, pp.b)));
  CHECK(correlation(a, b) == correlation(b, a));
}

TEST_CASE("bandwidth distribution percentiles") {
  // Page k gets 2^(9-k) samples, k = 0..9.
  std::vector<std::uint64_t> addrs;
  for (std::uint64_t k = 0; k < 10; ++k)
    for (std::uint64_t n = 0; n < (1ull << (9 - k)); ++n) addrs.push_back(k * 4096);
  auto d = bw_distribution({stream_of(0, addrs)});
  CHECK(d.total_samples == 1023);
  CHECK(d.total_pages == 10);
  CHECK(d.pages.front() == std::pair<std::uint64_t, std::uint64_t>{0, 512});
  CHECK(d.cumulative.back() == doctest::Approx(1.0));
  // Three pages hold 896 samples, four hold 960; 90% of 1023 is 920.7.
  auto p90 = d.footprint(90);
  CHECK(p90.pages == 4);
  CHECK(p90.bytes == 4 * 4096);
  CHECK(p90.fraction_of_touched == doctest::Approx(0.4));
  CHECK(d.footprint(50).pages == 1);
  CHECK(d.footprint(100).pages == 10);
  auto j = bw_distribution_json(d, {50, 90}, 100);
  CHECK(j.find("active_fraction") != std::string::npos);
}

TEST_CASE("bandwidth distribution translates virtual samples through snapshots") {
  SampleStream s;
  s.samples.push_back({5, 1, 0x3000, std::nullopt});
  s.samples.push_back({6, 1, 0x7000, std::nullopt});
  PageTableSnapshot pt(10);
  pt.map(1, 3, 42);
  auto d = bw_distribution({s}, {pt});
  CHECK(d.total_samples == 1);
  CHECK(d.untranslated == 1);
  CHECK(d.pages.front().first == 42);
  auto raw = bw_distribution({s});
  CHECK(raw.total_samples == 2);
}

TEST_CASE("window slicing") {
  auto s = stream_of(0, {0, 1, 2, 3, 4});
  auto sl = slice_streams({s}, 1, 3);
  REQUIRE(sl[0].samples.size() == 2);
  CHECK(sl[0].samples[0].seq == 1);
}

TEST_CASE("IPC projection in log space") {
  auto two = project_ipc({{1 << 20, 1.0}, {4 << 20, 1.2}}, 16 << 20);
  CHECK(two.slope == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(two.projected == doctest::Approx(1.4).epsilon(1e-12));
  // Duplicate sizes are averaged before fitting.
  auto dup = project_ipc({{1 << 20, 0.9}, {1 << 20, 1.1}, {2 << 20, 1.1}}, 4 << 20);
  CHECK(dup.slope == doctest::Approx(0.1));
  CHECK(dup.distinct_sizes == 2);
  std::vector<double> x{20, 21, 22, 23}, y{1.0, 1.04, 1.1, 1.13};
  std::vector<IpcPoint> pts;
  for (int i = 0; i < 4; ++i) pts.push_back({std::exp2(x[i]), y[i]});
  auto [slope, icpt] = oracle::ols(x, y);
  auto p = project_ipc(pts, std::exp2(25));
  CHECK(p.slope == doctest::Approx(slope).epsilon(1e-12));
  CHECK(p.projected == doctest::Approx(icpt + slope * 25).epsilon(1e-12));
  CHECK_THROWS_AS(project_ipc({{1 << 20, 1.0}}, 2 << 20), PreconditionError);
  CHECK_THROWS_AS(project_ipc({{1 << 20, 1.0}, {2 << 20, 1.1}}, 1 << 20), PreconditionError);
}
