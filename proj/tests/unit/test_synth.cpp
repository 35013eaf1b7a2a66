#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "memscope/error.hpp"
#include "memscope/synth.hpp"

using namespace memscope;

namespace {

SynthSpec small(std::uint64_t seed = 1) {
  SynthSpec s;
  s.n_cores = 2;
  s.n_events = 40000;
  s.rng_seed = seed;
  s.code_footprint_bytes = 256ull << 10;
  s.data_footprint_bytes = 4ull << 20;
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  auto a = generate(small(7));
  auto b = generate(small(7));
  auto c = generate(small(8));
  CHECK(a.trace == b.trace);
  CHECK_FALSE(a.trace == c.trace);
}

TEST_CASE("generated traces are valid and translate through their page table") {
  for (bool huge : {false, true}) {
    auto s = small();
    s.code_huge_pages = huge;
    s.burst_prob = 0.3;
    auto out = generate(s);
    CHECK_NOTHROW(check_trace(out.trace));
    CHECK(out.trace.records.size() == s.n_events);
    for (const auto& r : out.trace.records) {
      auto pa = out.page_table.translate(r.asid, r.vaddr);
      REQUIRE(pa);
      REQUIRE(*pa == *r.paddr);
    }
  }
}

TEST_CASE("access mix follows ifetch_fraction and read_write_ratio") {
  auto s = small();
  s.n_events = 200000;
  s.ifetch_fraction = 0.3;
  s.read_write_ratio = 3.0;
  auto t = generate(s).trace;
  double n = static_cast<double>(t.records.size()), f = 0, l = 0, st = 0;
  for (const auto& r : t.records) {
    if (r.kind == AccessKind::IFetch) ++f;
    if (r.kind == AccessKind::Load) ++l;
    if (r.kind == AccessKind::Store) ++st;
  }
  // Five binomial standard deviations.
  CHECK(std::abs(f / n - 0.3) < 5 * std::sqrt(0.3 * 0.7 / n));
  const double data = l + st;
  CHECK(std::abs(l / data - 0.75) < 5 * std::sqrt(0.75 * 0.25 / data));
}

TEST_CASE("zipf sampler matches the closed-form pmf") {
  const std::uint64_t n = 100;
  const double s = 1.2;
  ZipfSampler z(n, s);
  double h = 0;
  for (std::uint64_t k = 1; k <= n; ++k) h += std::pow(static_cast<double>(k), -s);
  for (std::uint64_t k = 0; k < n; ++k) CHECK(z.pmf(k) == doctest::Approx(std::pow(k + 1.0, -s) / h).epsilon(1e-12));
  // Inverse CDF on a fine uniform grid reproduces the pmf.
  std::vector<double> hist(n, 0);
  const int grid = 1'000'000;
  for (int i = 0; i < grid; ++i) hist[z((i + 0.5) / grid)] += 1.0 / grid;
  for (std::uint64_t k = 0; k < n; ++k) CHECK(hist[k] == doctest::Approx(z.pmf(k)).epsilon(1e-3));
  CHECK(z(0.0) == 0);
  CHECK(z(0.999999999999) == n - 1);
}

TEST_CASE("shared and disjoint code regions") {
  auto s = small();
  s.code_share = 1.0;
  auto shared = generate(s).trace;
  std::set<std::uint64_t> pages[2];
  for (const auto& r : shared.records)
    if (r.kind == AccessKind::IFetch) pages[r.core].insert(r.vaddr / 4096);
  std::size_t common = 0;
  for (auto p : pages[0]) common += pages[1].count(p);
  CHECK(common > pages[0].size() / 2);

  s.code_share = 0.0;
  s.disjoint_private_code = true;
  auto disjoint = generate(s).trace;
  pages[0].clear();
  pages[1].clear();
  for (const auto& r : disjoint.records)
    if (r.kind == AccessKind::IFetch) pages[r.core].insert(r.vaddr / 4096);
  for (auto p : pages[0]) CHECK(pages[1].count(p) == 0);
}

TEST_CASE("multiprocess mode gives each core its own ASID") {
  auto s = small();
  s.mode = SharingMode::MultiProcess;
  for (const auto& r : generate(s).trace.records) REQUIRE(r.asid == r.core);
  s.mode = SharingMode::MultiThread;
  for (const auto& r : generate(s).trace.records) REQUIRE(r.asid == 0);
}

TEST_CASE("layout seed fixes placement independently of the event seed") {
  auto a = small(1), b = small(2);
  a.layout_seed = b.layout_seed = 99;
  auto ta = generate(a), tb = generate(b);
  CHECK_FALSE(ta.trace == tb.trace);
  // Both runs rank pages identically, so the hottest data page of core 0 agrees.
  auto hottest = [](const MemoryTrace& t) {
    std::map<std::uint64_t, int> c;
    for (const auto& r : t.records)
      if (r.kind != AccessKind::IFetch && r.core == 0) ++c[r.vaddr / 4096];
    return std::max_element(c.begin(), c.end(), [](auto& x, auto& y) { return x.second < y.second; })->first;
  };
  CHECK(hottest(ta.trace) == hottest(tb.trace));
}

TEST_CASE("spec validation") {
  auto s = small();
  s.n_cores = 0;
  CHECK_THROWS_AS(generate(s), PreconditionError);
  s = small();
  s.code_share = 1.5;
  CHECK_THROWS_AS(check_spec(s), PreconditionError);
  s = small();
  s.data_footprint_bytes = 100;
  CHECK_THROWS_AS(check_spec(s), PreconditionError);
  s = small();
  s.data_footprint_bytes = (kMaxFootprintPages + 1) * 4096;
  CHECK_THROWS_AS(check_spec(s), PreconditionError);
  s = small();
  s.read_write_ratio = 0;
  CHECK_THROWS_AS(check_spec(s), PreconditionError);
}
