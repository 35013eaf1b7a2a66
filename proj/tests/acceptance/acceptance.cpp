// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Every threshold and workload parameter is pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "cli.hpp"
#include "memscope/analytics.hpp"
#include "memscope/cache.hpp"
#include "memscope/error.hpp"
#include "memscope/prefetch.hpp"
#include "memscope/stitch.hpp"
#include "memscope/synth.hpp"
#include "memscope/tier.hpp"
#include "memscope/tlb.hpp"

using namespace memscope;
namespace fs = std::filesystem;

namespace {

// Formulas.
constexpr int kFormulaCases = 1000;
constexpr double kFormulaTol = 1e-12;
constexpr double kFormulaBudgetS = 1.0;

// Oracle equivalence.
constexpr int kOracleTraces = 100;
constexpr std::size_t kOracleRecords = 100'000;
constexpr double kOracleBudgetS = 120.0;

// Code sharing.
constexpr std::uint64_t kCorrEvents = 1'000'000;
constexpr int kCorrSeeds = 10;
constexpr double kSharedMinR = 0.98;
constexpr double kDisjointMaxAbsR = 0.2;
constexpr double kCorrBudgetS = 60.0;

// Shared structures.
constexpr int kShareSeeds = 5;
constexpr std::uint64_t kShareEvents = 1'000'000;
constexpr std::uint32_t kCluster = 4;
constexpr std::uint32_t kItlbEntriesPerCore = 384;
constexpr double kCodeZipf = 0.6;
constexpr double kShareIfetch = 0.7;
constexpr double kMinItlbReductionAt4x = 2.0;
constexpr double kShareBudgetS = 300.0;

// Bandwidth distribution.
constexpr int kBwSeeds = 3;
constexpr std::uint64_t kBwEvents = 8'000'000;
constexpr std::uint64_t kBwFootprint = 16ull << 30;
constexpr double kBwZipf = 1.2;
constexpr double kBwP90MaxFraction = 0.10;
constexpr double kBwActiveMaxFraction = 0.25;
constexpr double kBwBudgetS = 120.0;

// Tiering.
constexpr int kTierSeeds = 5;
constexpr std::uint64_t kTierEvents = 8'000'000;
constexpr std::uint64_t kTierFootprint = 32ull << 20;
constexpr std::uint64_t kTierEpochs = 40;
constexpr double kTieredMinGain = 1.2;
constexpr double kTieredMaxGapToIdeal = 0.15;
constexpr double kTierBudgetS = 300.0;

// Prefetch.
constexpr std::uint64_t kPfLines = 100'000;
constexpr std::uint64_t kPfEvents = 400'000;
constexpr double kSeqMinCoverage = 0.9;
constexpr double kSeqMinAccuracy = 0.9;
constexpr double kUniformMaxAccuracy = 0.1;
constexpr double kPfBudgetS = 120.0;

// Stitch.
constexpr int kStitchSeeds = 5;
constexpr std::uint64_t kStitchEvents = 1'000'000;
constexpr std::uint64_t kStitchWindow = 1000;
constexpr std::uint64_t kStitchGap = 9000;
constexpr double kHitErrMaxPct = 6.0;
constexpr double kRwErrMaxPct = 5.0;
constexpr double kStitchBudgetS = 180.0;

// Projection.
constexpr int kProjTrials = 100;
constexpr double kProjNoiseSigma = 0.002;
constexpr double kProjSlopeTol = 0.005;
constexpr double kProjExactTol = 1e-12;
constexpr double kProjBudgetS = 1.0;

// Determinism.
constexpr double kDetBudgetS = 60.0;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      else detail.str("");
      pass = false;
      detail << what;
    }
  }
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

void formulas(Verdict& v) {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int i = 0; i < kFormulaCases; ++i) {
    PrefetchAccount a;
    a.total_prefetched = 1 + rng() % 1'000'000;
    a.unused_evicted = rng() % (a.total_prefetched + 1);
    a.total_lines_brought_in = a.total_prefetched + 1 + rng() % 1'000'000;
    a.used = a.total_prefetched - a.unused_evicted;
    const double tp = static_cast<double>(a.total_prefetched), ue = static_cast<double>(a.unused_evicted),
                 bi = static_cast<double>(a.total_lines_brought_in);
    const double acc = 1.0 - ue / tp;
    const double cov = (tp - ue) / (bi - ue);
    worst = std::max({worst, std::abs(accuracy(a) - acc), std::abs(coverage(a) - cov)});
  }
  v.require(worst <= kFormulaTol, "max deviation " + std::to_string(worst));

  PrefetchAccount ex;
  ex.total_prefetched = 100;
  ex.unused_evicted = 25;
  ex.total_lines_brought_in = 300;
  v.require(accuracy(ex) == 0.75, "accuracy example " + fmt(accuracy(ex), 17));
  v.require(coverage(ex) == 75.0 / 275.0, "coverage example " + fmt(coverage(ex), 17));

  bool threw = false;
  try {
    accuracy(PrefetchAccount{});
  } catch (const UndefinedValueError&) {
    threw = true;
  }
  v.require(threw, "accuracy with nothing prefetched did not raise");
  if (v.pass) v.detail << kFormulaCases << " accounts, max deviation " << worst << ", examples exact";
}

// --- 2 ---------------------------------------------------------------------

struct Recorder : HierarchyObserver {
  std::vector<oracle::Lookup> lookups;
  void on_lookup(std::size_t record, std::size_t level, std::uint16_t, std::uint64_t, bool hit) override {
    lookups.push_back({record, level, hit});
  }
};

std::vector<CacheLevelConfig> small_hierarchy(std::uint32_t cores, std::uint32_t l2_cluster) {
  return {{"L1I", 2048, 2, 64, 1, ServedClasses::Code, {}, {}},
          {"L1D", 4096, 4, 64, 1, ServedClasses::Data, {}, {}},
          {"L2", 8192ull * l2_cluster, 8, 64, l2_cluster, ServedClasses::Unified, {}, {}},
          {"L3", 16384ull * cores, 16, 64, cores, ServedClasses::Unified, {}, {}}};
}

TlbConfig small_tlb(std::uint32_t cluster) {
  TlbConfig c;
  c.l1 = {"L1", {{16, 4, PageClass::Small4K}}, 1};
  c.l2 = {"L2", {{32u * cluster, 8, PageClass::Small4K}}, cluster};
  return c;
}

MemoryTrace code_trace(std::mt19937_64& rng, std::size_t n, std::uint32_t cores, std::uint64_t pages, bool mp,
                       PageTableSnapshot& pt) {
  MemoryTrace t;
  t.meta.n_cores = cores;
  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord r;
    r.seq = i;
    r.core = static_cast<std::uint16_t>(rng() % cores);
    r.asid = mp ? r.core : 0;
    r.kind = AccessKind::IFetch;
    r.vaddr = (0x100 + rng() % pages) * 4096 + 16 * (rng() % 256);
    r.size = 16;
    t.records.push_back(r);
  }
  for (std::uint32_t a = 0; a < cores; ++a)
    for (std::uint64_t p = 0; p < pages; ++p) pt.map(a, 0x100 + p, 0x9000 + p);
  return t;
}

void oracle_equivalence(Verdict& v) {
  std::mt19937_64 rng(77);
  std::uint64_t cache_lookups = 0, tlb_lookups = 0;
  int cache_bad = 0, tlb_bad = 0;
  for (int i = 0; i < kOracleTraces; ++i) {
    const std::uint32_t cores = 4;
    const std::uint32_t cluster = 1u << (i % 3);
    auto t = oracle::random_trace(rng, kOracleRecords, cores, 4096, 0.4, i % 2 == 0);
    auto levels = small_hierarchy(cores, cluster);
    Recorder rec;
    simulate_hierarchy(t, levels, ReplacementPolicy::Lru, &rec);
    if (rec.lookups != oracle::hierarchy_lookups(t, levels)) ++cache_bad;
    cache_lookups += rec.lookups.size();

    PageTableSnapshot pt;
    auto ct = code_trace(rng, kOracleRecords, cores, 160, i % 2 == 1, pt);
    std::vector<oracle::TlbOutcomeRec> got;
    simulate_itlb(ct, small_tlb(cluster), pt,
                  [&](const TlbEvent& e, const TraceRecord&) { got.push_back({e.record, e.level, e.outcome}); });
    if (got != oracle::itlb_outcomes(ct, pt, 16, 4, 32 * cluster, 8, cluster)) ++tlb_bad;
    tlb_lookups += got.size();
  }
  v.require(cache_bad == 0, std::to_string(cache_bad) + " cache traces diverged");
  v.require(tlb_bad == 0, std::to_string(tlb_bad) + " TLB traces diverged");
  if (v.pass)
    v.detail << kOracleTraces << "+" << kOracleTraces << " traces of " << kOracleRecords << " records, "
             << cache_lookups << " cache and " << tlb_lookups << " TLB outcomes identical";
}

// --- 3 ---------------------------------------------------------------------

void code_sharing(Verdict& v) {
  double min_shared = 1, max_disjoint = 0;
  for (int i = 0; i < kCorrSeeds; ++i) {
    for (bool disjoint : {false, true}) {
      SynthSpec s;
      s.n_cores = 2;
      s.n_events = kCorrEvents;
      s.rng_seed = 100 + i;
      s.code_share = disjoint ? 0.0 : 1.0;
      s.disjoint_private_code = disjoint;
      auto out = generate(s);
      auto streams = sample_ifetches(out.trace, 1);
      const double r = correlation(streams[0], streams[1]);
      if (disjoint) {
        max_disjoint = std::max(max_disjoint, std::abs(r));
        v.require(std::abs(r) < kDisjointMaxAbsR, "disjoint seed " + std::to_string(s.rng_seed) + " |r|=" + fmt(r));
      } else {
        min_shared = std::min(min_shared, r);
        v.require(r >= kSharedMinR, "shared seed " + std::to_string(s.rng_seed) + " r=" + fmt(r));
      }
    }
  }
  if (v.pass)
    v.detail << "shared min r=" << fmt(min_shared) << ", disjoint max |r|=" << fmt(max_disjoint) << " over "
             << kCorrSeeds << " seeds";
}

// --- 4 ---------------------------------------------------------------------

void shared_structures(Verdict& v) {
  double min_reduction_4x = 1e300, min_mp_reduction_4x = 1e300;
  double worst_cache_ratio = 0;
  for (int seed = 1; seed <= kShareSeeds; ++seed) {
    for (std::uint32_t x = 1; x <= 4; ++x) {
      SynthSpec s;
      s.n_cores = kCluster;
      s.n_events = kShareEvents;
      s.rng_seed = 300 + seed;
      s.code_zipf_s = kCodeZipf;
      s.ifetch_fraction = kShareIfetch;
      s.data_footprint_bytes = 16ull << 20;

      s.code_footprint_bytes = static_cast<std::uint64_t>(x) << 20;
      auto ct = generate(s);
      const auto priv = simulate_hierarchy(ct.trace, gen4_hierarchy(kCluster, 1)).mpki(2, AccessClass::Code);
      const auto shared = simulate_hierarchy(ct.trace, gen4_hierarchy(kCluster, kCluster)).mpki(2, AccessClass::Code);
      worst_cache_ratio = std::max(worst_cache_ratio, shared / priv);
      v.require(shared < priv, "L2 code seed " + std::to_string(seed) + " " + std::to_string(x) + "x: shared " +
                                   fmt(shared) + " >= private " + fmt(priv));

      s.code_footprint_bytes = static_cast<std::uint64_t>(x) * kItlbEntriesPerCore * s.page_size;
      auto tt = generate(s);
      const auto tp = simulate_itlb(tt.trace, gen4_itlb(1, kItlbEntriesPerCore), tt.page_table).l2.mpki;
      const auto ts = simulate_itlb(tt.trace, gen4_itlb(kCluster, kItlbEntriesPerCore), tt.page_table).l2.mpki;
      v.require(ts < tp, "ITLB seed " + std::to_string(seed) + " " + std::to_string(x) + "x: shared " + fmt(ts) +
                             " >= private " + fmt(tp));
      if (x == 4) {
        const double red = ts > 0 ? tp / ts : 1e300;
        min_reduction_4x = std::min(min_reduction_4x, red);
        v.require(red >= kMinItlbReductionAt4x, "ITLB reduction at 4x seed " + std::to_string(seed) + " " + fmt(red));
      }

      // One ASID per core: cold misses on a shared entry become ASID
      // extensions, which also walk, so 1x ties.
      s.mode = SharingMode::MultiProcess;
      auto mt = generate(s);
      const auto mp = simulate_itlb(mt.trace, gen4_itlb(1, kItlbEntriesPerCore), mt.page_table).l2.mpki;
      const auto ms = simulate_itlb(mt.trace, gen4_itlb(kCluster, kItlbEntriesPerCore), mt.page_table).l2.mpki;
      const std::string tag = "multiprocess ITLB seed " + std::to_string(seed) + " " + std::to_string(x) + "x: ";
      if (x == 1)
        v.require(ms <= mp, tag + "shared " + fmt(ms) + " > private " + fmt(mp));
      else
        v.require(ms < mp, tag + "shared " + fmt(ms) + " >= private " + fmt(mp));
      if (x == 4) {
        const double red = ms > 0 ? mp / ms : 1e300;
        min_mp_reduction_4x = std::min(min_mp_reduction_4x, red);
        v.require(red >= kMinItlbReductionAt4x, tag + "reduction " + fmt(red));
      }
    }
  }
  if (v.pass)
    v.detail << "L2 code shared/private <= " << fmt(worst_cache_ratio) << ", min ITLB reduction at 4x "
             << fmt(min_reduction_4x, 1) << "x (" << fmt(min_mp_reduction_4x, 1) << "x one ASID per core) over "
             << kShareSeeds << " seeds";
}

// --- 5 ---------------------------------------------------------------------

void bandwidth_skew(Verdict& v) {
  double worst_p90 = 0, worst_active = 0, llc_p90 = 0, llc_active = 0;
  for (int seed = 1; seed <= kBwSeeds; ++seed) {
    SynthSpec s;
    s.n_cores = 1;
    s.n_events = kBwEvents;
    s.rng_seed = 500 + seed;
    s.data_footprint_bytes = kBwFootprint;
    s.data_zipf_s = kBwZipf;
    s.ifetch_fraction = 0.05;
    s.read_write_ratio = 4.0;
    auto out = generate(s);
    const double allocated = static_cast<double>(kBwFootprint / s.page_size);
    const std::uint64_t last = out.trace.records.back().seq + 1;
    auto loads = sample_loads(out.trace, 1);
    auto misses = sample_llc_load_misses(out.trace, gen4_hierarchy(1), 1);
    for (std::uint64_t div : {4, 2, 1}) {
      const std::uint64_t len = last / div;
      auto d = bw_distribution(slice_streams(loads, last - len, last), {}, s.page_size);
      const double p90 = d.footprint(90).fraction_of_touched;
      const double active = static_cast<double>(d.total_pages) / allocated;
      worst_p90 = std::max(worst_p90, p90);
      worst_active = std::max(worst_active, active);
      v.require(p90 < kBwP90MaxFraction, "seed " + std::to_string(seed) + " window " + std::to_string(len) +
                                             " p90 fraction " + fmt(p90));
      v.require(active < kBwActiveMaxFraction, "seed " + std::to_string(seed) + " window " + std::to_string(len) +
                                                   " active fraction " + fmt(active));
      auto m = bw_distribution(slice_streams(misses, last - len, last), {}, s.page_size);
      llc_p90 = std::max(llc_p90, m.footprint(90).fraction_of_touched);
      llc_active = std::max(llc_active, static_cast<double>(m.total_pages) / allocated);
    }
  }
  std::cout << "  info 5: LLC-load-miss samples give p90 fraction up to " << fmt(llc_p90) << ", active up to "
            << fmt(llc_active) << "\n";
  if (v.pass)
    v.detail << "load samples: p90 fraction <= " << fmt(worst_p90) << ", active <= " << fmt(worst_active)
             << " across 3 windows x " << kBwSeeds << " seeds";
}

// --- 6 ---------------------------------------------------------------------

void tiering(Verdict& v) {
  double min_gain = 1e300, max_gap = 0;
  std::uint64_t min_warmup = ~0ull;
  for (int seed = 1; seed <= kTierSeeds; ++seed) {
    SynthSpec s;
    s.n_cores = 1;
    s.n_events = kTierEvents;
    s.rng_seed = 600 + seed;
    s.data_footprint_bytes = kTierFootprint;
    s.data_zipf_s = 1.2;
    s.ifetch_fraction = 0.05;
    s.code_footprint_bytes = 1ull << 20;
    auto out = generate(s);
    auto stream = collect_llc_misses(out.trace, gen4_hierarchy(1));
    std::vector<TierConfig> configs{baseline_tier(), ideal_tier(), tiered_tier()};
    for (auto& c : configs) {
      c.migration_epoch = std::max<std::uint64_t>(1, stream.size() / kTierEpochs);
      c.seed = static_cast<std::uint64_t>(seed);
    }
    auto r = compare_tiers(stream, configs);
    const double base = r[0].relative_throughput, ideal = r[1].relative_throughput, tiered = r[2].relative_throughput;
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    v.require(base < tiered && tiered < ideal,
              tag + "order " + fmt(base) + " / " + fmt(tiered) + " / " + fmt(ideal));
    v.require(tiered >= kTieredMinGain * base, tag + "tiered gain " + fmt(tiered / base));
    v.require(tiered >= (1.0 - kTieredMaxGapToIdeal) * ideal, tag + "gap to ideal " + fmt(1 - tiered / ideal));
    v.require(r[0].relative_cost == 1.0 && r[1].relative_cost == 2.0 && r[2].relative_cost == 1.375,
              tag + "costs " + fmt(r[0].relative_cost, 17) + " / " + fmt(r[1].relative_cost, 17) + " / " +
                  fmt(r[2].relative_cost, 17));
    v.require(r[2].warmup_epochs >= 1, tag + "no warmup");
    min_gain = std::min(min_gain, tiered / base);
    max_gap = std::max(max_gap, 1 - tiered / ideal);
    min_warmup = std::min(min_warmup, r[2].warmup_epochs);
    if (seed == 1)
      std::cout << "  info 6: seed 1 baseline " << fmt(base) << ", tiered " << fmt(tiered) << ", ideal " << fmt(ideal)
                << ", tiered warmup " << r[2].warmup_epochs << " epochs\n";
  }
  if (v.pass)
    v.detail << "tiered >= " << fmt(min_gain, 3) << "x baseline, within " << fmt(100 * max_gap, 2)
             << "% of ideal, costs 1.0/2.0/1.375, warmup >= " << min_warmup << " over " << kTierSeeds << " seeds";
}

// --- 7 ---------------------------------------------------------------------

MemoryTrace load_trace_of(const std::vector<std::uint64_t>& addrs) {
  MemoryTrace t;
  for (std::size_t i = 0; i < addrs.size(); ++i) {
    TraceRecord r;
    r.seq = i;
    r.kind = AccessKind::Load;
    r.vaddr = addrs[i];
    t.records.push_back(r);
  }
  return t;
}

void prefetch_direction(Verdict& v) {
  std::vector<std::uint64_t> seq(kPfLines), rnd(kPfLines);
  std::mt19937_64 rng(700);
  for (std::uint64_t i = 0; i < kPfLines; ++i) {
    seq[i] = (1ull << 32) + i * 64;
    rnd[i] = (1ull << 32) + uniform_below(rng, 1ull << 24) * 64;
  }
  SynthSpec s;
  s.n_cores = 1;
  s.n_events = kPfEvents;
  s.rng_seed = 701;
  s.burst_prob = 0.3;
  s.burst_mean_lines = 8;
  s.data_footprint_bytes = 256ull << 20;
  const auto sequential = load_trace_of(seq), uniform = load_trace_of(rnd), zipf = generate(s).trace;
  const auto levels = gen4_hierarchy(1);
  std::ostringstream info;
  for (auto kind : {PrefetcherKind::NextLine, PrefetcherKind::StrideStreamer}) {
    PrefetcherConfig pf;
    pf.kind = kind;
    pf.degree = 2;
    pf.distance = 4;
    const std::string name(to_string(kind));
    auto sq = compare_prefetch(sequential, levels, pf);
    v.require(sq.coverage && *sq.coverage > kSeqMinCoverage, name + " sequential coverage");
    v.require(sq.accuracy && *sq.accuracy > kSeqMinAccuracy, name + " sequential accuracy");
    auto un = compare_prefetch(uniform, levels, pf);
    if (kind == PrefetcherKind::NextLine)
      v.require(un.accuracy && *un.accuracy < kUniformMaxAccuracy, name + " uniform accuracy");
    auto zb = compare_prefetch(zipf, levels, pf);
    v.require(zb.traffic_overhead_pct > 0, name + " zipf+burst overhead " + fmt(zb.traffic_overhead_pct));
    info << " " << name << ": seq cov " << fmt(sq.coverage.value_or(-1)) << " acc " << fmt(sq.accuracy.value_or(-1))
         << ", uniform acc " << (un.accuracy ? fmt(*un.accuracy) : "N/A (no prefetches)") << ", zipf+burst overhead "
         << fmt(zb.traffic_overhead_pct, 1) << "%;";
  }
  std::cout << "  info 7:" << info.str() << "\n";
  if (v.pass) v.detail << "sequential > 0.9 both metrics, uniform accuracy < 0.1, zipf+burst overhead > 0";
}

// --- 8 ---------------------------------------------------------------------

void stitch_fidelity(Verdict& v) {
  double worst_hit = 0, worst_rw = 0;
  CacheLevelConfig l1d;
  l1d.name = "L1D";
  l1d.size_bytes = 32ull << 10;
  l1d.ways = 8;
  l1d.classes = ServedClasses::Data;
  for (int seed = 1; seed <= kStitchSeeds; ++seed) {
    SynthSpec s;
    s.n_cores = 1;
    s.n_events = kStitchEvents;
    s.rng_seed = 800 + seed;
    s.burst_prob = 0.2;
    s.data_footprint_bytes = 8ull << 20;
    auto full = generate(s).trace;
    StitchSpec spec;
    spec.window_len = kStitchWindow;
    spec.gap_len = kStitchGap;
    spec.rng_seed = static_cast<std::uint64_t>(seed);
    auto st = stitch({full}, spec);
    auto r = validate(full, st.trace, l1d);
    worst_hit = std::max(worst_hit, std::abs(r.hit_ratio_error_pct));
    worst_rw = std::max(worst_rw, std::abs(r.rw_ratio_error_pct));
    v.require(std::abs(r.hit_ratio_error_pct) < kHitErrMaxPct,
              "seed " + std::to_string(seed) + " hit ratio error " + fmt(r.hit_ratio_error_pct, 2) + "%");
    v.require(std::abs(r.rw_ratio_error_pct) < kRwErrMaxPct,
              "seed " + std::to_string(seed) + " R:W error " + fmt(r.rw_ratio_error_pct, 2) + "%");
  }
  if (v.pass)
    v.detail << "max |hit ratio error| " << fmt(worst_hit, 2) << "%, max |R:W error| " << fmt(worst_rw, 2)
             << "% over " << kStitchSeeds << " seeds at 10% duty cycle";
}

// --- 9 ---------------------------------------------------------------------

void projection(Verdict& v) {
  std::mt19937_64 rng(900);
  std::normal_distribution<double> noise(0.0, kProjNoiseSigma);
  std::uniform_real_distribution<double> slope_d(0.005, 0.08), icpt_d(0.5, 2.0);
  double worst = 0, worst_vs_ols = 0;
  for (int t = 0; t < kProjTrials; ++t) {
    const double b = slope_d(rng), a = icpt_d(rng);
    std::vector<IpcPoint> pts;
    std::vector<double> xs, ys;
    for (int k = 0; k < 8; ++k) {
      const double bytes = std::ldexp(1.0, 20 + k);
      const double y = a + b * (20 + k) + noise(rng);
      pts.push_back({bytes, y});
      xs.push_back(20 + k);
      ys.push_back(y);
    }
    auto p = project_ipc(pts, std::ldexp(1.0, 30));
    worst = std::max(worst, std::abs(p.slope - b));
    worst_vs_ols = std::max(worst_vs_ols, std::abs(p.slope - oracle::ols(xs, ys).first));
  }
  v.require(worst <= kProjSlopeTol, "slope error " + std::to_string(worst));
  v.require(worst_vs_ols <= kProjExactTol, "slope differs from least squares by " + std::to_string(worst_vs_ols));

  double two_point = 0;
  for (int t = 0; t < kProjTrials; ++t) {
    const double b = slope_d(rng), a = icpt_d(rng);
    const double x1 = 20 + static_cast<double>(rng() % 5), x2 = x1 + 1 + static_cast<double>(rng() % 5);
    auto p = project_ipc({{std::ldexp(1.0, static_cast<int>(x1)), a + b * x1},
                          {std::ldexp(1.0, static_cast<int>(x2)), a + b * x2}},
                         std::ldexp(1.0, 32));
    two_point = std::max({two_point, std::abs(p.slope - b), std::abs(p.projected - (a + b * 32))});
  }
  v.require(two_point <= kProjExactTol, "two-point deviation " + std::to_string(two_point));
  if (v.pass)
    v.detail << "max slope error " << fmt(worst, 5) << " under sigma " << kProjNoiseSigma << ", two-point deviation "
             << two_point;
}

// --- 10 --------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = os.str();
  }
  return files;
}

void determinism(Verdict& v) {
  const fs::path root = fs::temp_directory_path() / "memscope_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "run.toml");
    cfg << "[synth]\nn_cores = 2\nevents = 40000\ncode_footprint = 512KiB\ndata_footprint = 8MiB\n"
           "burst_prob = 0.1\n\n[stitch]\nwindow = 500\ngap = 4500\n\n[prefetch]\nkind = next_line\n"
           "degree = 2\ndistance = 4\n\n[tier]\nepochs = 10\n";
  }
  const std::string config = (root / "run.toml").string();

  auto run_twice = [&](const std::string& label, std::vector<std::string> args) -> fs::path {
    std::vector<std::map<std::string, std::string>> snaps;
    for (const char* side : {"a", "b"}) {
      const fs::path out = root / side / label;
      auto full = args;
      full.insert(full.end(), {"--out", out.string()});
      std::ostringstream o, e;
      const int code = cli::run(full, o, e);
      v.require(code == 0, label + " exited " + std::to_string(code) + ": " + e.str());
      snaps.push_back(code == 0 ? snapshot(out) : std::map<std::string, std::string>{});
    }
    v.require(!snaps[0].empty() && snaps[0] == snaps[1], label + " outputs differ");
    return root / "a" / label;
  };

  const auto gen = run_twice("gen", {"gen", "--config", config, "--seed", "7"});
  const std::string trace = (gen / "trace.bin").string();
  run_twice("cache", {"cache", "--config", config, "--set", "cache.sweep_code_sizes=256KiB,512KiB", trace});
  run_twice("tlb", {"tlb", "--config", config, trace});
  run_twice("prefetch", {"prefetch", "--config", config, trace});
  run_twice("prefetch-json", {"prefetch", "--config", config, "--format", "json", trace});
  run_twice("tier", {"tier", "--config", config, "--seed", "3", trace});
  run_twice("tier-json", {"tier", "--config", config, "--seed", "3", "--format", "json", trace});
  run_twice("heatmap", {"analyze", "heatmap", "--config", config, trace});
  run_twice("corr", {"analyze", "corr", "--config", config, "--set", "analyze.event=ifetch", trace});
  run_twice("bwdist", {"analyze", "bwdist", "--config", config, "--set", "analyze.windows=10000,40000", trace});
  run_twice("project", {"analyze", "project", "--set", "analyze.points=1MiB:1.0,2MiB:1.04,4MiB:1.07",
                        "--set", "analyze.target=16MiB"});
  const auto st = run_twice("stitch", {"stitch", "--config", config, "--seed", "5", trace});
  run_twice("validate", {"validate", "--config", config, trace, (st / "trace.bin").string()});
  run_twice("paperlab", {"paperlab", "all", "--seed", "2", "--set", "paperlab.events=20000", "--set",
                         "paperlab.seeds=1", "--set", "paperlab.tier_events=200000"});
  fs::remove_all(root);
  if (v.pass) v.detail << "14 invocations across all subcommands byte-identical on re-run";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Verdict&)> fn;
  };
  const std::vector<Criterion> all{
      {1, "prefetch formula exactness", kFormulaBudgetS, formulas},
      {2, "cache/TLB oracle equivalence", kOracleBudgetS, oracle_equivalence},
      {3, "code-sharing correlation", kCorrBudgetS, code_sharing},
      {4, "shared-structure benefit", kShareBudgetS, shared_structures},
      {5, "bandwidth-distribution skew", kBwBudgetS, bandwidth_skew},
      {6, "tiering ordering and cost", kTierBudgetS, tiering},
      {7, "prefetcher direction", kPfBudgetS, prefetch_direction},
      {8, "stitch fidelity", kStitchBudgetS, stitch_fidelity},
      {9, "projection correctness", kProjBudgetS, projection},
      {10, "determinism", kDetBudgetS, determinism},
  };
  int failed = 0;
  for (const auto& c : all) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(secs < c.budget_s, "runtime " + fmt(secs, 2) + " s over budget " + fmt(c.budget_s, 0) + " s");
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ", " << fmt(secs, 2)
              << " s): " << v.detail.str() << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
