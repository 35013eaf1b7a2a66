#include <random>
#include <sstream>

#include "cli_internal.hpp"
#include "memscope/analytics.hpp"
#include "memscope/error.hpp"

namespace memscope::cli {

namespace {

struct Lab {
  Run& run;
  std::uint64_t events;
  std::uint64_t seed;
};

SynthSpec base_spec(const Lab& lab, std::uint32_t cores) {
  SynthSpec s;
  s.n_cores = cores;
  s.n_events = lab.events;
  s.rng_seed = lab.seed;
  return s;
}

Json r_of(const std::vector<SampleStream>& streams) {
  try {
    return correlation(streams[0], streams[1]);
  } catch (const UndefinedValueError&) {
    return "N/A";
  }
}

void code_sharing(Lab& lab) {
  auto run = lab.run.sub("code-sharing");
  const auto seeds = lab.run.cfg.u64("paperlab.seeds", 3);
  Table t;
  t.columns = {"code", "seed", "ifetch_r", "itlb_miss_r"};
  for (std::uint64_t i = 0; i < seeds; ++i) {
    for (bool disjoint : {false, true}) {
      auto s = base_spec(lab, 2);
      s.rng_seed = lab.seed + i;
      s.code_share = disjoint ? 0.0 : 1.0;
      s.disjoint_private_code = disjoint;
      auto out = generate(s);
      auto fetches = sample_ifetches(out.trace, 1);
      t.add({disjoint ? "disjoint" : "shared", s.rng_seed, r_of(fetches),
             r_of(sample_itlb_misses(out.trace, gen4_itlb(), out.page_table, 1))});
      if (i == 0)
        for (const auto& st : fetches)
          run.write(std::string(disjoint ? "disjoint" : "shared") + "_heatmap_core" + std::to_string(st.core) + ".csv",
                    heatmap_csv(heatmap(st)));
    }
  }
  run.report(t);
}

// Shared code footprints of 1x..4x the per-core L2 capacity, private vs cluster-of-4.
void tlb_sharing(Lab& lab) {
  auto run = lab.run.sub("tlb-sharing");
  const auto entries = static_cast<std::uint32_t>(lab.run.cfg.u64("paperlab.itlb_l2_entries", 384));
  Table t;
  t.columns = {"footprint_x", "code_pages", "private_mpki", "shared_mpki", "reduction"};
  std::string violated;
  for (std::uint32_t x = 1; x <= 4; ++x) {
    auto s = base_spec(lab, 4);
    s.code_footprint_bytes = static_cast<std::uint64_t>(x) * entries * s.page_size;
    s.code_zipf_s = 0.6;
    s.ifetch_fraction = 0.7;
    auto out = generate(s);
    auto priv = simulate_itlb(out.trace, gen4_itlb(1, entries), out.page_table);
    auto shared = simulate_itlb(out.trace, gen4_itlb(4, entries), out.page_table);
    t.add({x, s.code_footprint_bytes / s.page_size, priv.l2.mpki, shared.l2.mpki,
           shared.l2.mpki > 0 ? Json(priv.l2.mpki / shared.l2.mpki) : Json("N/A")});
    if (shared.l2.mpki > priv.l2.mpki) violated += " " + std::to_string(x) + "x";
  }
  run.report(t);
  if (!violated.empty()) throw PropertyFailure("tlb-sharing: shared L2 I-TLB MPKI exceeds private at" + violated);
}

void cache_sharing(Lab& lab) {
  auto run = lab.run.sub("cache-sharing");
  Table t;
  t.columns = {"footprint_x", "code_bytes", "private_l2_code_mpki", "shared_l2_code_mpki", "private_l2_l3_ratio",
               "shared_l2_l3_ratio"};
  const std::uint64_t per_core = 1ull << 20;
  for (std::uint32_t x = 1; x <= 4; ++x) {
    auto s = base_spec(lab, 4);
    s.code_footprint_bytes = x * per_core;
    s.code_zipf_s = 0.6;
    s.ifetch_fraction = 0.7;
    s.data_footprint_bytes = 16ull << 20;
    auto out = generate(s);
    auto priv = simulate_hierarchy(out.trace, gen4_hierarchy(4, 1));
    auto shared = simulate_hierarchy(out.trace, gen4_hierarchy(4, 4));
    auto ratio = [](const CacheStats& st) -> Json {
      try {
        return st.code_mpki_ratio("L2", "L3");
      } catch (const UndefinedValueError&) {
        return "N/A";
      }
    };
    t.add({x, s.code_footprint_bytes, priv.mpki(2, AccessClass::Code), shared.mpki(2, AccessClass::Code), ratio(priv),
           ratio(shared)});
  }
  run.report(t);
}

void l2_partition(Lab& lab) {
  auto run = lab.run.sub("l2-partition");
  auto s = base_spec(lab, 1);
  s.code_footprint_bytes = 2ull << 20;
  s.code_zipf_s = 0.8;
  s.data_footprint_bytes = 64ull << 20;
  auto out = generate(s);
  auto levels = gen4_hierarchy(1);
  std::vector<std::uint64_t> sizes{128ull << 10, 256ull << 10, 384ull << 10, 512ull << 10, 640ull << 10,
                                   768ull << 10};
  auto points = l2_sweep(out.trace, levels, sizes, "L2", 0, lab.run.jobs);
  Table t;
  t.columns = {"code_bytes", "code_ways", "data_ways", "code_mpki", "data_mpki"};
  for (const auto& p : points)
    t.add({p.code_bytes, p.code_ways, p.data_ways, p.stats.mpki(2, AccessClass::Code),
           p.stats.mpki(2, AccessClass::Data)});
  run.report(t);
}

void bw_dist(Lab& lab) {
  auto run = lab.run.sub("bw-dist");
  auto s = base_spec(lab, 1);
  s.data_footprint_bytes = 16ull << 30;
  s.data_zipf_s = 1.2;
  s.ifetch_fraction = 0.05;
  s.read_write_ratio = 4.0;
  auto out = generate(s);
  const std::uint64_t allocated = s.data_footprint_bytes / s.page_size;
  const std::uint64_t last = out.trace.records.back().seq + 1;
  Table t;
  t.columns = {"event", "window", "touched_pages", "p90_pages", "p90_fraction", "active_fraction"};
  std::vector<std::pair<std::string, std::vector<SampleStream>>> sources{
      {"load", sample_loads(out.trace, 1)}, {"llc_load_miss", sample_llc_load_misses(out.trace, gen4_hierarchy(1), 1)}};
  for (const auto& [name, streams] : sources) {
    for (std::uint64_t div : {4, 2, 1}) {
      const std::uint64_t len = last / div;
      auto d = bw_distribution(slice_streams(streams, last - len, last), {}, s.page_size);
      auto fp = d.footprint(90);
      t.add({name, len, d.total_pages, fp.pages, fp.fraction_of_touched,
             static_cast<double>(d.total_pages) / static_cast<double>(allocated)});
      if (div == 1 && name == "load") run.write("bwdist_load.json", bw_distribution_json(d, {50, 90, 99}, allocated));
    }
  }
  run.report(t);
}

void tiering(Lab& lab) {
  auto run = lab.run.sub("tiering");
  auto s = base_spec(lab, 1);
  s.n_events = lab.run.cfg.u64("paperlab.tier_events", 4'000'000);
  s.data_footprint_bytes = 32ull << 20;
  s.data_zipf_s = 1.2;
  s.ifetch_fraction = 0.05;
  s.code_footprint_bytes = 1ull << 20;
  auto out = generate(s);
  auto stream = collect_llc_misses(out.trace, gen4_hierarchy(1));
  std::vector<TierConfig> configs{baseline_tier(), ideal_tier(), tiered_tier()};
  for (auto& c : configs) {
    c.migration_epoch = std::max<std::uint64_t>(1, stream.size() / 40);
    c.seed = lab.seed;
  }
  auto reports = compare_tiers(stream, configs, lab.run.jobs);
  run.report(tier_table(reports, configs));
  for (const auto& r : reports) run.write("epochs_" + r.name + ".csv", tier_epochs_csv(r));
  if (reports[2].relative_cost != 1.375)
    throw PropertyFailure("tiering: Tiered relative cost is " + Json(reports[2].relative_cost).dump());
}

MemoryTrace loads(std::vector<std::uint64_t> addrs) {
  MemoryTrace t;
  t.meta.origin = TraceOrigin::Synthetic;
  for (std::size_t i = 0; i < addrs.size(); ++i) {
    TraceRecord r;
    r.seq = i;
    r.kind = AccessKind::Load;
    r.vaddr = addrs[i];
    t.records.push_back(r);
  }
  return t;
}

void prefetch(Lab& lab) {
  auto run = lab.run.sub("prefetch");
  const std::uint64_t n = lab.events / 4;
  std::vector<std::uint64_t> seq(n), rnd(n);
  std::mt19937_64 rng(lab.seed);
  for (std::uint64_t i = 0; i < n; ++i) {
    seq[i] = (1ull << 32) + i * 64;
    rnd[i] = (1ull << 32) + uniform_below(rng, 1ull << 24) * 64;
  }
  auto s = base_spec(lab, 1);
  s.burst_prob = 0.3;
  s.burst_mean_lines = 8;
  s.data_footprint_bytes = 256ull << 20;
  std::vector<std::pair<std::string, MemoryTrace>> traces{
      {"sequential", loads(seq)}, {"uniform", loads(rnd)}, {"zipf_burst", generate(s).trace}};
  Table t;
  t.columns = {"prefetcher", "trace", "accuracy", "coverage", "traffic_on", "traffic_off", "overhead_pct"};
  for (auto kind : {PrefetcherKind::NextLine, PrefetcherKind::StrideStreamer}) {
    PrefetcherConfig pf;
    pf.kind = kind;
    pf.degree = 2;
    pf.distance = 4;
    for (const auto& [name, trace] : traces) {
      auto r = compare_prefetch(trace, gen4_hierarchy(1), pf);
      t.add({std::string(to_string(kind)), name, r.accuracy ? Json(*r.accuracy) : Json("N/A"),
             r.coverage ? Json(*r.coverage) : Json("N/A"), r.traffic_lines_pf_on, r.traffic_lines_pf_off,
             r.traffic_overhead_pct});
    }
  }
  run.report(t);
}

void stitch_lab(Lab& lab) {
  auto run = lab.run.sub("stitch");
  auto s = base_spec(lab, 1);
  s.burst_prob = 0.2;
  s.data_footprint_bytes = 8ull << 20;
  auto full = generate(s).trace;
  StitchSpec spec;
  spec.rng_seed = lab.seed;
  auto result = stitch({full}, spec, {"full"});
  run.write("stitch_manifest.json", stitch_manifest_json(result, {"full"}));
  CacheLevelConfig l1d;
  l1d.name = "L1D";
  l1d.size_bytes = 32ull << 10;
  l1d.ways = 8;
  l1d.classes = ServedClasses::Data;
  auto v = validate(full, result.trace, l1d);
  Table t;
  t.columns = {"metric", "full", "stitched", "error_pct"};
  t.add({"l1d_hit_ratio", v.l1d_hit_ratio_full, v.l1d_hit_ratio_stitched, v.hit_ratio_error_pct});
  t.add({"read_write_ratio", v.rw_ratio_full, v.rw_ratio_stitched, v.rw_ratio_error_pct});
  run.report(t);
}

using Recipe = void (*)(Lab&);

const std::vector<std::pair<std::string, Recipe>>& recipes() {
  static const std::vector<std::pair<std::string, Recipe>> r{
      {"code-sharing", code_sharing}, {"tlb-sharing", tlb_sharing}, {"cache-sharing", cache_sharing},
      {"l2-partition", l2_partition}, {"bw-dist", bw_dist},         {"tiering", tiering},
      {"prefetch", prefetch},         {"stitch", stitch_lab}};
  return r;
}

}  // namespace

std::vector<std::string> paperlab_recipes() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : recipes()) names.push_back(name);
  return names;
}

void run_paperlab(Run& run, const std::string& recipe) {
  if (run.seed) run.cfg.set("paperlab.seed", std::to_string(*run.seed));
  Lab lab{run, run.cfg.u64("paperlab.events", 400'000), run.cfg.u64("paperlab.seed", 1)};
  if (lab.events < 1000) throw ConfigError("'paperlab.events' must be at least 1000");
  for (const auto& [name, fn] : recipes()) {
    if (recipe != "all" && recipe != name) continue;
    run.log << "paperlab: " << name << "\n";
    fn(lab);
  }
}

}  // namespace memscope::cli
