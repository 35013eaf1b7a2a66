#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "cli_internal.hpp"
#include "memscope/analytics.hpp"
#include "memscope/error.hpp"

namespace fs = std::filesystem;

namespace memscope::cli {

const char* version() { return MEMSCOPE_VERSION; }

std::string Table::csv() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << (row[i].is_string() ? row[i].get<std::string>() : row[i].dump());
    }
    os << '\n';
  }
  return os.str();
}

Json Table::json() const {
  Json out = Json::array();
  for (const auto& row : rows) {
    Json obj = Json::object();
    for (std::size_t i = 0; i < columns.size() && i < row.size(); ++i) obj[columns[i]] = row[i];
    out.push_back(std::move(obj));
  }
  return out;
}

Run::Run(Config& cfg, fs::path out, std::optional<std::uint64_t> seed, std::string format, unsigned jobs,
         std::ostream& log)
    : cfg(cfg),
      seed(seed),
      format(std::move(format)),
      jobs(jobs),
      log(log),
      out_(std::move(out)),
      files_(std::make_shared<std::vector<Json>>()) {}

Run Run::sub(const std::string& sub) {
  Run r(cfg, out_ / sub, seed, format, jobs, log);
  r.prefix_ = prefix_ + sub + "/";
  r.files_ = files_;
  return r;
}

void Run::note(const std::string& rel, const std::string& content) {
  Json f;
  f["name"] = prefix_ + rel;
  f["bytes"] = content.size();
  f["fnv1a"] = config_hash(content);
  files_->push_back(std::move(f));
}

void Run::write(const std::string& rel, const std::string& content) {
  const fs::path path = out_ / rel;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << content;
  if (!f) throw IoError("write failed: " + path.string());
  note(rel, content);
}

void Run::write_trace(const std::string& rel, const MemoryTrace& trace, TraceFormat format) {
  std::ostringstream os(std::ios::binary);
  memscope::write_trace(trace, os, format);
  write(rel, os.str());
}

void Run::write_page_table(const std::string& rel, const PageTableSnapshot& table) {
  const fs::path path = out_ / rel;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  memscope::write_page_table(table, path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  note(rel, os.str());
}

void Run::report(const Table& table, const std::string& prefix) {
  if (format == "json")
    write(prefix + "report.json", table.json().dump(2) + "\n");
  else
    write(prefix + "report.csv", table.csv());
}

void Run::finish(const std::string& command, const std::vector<std::string>& inputs) {
  const std::string echo = cfg.echo();
  write("config.toml", echo);
  Json m;
  m["tool"] = "memscope";
  m["version"] = version();
  m["command"] = command;
  m["inputs"] = inputs;
  m["format"] = format;
  if (seed) m["seed"] = *seed;
  m["config_fnv1a"] = config_hash(echo);
  m["files"] = *files_;
  const fs::path path = out_ / "manifest.json";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << m.dump(2) << '\n';
}

SynthSpec synth_from(Config& cfg, const std::optional<std::uint64_t>& seed, const std::string& section) {
  auto k = [&](const char* key) { return section + "." + key; };
  SynthSpec s;
  s.n_cores = static_cast<std::uint32_t>(cfg.u64(k("n_cores"), s.n_cores));
  const auto mode = cfg.str(k("mode"), "multithread");
  if (mode == "multithread")
    s.mode = SharingMode::MultiThread;
  else if (mode == "multiprocess")
    s.mode = SharingMode::MultiProcess;
  else
    throw ConfigError("'" + k("mode") + "' must be multithread or multiprocess");
  s.code_footprint_bytes = cfg.bytes(k("code_footprint"), s.code_footprint_bytes);
  s.code_zipf_s = cfg.num(k("code_zipf"), s.code_zipf_s);
  s.data_footprint_bytes = cfg.bytes(k("data_footprint"), s.data_footprint_bytes);
  s.data_zipf_s = cfg.num(k("data_zipf"), s.data_zipf_s);
  s.code_share = cfg.num(k("code_share"), s.code_share);
  s.disjoint_private_code = cfg.flag(k("disjoint_private_code"), s.disjoint_private_code);
  s.ifetch_fraction = cfg.num(k("ifetch_fraction"), s.ifetch_fraction);
  s.read_write_ratio = cfg.num(k("read_write_ratio"), s.read_write_ratio);
  s.n_events = cfg.u64(k("events"), s.n_events);
  if (seed) cfg.set(k("seed"), std::to_string(*seed));
  s.rng_seed = cfg.u64(k("seed"), s.rng_seed);
  if (auto ls = cfg.opt_u64(k("layout_seed"))) s.layout_seed = *ls;
  s.burst_prob = cfg.num(k("burst_prob"), s.burst_prob);
  s.burst_mean_lines = cfg.num(k("burst_mean_lines"), s.burst_mean_lines);
  s.code_huge_pages = cfg.flag(k("code_huge_pages"), s.code_huge_pages);
  s.emit_physical = cfg.flag(k("emit_physical"), s.emit_physical);
  s.page_size = static_cast<std::uint32_t>(cfg.bytes(k("page_size"), s.page_size));
  s.line_size = static_cast<std::uint32_t>(cfg.bytes(k("line_size"), s.line_size));
  check_spec(s);
  return s;
}

std::vector<CacheLevelConfig> hierarchy_from(Config& cfg, std::uint32_t n_cores, const std::string& section) {
  const auto preset = cfg.str(section + ".preset", "gen4");
  std::vector<CacheLevelConfig> levels;
  if (preset == "gen4") {
    levels = gen4_hierarchy(n_cores, static_cast<std::uint32_t>(cfg.u64(section + ".l2_cluster", 1)));
  } else if (preset == "custom") {
    for (const auto& name : cfg.list(section + ".levels", {})) {
      const std::string p = "level." + name + ".";
      CacheLevelConfig l;
      l.name = name;
      l.size_bytes = cfg.bytes(p + "size", 0);
      l.ways = static_cast<std::uint32_t>(cfg.u64(p + "ways", 8));
      l.line_size = static_cast<std::uint32_t>(cfg.bytes(p + "line", 64));
      l.share_cluster = static_cast<std::uint32_t>(cfg.u64(p + "share_cluster", 1));
      const auto cls = cfg.str(p + "classes", "unified");
      if (cls == "code")
        l.classes = ServedClasses::Code;
      else if (cls == "data")
        l.classes = ServedClasses::Data;
      else if (cls == "unified")
        l.classes = ServedClasses::Unified;
      else
        throw ConfigError("'" + p + "classes' must be code, data or unified");
      if (auto cw = cfg.opt_u64(p + "code_ways")) l.code_ways = static_cast<std::uint32_t>(*cw);
      if (auto dw = cfg.opt_u64(p + "data_ways")) l.data_ways = static_cast<std::uint32_t>(*dw);
      levels.push_back(l);
    }
    if (levels.empty()) throw ConfigError("'" + section + ".levels' lists no levels");
  } else {
    throw ConfigError("'" + section + ".preset' must be gen4 or custom");
  }
  return levels;
}

TlbConfig tlb_from(Config& cfg, const std::string& section) {
  auto k = [&](const char* key) { return section + "." + key; };
  auto c = gen4_itlb(static_cast<std::uint32_t>(cfg.u64(k("l2_cluster"), 1)),
                     static_cast<std::uint32_t>(cfg.u64(k("l2_entries_per_core"), 1536)));
  c.has_l2 = cfg.flag(k("has_l2"), true);
  c.walk_cost = cfg.num(k("walk_cost"), c.walk_cost);
  return c;
}

PrefetcherConfig prefetch_from(Config& cfg, const std::string& section) {
  auto k = [&](const char* key) { return section + "." + key; };
  PrefetcherConfig pf;
  const auto kind = cfg.str(k("kind"), "none");
  auto parsed = parse_prefetcher_kind(kind);
  if (!parsed) throw ConfigError("'" + k("kind") + "' must be none, next_line or stride_streamer");
  pf.kind = *parsed;
  pf.degree = static_cast<std::uint32_t>(cfg.u64(k("degree"), pf.degree));
  pf.distance = static_cast<std::uint32_t>(cfg.u64(k("distance"), pf.distance));
  pf.table_entries = static_cast<std::uint32_t>(cfg.u64(k("table_entries"), pf.table_entries));
  pf.level = cfg.str(k("level"), pf.level);
  pf.throttle_threshold = cfg.num(k("throttle_threshold"), pf.throttle_threshold);
  pf.throttle_window = static_cast<std::uint32_t>(cfg.u64(k("throttle_window"), pf.throttle_window));
  check_prefetcher(pf);
  return pf;
}

std::vector<TierConfig> tiers_from(Config& cfg, std::uint64_t stream_len, const std::optional<std::uint64_t>& seed) {
  std::vector<TierConfig> out;
  const auto epochs = cfg.u64("tier.epochs", 40);
  if (epochs == 0) throw ConfigError("'tier.epochs' must be >= 1");
  for (const auto& name : cfg.list("tier.configs", {"baseline", "ideal", "tiered"})) {
    TierConfig c;
    if (name == "baseline")
      c = baseline_tier();
    else if (name == "ideal")
      c = ideal_tier();
    else
      c = tiered_tier();
    c.name = name;
    c.migration_epoch = std::max<std::uint64_t>(1, stream_len / epochs);
    const std::string p = "tier." + name + ".";
    c.near_capacity_fraction = cfg.num(p + "near_capacity_fraction", c.near_capacity_fraction);
    c.near_bw = cfg.num(p + "near_bw", c.near_bw);
    c.far_bw = cfg.num(p + "far_bw", c.far_bw);
    c.near_latency = cfg.num(p + "near_latency", c.near_latency);
    c.far_latency = cfg.num(p + "far_latency", c.far_latency);
    c.migration_epoch = cfg.u64(p + "migration_epoch", c.migration_epoch);
    c.promote_budget = static_cast<std::uint32_t>(cfg.u64(p + "promote_budget", c.promote_budget));
    c.hotness_decay = cfg.num(p + "hotness_decay", c.hotness_decay);
    const auto placement = cfg.str(p + "placement", c.placement == InitialPlacement::Random ? "random" : "first_touch");
    if (placement == "random")
      c.placement = InitialPlacement::Random;
    else if (placement == "first_touch")
      c.placement = InitialPlacement::FirstTouch;
    else
      throw ConfigError("'" + p + "placement' must be random or first_touch");
    if (seed) cfg.set(p + "seed", std::to_string(*seed));
    c.seed = cfg.u64(p + "seed", c.seed);
    c.total_pages = cfg.u64(p + "total_pages", c.total_pages);
    c.lines_per_page = static_cast<std::uint32_t>(cfg.u64(p + "lines_per_page", c.lines_per_page));
    c.demand = cfg.num(p + "demand", c.demand);
    c.baseline_bw = cfg.num(p + "baseline_bw", c.baseline_bw);
    c.baseline_latency = cfg.num(p + "baseline_latency", c.baseline_latency);
    c.near_unit_cost = cfg.num(p + "near_unit_cost", c.near_unit_cost);
    c.far_unit_cost = cfg.num(p + "far_unit_cost", c.far_unit_cost);
    check_tier_config(c);
    out.push_back(c);
  }
  return out;
}

StitchSpec stitch_from(Config& cfg, const std::optional<std::uint64_t>& seed) {
  StitchSpec s;
  s.window_len = cfg.u64("stitch.window", s.window_len);
  s.gap_len = cfg.u64("stitch.gap", s.gap_len);
  if (seed) cfg.set("stitch.seed", std::to_string(*seed));
  s.rng_seed = cfg.u64("stitch.seed", s.rng_seed);
  return s;
}

MemoryTrace load_trace(const std::string& path) {
  if (!fs::exists(path)) throw IoError("no such trace: " + path);
  return read_trace(fs::path(path));
}

PageTableSnapshot page_table_for(Config& cfg, const std::string& trace_path, const MemoryTrace& trace,
                                 const std::string& section) {
  if (auto p = cfg.opt_str(section + ".page_table")) return read_page_table(*p);
  const fs::path sibling = fs::path(trace_path).parent_path() / "pagetable.csv";
  if (fs::exists(sibling)) return read_page_table(sibling);
  if (trace.meta.has_physical) return PageTableSnapshot::from_trace(trace);
  throw PreconditionError("no page table: set " + section + ".page_table or use a trace with physical addresses");
}

Table cache_table(const CacheStats& stats) {
  Table t;
  t.columns = {"level", "class", "accesses", "hits", "misses", "evictions", "mpki"};
  for (std::size_t i = 0; i < stats.levels.size(); ++i) {
    for (auto cls : {AccessClass::Code, AccessClass::Data}) {
      const auto& c = stats.levels[i][cls];
      if (c.accesses == 0) continue;
      t.add({stats.levels[i].name, cls == AccessClass::Code ? "code" : "data", c.accesses, c.hits, c.misses,
             c.evictions, stats.mpki(i, cls)});
    }
  }
  return t;
}

Table tlb_table(const TlbStats& stats) {
  Table t;
  t.columns = {"level", "lookups", "hits", "extended", "misses", "walks", "mpki", "extension_churn", "asid_overflows"};
  for (const auto* s : {&stats.l1, &stats.l2}) {
    if (s->name.empty()) continue;
    t.add({s->name, s->lookups, s->hits, s->asid_extension_hits, s->misses, s->walks, s->mpki, s->extension_churn,
           s->asid_overflows});
  }
  return t;
}

Table prefetch_table(const PrefetchReport& r) {
  Table t;
  t.columns = {"metric", "value"};
  t.add({"accuracy", r.accuracy ? Json(*r.accuracy) : Json("N/A")});
  t.add({"coverage", r.coverage ? Json(*r.coverage) : Json("N/A")});
  t.add({"traffic_lines_pf_on", r.traffic_lines_pf_on});
  t.add({"traffic_lines_pf_off", r.traffic_lines_pf_off});
  t.add({"traffic_overhead_pct", r.traffic_overhead_pct});
  t.add({"total_prefetched", r.on.account.total_prefetched});
  t.add({"used", r.on.account.used});
  t.add({"unused_evicted", r.on.account.unused_evicted});
  t.add({"end_resident_unused", r.on.account.end_resident_unused});
  t.add({"total_lines_brought_in", r.on.account.total_lines_brought_in});
  t.add({"throttled", r.on.throttled});
  return t;
}

Table tier_table(const std::vector<TierReport>& reports, const std::vector<TierConfig>& configs) {
  Table t;
  t.columns = {"config",         "near_capacity_fraction", "near_bw",          "far_capacity_fraction",
               "far_bw",         "relative_throughput",    "measured_near_bw", "measured_far_bw",
               "cost_near",      "cost_far",               "cost_total",       "throughput_per_cost",
               "warmup_epochs",  "migrations"};
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const auto& c = configs[i];
    t.add({r.name, c.near_capacity_fraction, c.near_bw, 1.0 - c.near_capacity_fraction, c.far_bw,
           r.relative_throughput, r.near_bw_measured, r.far_bw_measured,
           c.near_capacity_fraction * c.near_unit_cost / c.far_unit_cost, 1.0 - c.near_capacity_fraction,
           r.relative_cost, r.throughput_per_cost, r.warmup_epochs, r.migrations});
  }
  return t;
}

namespace {

TraceFormat trace_format(Config& cfg, const std::string& key) {
  const auto f = cfg.str(key, "binary");
  if (f == "binary") return TraceFormat::Binary;
  if (f == "text") return TraceFormat::Text;
  throw ConfigError("'" + key + "' must be binary or text");
}

std::string trace_name(TraceFormat f) { return f == TraceFormat::Binary ? "trace.bin" : "trace.txt"; }

void need_inputs(const std::vector<std::string>& inputs, std::size_t n, const std::string& what) {
  if (inputs.size() != n) throw PreconditionError("expected " + what);
}

void cmd_gen(Run& run) {
  auto spec = synth_from(run.cfg, run.seed);
  const auto fmt = trace_format(run.cfg, "gen.trace_format");
  auto out = generate(spec);
  run.write_trace(trace_name(fmt), out.trace, fmt);
  run.write_page_table("pagetable.csv", out.page_table);
  Table t;
  t.columns = {"records", "n_cores", "mapped_pages", "has_physical"};
  t.add({out.trace.records.size(), out.trace.meta.n_cores, out.page_table.size(), out.trace.meta.has_physical});
  run.report(t);
}

void cmd_cache(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 1, "one trace");
  auto trace = load_trace(inputs[0]);
  auto levels = hierarchy_from(run.cfg, trace.meta.n_cores);
  run.report(cache_table(simulate_hierarchy(trace, levels)));
  auto sizes = run.cfg.list("cache.sweep_code_sizes", {});
  if (sizes.empty()) return;
  std::vector<std::uint64_t> bytes;
  for (const auto& s : sizes) bytes.push_back(parse_bytes(s));
  const auto level = run.cfg.str("cache.sweep_level", "L2");
  auto points = l2_sweep(trace, levels, bytes, level, run.cfg.bytes("cache.sweep_data_bytes", 0), run.jobs);
  Table t;
  t.columns = {"requested_code_bytes", "code_bytes", "code_ways", "data_ways", "code_mpki", "data_mpki"};
  for (const auto& p : points) {
    std::size_t idx = 0;
    while (p.stats.levels[idx].name != level) ++idx;
    t.add({p.requested_code_bytes, p.code_bytes, p.code_ways, p.data_ways, p.stats.mpki(idx, AccessClass::Code),
           p.stats.mpki(idx, AccessClass::Data)});
  }
  run.report(t, "sweep_");
}

void cmd_tlb(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 1, "one trace");
  auto trace = load_trace(inputs[0]);
  auto cfg = tlb_from(run.cfg);
  auto table = page_table_for(run.cfg, inputs[0], trace, "tlb");
  run.report(tlb_table(simulate_itlb(trace, cfg, table)));
}

void cmd_prefetch(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 1, "one trace");
  auto trace = load_trace(inputs[0]);
  auto levels = hierarchy_from(run.cfg, trace.meta.n_cores);
  auto pf = prefetch_from(run.cfg);
  auto report = compare_prefetch(trace, levels, pf);
  if (run.format == "json")
    run.write("report.json", prefetch_report_json(report));
  else
    run.report(prefetch_table(report));
}

void cmd_tier(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 1, "one trace");
  auto trace = load_trace(inputs[0]);
  auto levels = hierarchy_from(run.cfg, trace.meta.n_cores);
  auto pf = prefetch_from(run.cfg);
  auto stream = collect_llc_misses(trace, levels, pf);
  auto configs = tiers_from(run.cfg, stream.size(), run.seed);
  auto reports = compare_tiers(stream, configs, run.jobs);
  if (run.format == "json")
    run.write("report.json", tier_report_json(reports, configs));
  else
    run.report(tier_table(reports, configs));
  for (const auto& r : reports) run.write("epochs_" + r.name + ".csv", tier_epochs_csv(r));
}

std::vector<SampleStream> sample_from(Run& run, const std::string& trace_path, const MemoryTrace& trace) {
  const auto event = run.cfg.str("analyze.event", "itlb");
  const auto period = run.cfg.u64("analyze.period", 1);
  if (event == "itlb") {
    auto cfg = tlb_from(run.cfg);
    auto table = page_table_for(run.cfg, trace_path, trace, "analyze");
    return sample_itlb_misses(trace, cfg, table, period);
  }
  if (event == "llc") return sample_llc_load_misses(trace, hierarchy_from(run.cfg, trace.meta.n_cores), period);
  if (event == "load") return sample_loads(trace, period);
  if (event == "ifetch") return sample_ifetches(trace, period);
  throw ConfigError("'analyze.event' must be itlb, llc, load or ifetch");
}

void cmd_heatmap(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 1, "one trace");
  auto trace = load_trace(inputs[0]);
  auto streams = sample_from(run, inputs[0], trace);
  const auto slice = run.cfg.bytes("analyze.slice", 2ull << 20);
  const auto bin = run.cfg.bytes("analyze.bin", 4096);
  std::vector<std::optional<Heatmap>> maps;
  for (const auto& s : streams) {
    if (s.samples.empty()) {
      run.log << "core " << s.core << ": no samples (period " << s.period << ", " << s.events << " events)\n";
      maps.emplace_back();
      continue;
    }
    maps.push_back(heatmap(s, slice, bin));
    run.write("heatmap_core" + std::to_string(s.core) + ".csv", heatmap_csv(*maps.back()));
  }
  Table t;
  t.columns = {"core_a", "core_b", "cosine_similarity"};
  for (std::size_t a = 0; a < maps.size(); ++a)
    for (std::size_t b = a + 1; b < maps.size(); ++b)
      t.add({a, b, maps[a] && maps[b] ? Json(cosine_similarity(*maps[a], *maps[b])) : Json("N/A")});
  run.report(t);
}

void cmd_corr(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 1, "one trace");
  auto trace = load_trace(inputs[0]);
  auto streams = sample_from(run, inputs[0], trace);
  const auto page = run.cfg.bytes("analyze.page_size", trace.meta.page_size);
  Table t;
  t.columns = {"core_a", "core_b", "samples_a", "samples_b", "pages", "pearson_r"};
  for (std::size_t a = 0; a < streams.size(); ++a)
    for (std::size_t b = a + 1; b < streams.size(); ++b) {
      auto pp = page_counts(streams[a], streams[b], page);
      Json r;
      try {
        r = pearson(pp.a, pp.b);
      } catch (const UndefinedValueError&) {
        r = "N/A";
      }
      t.add({a, b, streams[a].samples.size(), streams[b].samples.size(), pp.pages.size(), r});
    }
  run.report(t);
}

void cmd_bwdist(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 1, "one trace");
  auto trace = load_trace(inputs[0]);
  if (!run.cfg.has("analyze.event")) run.cfg.set("analyze.event", "llc");
  auto streams = sample_from(run, inputs[0], trace);
  std::vector<double> percents;
  for (const auto& p : run.cfg.list("analyze.percentiles", {"50", "90", "99"})) percents.push_back(std::stod(p));
  auto allocated = run.cfg.opt_u64("analyze.allocated_pages");
  const std::uint64_t last = trace.records.empty() ? 0 : trace.records.back().seq + 1;
  auto windows = run.cfg.list("analyze.windows", {std::to_string(last)});
  Table t;
  t.columns = {"window", "samples", "touched_pages", "active_fraction"};
  for (double p : percents) {
    std::ostringstream tag_os;
    tag_os << 'p' << p;
    const std::string tag = tag_os.str();
    for (const char* c : {"_pages", "_bytes", "_fraction"}) t.columns.push_back(tag + c);
  }
  std::optional<BandwidthDistribution> whole;
  for (const auto& w : windows) {
    const std::uint64_t len = std::stoull(w);
    auto dist = bw_distribution(slice_streams(streams, last > len ? last - len : 0, last), {}, trace.meta.page_size);
    std::vector<Json> row{len, dist.total_samples, dist.total_pages,
                          allocated ? Json(static_cast<double>(dist.total_pages) / static_cast<double>(*allocated))
                                    : Json("N/A")};
    for (double p : percents) {
      auto fp = dist.footprint(p);
      row.push_back(fp.pages);
      row.push_back(fp.bytes);
      row.push_back(fp.fraction_of_touched);
    }
    t.add(row);
    if (!whole || len >= last) whole = std::move(dist);
  }
  run.report(t);
  std::ostringstream curve;
  curve << "rank,page,samples,cumulative\n";
  for (std::size_t i = 0; i < whole->pages.size(); ++i)
    curve << i + 1 << ',' << whole->pages[i].first << ',' << whole->pages[i].second << ','
          << Json(whole->cumulative[i]).dump() << '\n';
  run.write("curve.csv", curve.str());
}

void cmd_project(Run& run, const std::vector<std::string>& inputs) {
  if (!inputs.empty()) throw PreconditionError("analyze project takes no trace");
  std::vector<IpcPoint> points;
  for (const auto& item : run.cfg.list("analyze.points", {})) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("'analyze.points' entries look like 1MiB:1.00");
    points.push_back({static_cast<double>(parse_bytes(item.substr(0, colon))), std::stod(item.substr(colon + 1))});
  }
  const auto target = static_cast<double>(run.cfg.bytes("analyze.target", 0));
  auto p = project_ipc(points, target);
  Table t;
  t.columns = {"target_bytes", "projected_ipc", "slope_per_doubling", "intercept", "distinct_sizes"};
  t.add({target, p.projected, p.slope, p.intercept, p.distinct_sizes});
  run.report(t);
}

void cmd_stitch(Run& run, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw PreconditionError("expected one or more source traces");
  std::vector<MemoryTrace> sources;
  for (const auto& in : inputs) sources.push_back(load_trace(in));
  auto spec = stitch_from(run.cfg, run.seed);
  const auto fmt = trace_format(run.cfg, "stitch.trace_format");
  auto result = stitch(sources, spec, inputs);
  run.write_trace(trace_name(fmt), result.trace, fmt);
  run.write("stitch_manifest.json", stitch_manifest_json(result, inputs));
  Table t;
  t.columns = {"sources", "windows", "records"};
  t.add({sources.size(), result.manifest.size(), result.trace.records.size()});
  run.report(t);
}

CacheLevelConfig l1d_from(Config& cfg) {
  CacheLevelConfig l;
  l.name = "L1D";
  l.size_bytes = cfg.bytes("validate.l1d_size", 32ull << 10);
  l.ways = static_cast<std::uint32_t>(cfg.u64("validate.l1d_ways", 8));
  l.line_size = static_cast<std::uint32_t>(cfg.bytes("validate.line", 64));
  l.classes = ServedClasses::Data;
  return l;
}

void cmd_validate(Run& run, const std::vector<std::string>& inputs) {
  need_inputs(inputs, 2, "a full trace and a stitched trace");
  auto full = load_trace(inputs[0]);
  auto stitched = load_trace(inputs[1]);
  auto r = validate(full, stitched, l1d_from(run.cfg));
  Table t;
  t.columns = {"metric", "full", "stitched", "error_pct"};
  t.add({"l1d_hit_ratio", r.l1d_hit_ratio_full, r.l1d_hit_ratio_stitched, r.hit_ratio_error_pct});
  t.add({"read_write_ratio", r.rw_ratio_full, r.rw_ratio_stitched, r.rw_ratio_error_pct});
  run.report(t);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trace-driven memory hierarchy profiling and simulation toolkit", "memscope"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  std::string config_path, out_dir = "memscope-out", format = "csv";
  std::uint64_t seed_value = 0;
  unsigned jobs = 1;
  std::vector<std::string> overrides, inputs;
  std::string recipe;
  CLI::Option* seed_opt = nullptr;
  std::vector<CLI::Option*> seed_opts;

  auto common = [&](CLI::App* sc, bool takes_inputs) {
    sc->add_option("--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
    sc->add_option("--out", out_dir, "Output directory");
    seed_opts.push_back(sc->add_option("--seed", seed_value, "Seed overriding every seed in the config"));
    sc->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
    sc->add_option("--jobs", jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
    sc->add_option("--set", overrides, "Override a config value: section.key=value")->allow_extra_args(false);
    if (takes_inputs) sc->add_option("inputs", inputs, "Input trace files");
  };

  std::string command;
  auto add = [&](CLI::App* parent, const std::string& name, const std::string& help, bool takes_inputs) {
    auto* sc = parent->add_subcommand(name, help);
    common(sc, takes_inputs);
    sc->callback([&command, sc] {
      command = sc->get_name();
      if (sc->get_parent() && sc->get_parent()->get_parent()) command = sc->get_parent()->get_name() + " " + command;
    });
    return sc;
  };

  add(&app, "gen", "Generate a synthetic trace and its page table", false);
  add(&app, "cache", "Cache hierarchy simulation", true);
  add(&app, "tlb", "I-TLB simulation", true);
  add(&app, "prefetch", "Prefetcher on/off comparison", true);
  add(&app, "tier", "Bandwidth tiering comparison on the LLC miss stream", true);
  auto* analyze = app.add_subcommand("analyze", "Sampling analytics");
  analyze->require_subcommand(1);
  add(analyze, "heatmap", "Per-core address heatmaps", true);
  add(analyze, "corr", "Pairwise per-page Pearson correlation", true);
  add(analyze, "bwdist", "Memory bandwidth distribution", true);
  add(analyze, "project", "Log-space IPC projection", false);
  add(&app, "stitch", "Stitch periodic capture windows", true);
  add(&app, "validate", "L1D and read/write fidelity of a stitched trace", true);
  auto* lab = add(&app, "paperlab", "Canned analysis recipes", false);
  lab->add_option("recipe", recipe, "Recipe name or all")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'memscope --help' for usage\n";
    return 2;
  }
  for (auto* o : seed_opts)
    if (o->count()) seed_opt = o;

  try {
    Config cfg = config_path.empty() ? Config() : Config::load(config_path);
    for (const auto& o : overrides) {
      auto eq = o.find('=');
      if (eq == std::string::npos) {
        err << "usage error: --set expects section.key=value, got '" << o << "'\n";
        return 2;
      }
      cfg.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    std::optional<std::uint64_t> seed;
    if (seed_opt) seed = seed_value;
    if (command == "paperlab" && recipe != "all") {
      auto names = paperlab_recipes();
      if (std::find(names.begin(), names.end(), recipe) == names.end()) {
        err << "usage error: unknown recipe '" << recipe << "'; choose all";
        for (const auto& n : names) err << ", " << n;
        err << "\n";
        return 2;
      }
    }
    fs::create_directories(out_dir);
    Run r(cfg, out_dir, seed, format, jobs, err);
    if (command == "gen")
      cmd_gen(r);
    else if (command == "cache")
      cmd_cache(r, inputs);
    else if (command == "tlb")
      cmd_tlb(r, inputs);
    else if (command == "prefetch")
      cmd_prefetch(r, inputs);
    else if (command == "tier")
      cmd_tier(r, inputs);
    else if (command == "analyze heatmap")
      cmd_heatmap(r, inputs);
    else if (command == "analyze corr")
      cmd_corr(r, inputs);
    else if (command == "analyze bwdist")
      cmd_bwdist(r, inputs);
    else if (command == "analyze project")
      cmd_project(r, inputs);
    else if (command == "stitch")
      cmd_stitch(r, inputs);
    else if (command == "validate")
      cmd_validate(r, inputs);
    else if (command == "paperlab")
      run_paperlab(r, recipe);
    cfg.reject_unknown();
    r.finish(command, inputs);
    out << "wrote " << out_dir << "\n";
    return 0;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const PropertyFailure& e) {
    err << "property failed: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << e.what() << "\n";
    return 1;
  }
}

}  // namespace memscope::cli
