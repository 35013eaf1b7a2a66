#include "memscope/prefetch.hpp"

#include <algorithm>
#include <limits>

#include "json.hpp"
#include "memscope/error.hpp"

namespace memscope {

std::string_view to_string(PrefetcherKind kind) {
  switch (kind) {
    case PrefetcherKind::None:
      return "NONE";
    case PrefetcherKind::NextLine:
      return "NEXT_LINE";
    case PrefetcherKind::StrideStreamer:
      return "STRIDE_STREAMER";
  }
  return "?";
}

std::optional<PrefetcherKind> parse_prefetcher_kind(std::string_view text) {
  if (text == "NONE" || text == "none") return PrefetcherKind::None;
  if (text == "NEXT_LINE" || text == "next_line") return PrefetcherKind::NextLine;
  if (text == "STRIDE_STREAMER" || text == "stride_streamer") return PrefetcherKind::StrideStreamer;
  return std::nullopt;
}

void check_prefetcher(const PrefetcherConfig& cfg) {
  if (cfg.kind == PrefetcherKind::None) return;
  if (cfg.degree < 1) throw ConfigError("prefetcher degree must be >= 1");
  if (cfg.distance < cfg.degree) throw ConfigError("prefetcher distance must be >= degree");
  if (cfg.kind == PrefetcherKind::StrideStreamer && cfg.table_entries == 0)
    throw ConfigError("stride streamer needs table_entries >= 1");
  if (cfg.throttle_threshold < 0.0) throw ConfigError("throttle_threshold must be >= 0");
  if (cfg.throttle_threshold > 0.0 && cfg.throttle_window == 0) throw ConfigError("throttle_window must be >= 1");
}

double accuracy(const PrefetchAccount& acct) {
  if (acct.total_prefetched == 0) throw UndefinedValueError("accuracy: no lines were prefetched (N/A)");
  return 1.0 - static_cast<double>(acct.unused_evicted) / static_cast<double>(acct.total_prefetched);
}

double coverage(const PrefetchAccount& acct) {
  const double num = static_cast<double>(acct.total_prefetched) - static_cast<double>(acct.unused_evicted);
  const double den = static_cast<double>(acct.total_lines_brought_in) - static_cast<double>(acct.unused_evicted);
  if (!(den > 0.0)) throw UndefinedValueError("coverage: lines brought in do not exceed unused evictions (N/A)");
  return num / den;
}

namespace {

struct StreamEntry {
  bool valid = false;
  std::uint64_t page = 0;
  std::uint64_t last_line = 0;
  std::int64_t stride = 0;
  std::uint32_t confidence = 0;
  std::uint64_t stamp = 0;
};

class PrefetchEngine final : public LevelHook, public HierarchyObserver {
 public:
  PrefetchEngine(const PrefetcherConfig& cfg, std::size_t level, std::uint64_t page_lines, std::size_t instances,
                 std::vector<PrefetchEvent>* log, HierarchyObserver* downstream)
      : cfg_(cfg),
        level_(level),
        page_lines_(page_lines),
        tables_(instances, std::vector<StreamEntry>(cfg.table_entries)),
        log_(log),
        downstream_(downstream) {}

  PrefetchAccount account;
  std::uint64_t prefetch_memory_lines = 0;
  std::uint64_t throttled = 0;

  void on_lookup(std::size_t record, std::size_t level, std::uint16_t core, std::uint64_t line, bool hit) override {
    if (downstream_) downstream_->on_lookup(record, level, core, line, hit);
    if (level != level_) return;
    if (hit) {
      log(PrefetchEventKind::DemandHit, line);
    } else {
      ++account.total_lines_brought_in;
      log(PrefetchEventKind::DemandFill, line);
    }
  }

  void on_evict(std::size_t level, const Victim& victim) override {
    if (downstream_) downstream_->on_evict(level, victim);
    if (level != level_) return;
    log(PrefetchEventKind::Evict, victim.line);
    if (victim.prefetched) ++account.unused_evicted;
  }

  void on_memory(std::size_t record, const TraceRecord& rec, std::uint64_t line) override {
    ++window_memory_;
    if (downstream_) downstream_->on_memory(record, rec, line);
  }

  void on_demand(CacheHierarchy& h, std::size_t level, std::size_t instance, const TraceRecord& rec, std::uint64_t line,
                 const SetAssocCache::Lookup& result) override {
    ++record_;
    if (result.was_prefetched) ++account.used;
    if (cfg_.throttle_threshold > 0.0 && ++window_accesses_ >= cfg_.throttle_window) {
      last_utilization_ = static_cast<double>(window_memory_) / static_cast<double>(window_accesses_);
      window_accesses_ = 0;
      window_memory_ = 0;
    }

    candidates_.clear();
    if (cfg_.kind == PrefetcherKind::NextLine) {
      // Tagged next-line: triggers on misses and on first use of a prefetched line.
      if (!result.hit || result.was_prefetched) ahead(line, 1);
    } else if (cfg_.kind == PrefetcherKind::StrideStreamer) {
      train(instance, line);
    }
    if (candidates_.empty()) return;

    const AccessClass cls = class_of(rec.kind);
    const auto& path = h.path(cls);
    auto here = std::find(path.begin(), path.end(), level);
    for (std::uint64_t target : candidates_) {
      if (target / page_lines_ != line / page_lines_) continue;
      if (h.contains(level, instance, target)) continue;
      if (cfg_.throttle_threshold > 0.0 && last_utilization_ > cfg_.throttle_threshold) {
        ++throttled;
        continue;
      }
      bool from_memory = true;
      for (auto it = here + 1; it != path.end(); ++it)
        if (h.contains(*it, h.instance_of(*it, rec.core), target)) {
          from_memory = false;
          break;
        }
      h.install(level, instance, target, cls, true);
      ++account.total_prefetched;
      ++account.total_lines_brought_in;
      log(PrefetchEventKind::PrefetchFill, target);
      if (from_memory) {
        ++prefetch_memory_lines;
        ++window_memory_;
      }
      if (downstream_) downstream_->on_prefetch_fill(record_, level, rec, target, from_memory);
    }
  }

  void set_record(std::size_t index) { record_ = index; }

 private:
  void ahead(std::uint64_t line, std::int64_t stride) {
    for (std::uint32_t k = cfg_.distance - cfg_.degree + 1; k <= cfg_.distance; ++k) {
      std::int64_t target = static_cast<std::int64_t>(line) + stride * static_cast<std::int64_t>(k);
      if (target >= 0) candidates_.push_back(static_cast<std::uint64_t>(target));
    }
  }

  void train(std::size_t instance, std::uint64_t line) {
    auto& table = tables_[instance];
    const std::uint64_t page = line / page_lines_;
    StreamEntry* entry = nullptr;
    StreamEntry* victim = &table[0];
    for (auto& e : table) {
      if (e.valid && e.page == page) {
        entry = &e;
        break;
      }
      if (!e.valid || (victim->valid && e.stamp < victim->stamp)) victim = &e;
    }
    if (!entry) {
      *victim = StreamEntry{true, page, line, 0, 0, ++clock_};
      return;
    }
    entry->stamp = ++clock_;
    const std::int64_t delta = static_cast<std::int64_t>(line) - static_cast<std::int64_t>(entry->last_line);
    if (delta == 0) return;
    if (delta == entry->stride) {
      entry->confidence = std::min<std::uint32_t>(entry->confidence + 1, 3);
    } else {
      entry->stride = delta;
      entry->confidence = 0;
    }
    entry->last_line = line;
    if (entry->confidence >= 1) ahead(line, entry->stride);
  }

  void log(PrefetchEventKind kind, std::uint64_t line) {
    if (log_) log_->push_back({kind, line});
  }

  PrefetcherConfig cfg_;
  std::size_t level_;
  std::uint64_t page_lines_;
  std::vector<std::vector<StreamEntry>> tables_;
  std::vector<PrefetchEvent>* log_;
  HierarchyObserver* downstream_;
  std::vector<std::uint64_t> candidates_;
  std::uint64_t clock_ = 0;
  std::size_t record_ = 0;
  std::uint64_t window_accesses_ = 0;
  std::uint64_t window_memory_ = 0;
  double last_utilization_ = 0.0;
};

// Forwards everything and remembers the current record for prefetch callbacks.
class RecordTracker final : public HierarchyObserver {
 public:
  explicit RecordTracker(PrefetchEngine& engine) : engine_(engine) {}
  void on_lookup(std::size_t record, std::size_t level, std::uint16_t core, std::uint64_t line, bool hit) override {
    engine_.set_record(record);
    engine_.on_lookup(record, level, core, line, hit);
  }
  void on_evict(std::size_t level, const Victim& victim) override { engine_.on_evict(level, victim); }
  void on_memory(std::size_t record, const TraceRecord& rec, std::uint64_t line) override {
    engine_.on_memory(record, rec, line);
  }

 private:
  PrefetchEngine& engine_;
};

}  // namespace

PrefetchRun simulate_with_prefetch(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                   const PrefetcherConfig& pf, std::vector<PrefetchEvent>* log,
                                   HierarchyObserver* downstream) {
  check_prefetcher(pf);
  auto it = std::find_if(levels.begin(), levels.end(), [&](const auto& l) { return l.name == pf.level; });
  if (it == levels.end()) throw ConfigError("prefetcher level '" + pf.level + "' is not in the hierarchy");

  PrefetchRun run;
  if (pf.kind == PrefetcherKind::None) {
    run.stats = simulate_hierarchy(trace, levels, ReplacementPolicy::Lru, downstream);
    return run;
  }
  if (trace.empty()) throw PreconditionError("simulate_with_prefetch: empty trace");
  check_routing(trace, levels);
  CacheHierarchy h(levels, trace.meta.n_cores, trace.meta.line_size);
  const std::size_t level = static_cast<std::size_t>(it - levels.begin());
  PrefetchEngine engine(pf, level, trace.meta.page_size / trace.meta.line_size, h.instance_count(level), log,
                        downstream);
  RecordTracker tracker(engine);
  h.set_observer(&tracker);
  h.set_level_hook(level, &engine);
  for (std::size_t i = 0; i < trace.records.size(); ++i) h.access(i, trace.records[i]);

  run.stats = h.stats();
  run.account = engine.account;
  run.account.end_resident_unused = h.count_prefetched(level);
  run.prefetch_memory_lines = engine.prefetch_memory_lines;
  run.throttled = engine.throttled;
  return run;
}

PrefetchReport compare_prefetch(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                const PrefetcherConfig& pf) {
  PrefetchReport report;
  report.off = simulate_hierarchy(trace, levels);
  report.on = simulate_with_prefetch(trace, levels, pf);
  if (report.on.account.total_prefetched > 0) report.accuracy = accuracy(report.on.account);
  try {
    report.coverage = coverage(report.on.account);
  } catch (const UndefinedValueError&) {
  }
  report.traffic_lines_pf_off = report.off.memory_lines;
  report.traffic_lines_pf_on = report.on.memory_traffic_lines();
  if (report.traffic_lines_pf_off > 0)
    report.traffic_overhead_pct = (static_cast<double>(report.traffic_lines_pf_on) -
                                   static_cast<double>(report.traffic_lines_pf_off)) /
                                  static_cast<double>(report.traffic_lines_pf_off) * 100.0;
  return report;
}

std::string prefetch_report_json(const PrefetchReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy ? nlohmann::ordered_json(*report.accuracy) : nlohmann::ordered_json("N/A");
  j["coverage"] = report.coverage ? nlohmann::ordered_json(*report.coverage) : nlohmann::ordered_json("N/A");
  j["traffic_lines_pf_on"] = report.traffic_lines_pf_on;
  j["traffic_lines_pf_off"] = report.traffic_lines_pf_off;
  j["traffic_overhead_pct"] = report.traffic_overhead_pct;
  const auto& a = report.on.account;
  j["account"] = {{"total_prefetched", a.total_prefetched},
                  {"unused_evicted", a.unused_evicted},
                  {"used", a.used},
                  {"total_lines_brought_in", a.total_lines_brought_in},
                  {"end_resident_unused", a.end_resident_unused}};
  j["throttled"] = report.on.throttled;
  return j.dump(2) + "\n";
}

}  // namespace memscope
