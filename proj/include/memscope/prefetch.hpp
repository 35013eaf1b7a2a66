#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memscope/cache.hpp"

namespace memscope {

enum class PrefetcherKind { None, NextLine, StrideStreamer };

std::string_view to_string(PrefetcherKind kind);
std::optional<PrefetcherKind> parse_prefetcher_kind(std::string_view text);

struct PrefetcherConfig {
  PrefetcherKind kind = PrefetcherKind::None;
  /// Lines issued per trigger.
  std::uint32_t degree = 1;
  /// Furthest line ahead of the trigger that is prefetched.
  std::uint32_t distance = 1;
  /// Page-granular stream table entries (streamer only).
  std::uint32_t table_entries = 16;
  std::string level = "L2";
  /// Suppress prefetches while memory lines per demand access over the last
  /// window exceed this; 0 disables throttling.
  double throttle_threshold = 0.0;
  std::uint32_t throttle_window = 1024;
};

void check_prefetcher(const PrefetcherConfig& cfg);

/// Counter set behind the accuracy and coverage formulas.
struct PrefetchAccount {
  std::uint64_t total_prefetched = 0;
  std::uint64_t unused_evicted = 0;
  std::uint64_t used = 0;
  /// Demand fills plus prefetch fills at the prefetching level.
  std::uint64_t total_lines_brought_in = 0;
  /// Prefetched lines still resident and unreferenced at trace end.
  std::uint64_t end_resident_unused = 0;

  bool operator==(const PrefetchAccount&) const = default;
};

/// 1 - unused_evicted / total_prefetched. Throws UndefinedValueError when
/// nothing was prefetched.
double accuracy(const PrefetchAccount& acct);

/// (total_prefetched - unused_evicted) / (total_lines_brought_in - unused_evicted).
/// Throws UndefinedValueError when the denominator is not positive.
double coverage(const PrefetchAccount& acct);

enum class PrefetchEventKind : std::uint8_t { PrefetchFill, DemandFill, DemandHit, Evict };

struct PrefetchEvent {
  PrefetchEventKind kind;
  std::uint64_t line;
};

struct PrefetchRun {
  CacheStats stats;
  PrefetchAccount account;
  /// Prefetch fills that no level below the prefetching level held.
  std::uint64_t prefetch_memory_lines = 0;
  std::uint64_t throttled = 0;

  /// Demand LLC misses plus prefetch fills from memory.
  std::uint64_t memory_traffic_lines() const { return stats.memory_lines + prefetch_memory_lines; }
};

/// Runs the hierarchy with a prefetcher attached to `pf.level`. With kind
/// None this is exactly simulate_hierarchy. `log`, when given, receives every
/// fill, hit and eviction at the prefetching level.
PrefetchRun simulate_with_prefetch(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                   const PrefetcherConfig& pf, std::vector<PrefetchEvent>* log = nullptr,
                                   HierarchyObserver* downstream = nullptr);

struct PrefetchReport {
  std::optional<double> accuracy;
  std::optional<double> coverage;
  std::uint64_t traffic_lines_pf_on = 0;
  std::uint64_t traffic_lines_pf_off = 0;
  double traffic_overhead_pct = 0.0;
  PrefetchRun on;
  CacheStats off;
};

/// Prefetcher-on versus prefetcher-off comparison on the same trace.
PrefetchReport compare_prefetch(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                const PrefetcherConfig& pf);

std::string prefetch_report_json(const PrefetchReport& report);

}  // namespace memscope
