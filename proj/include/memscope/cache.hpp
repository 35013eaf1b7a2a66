#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memscope/trace.hpp"

namespace memscope {

enum class AccessClass : std::uint8_t { Code = 0, Data = 1 };
enum class ServedClasses : std::uint8_t { Code, Data, Unified };
enum class ReplacementPolicy { Lru };

inline AccessClass class_of(AccessKind kind) { return is_code(kind) ? AccessClass::Code : AccessClass::Data; }
std::string_view to_string(AccessClass cls);
std::string_view to_string(ServedClasses classes);
bool serves(ServedClasses classes, AccessClass cls);

struct CacheLevelConfig {
  std::string name;
  std::uint64_t size_bytes = 0;
  std::uint32_t ways = 1;
  std::uint32_t line_size = 64;
  /// Cores per shared instance; 1 is a private cache.
  std::uint32_t share_cluster = 1;
  ServedClasses classes = ServedClasses::Unified;
  /// Way partitioning in the style of CAT/CDP. When set, code fills go to
  /// code_ways ways and data fills to data_ways ways of every set; lookups
  /// search both partitions. The set count stays size/(ways*line).
  std::optional<std::uint32_t> code_ways;
  std::optional<std::uint32_t> data_ways;

  std::uint64_t sets() const { return size_bytes / (static_cast<std::uint64_t>(ways) * line_size); }
};

/// Throws ConfigError when the level geometry is inconsistent.
void check_level(const CacheLevelConfig& level, std::uint32_t n_cores);

struct ClassCounters {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  bool operator==(const ClassCounters&) const = default;
};

struct LevelStats {
  std::string name;
  std::array<ClassCounters, 2> by_class{};

  const ClassCounters& operator[](AccessClass cls) const { return by_class[static_cast<int>(cls)]; }
  ClassCounters& operator[](AccessClass cls) { return by_class[static_cast<int>(cls)]; }
  bool operator==(const LevelStats&) const = default;
};

struct CacheStats {
  std::vector<LevelStats> levels;
  /// Instruction proxy: number of trace records simulated.
  std::uint64_t instructions = 0;
  /// Demand lines fetched from memory (misses in every level on the path).
  std::uint64_t memory_lines = 0;

  double mpki(std::size_t level, AccessClass cls) const;
  const LevelStats& level(std::string_view name) const;
  /// Ratio of code MPKI between two levels, e.g. L2 over L3.
  double code_mpki_ratio(std::string_view upper, std::string_view lower) const;
  bool operator==(const CacheStats&) const = default;
};

struct Victim {
  bool valid = false;
  std::uint64_t line = 0;
  AccessClass cls = AccessClass::Data;
  bool prefetched = false;
};

/// One set-associative LRU array. Tags are full line numbers.
class SetAssocCache {
 public:
  SetAssocCache(std::uint64_t sets, std::uint32_t ways);

  struct Lookup {
    bool hit = false;
    /// The hit line carried a prefetch tag; the tag is cleared by the lookup.
    bool was_prefetched = false;
  };

  /// Looks the line up and promotes it to MRU on a hit.
  Lookup access(std::uint64_t line);
  bool contains(std::uint64_t line) const;
  bool is_prefetched(std::uint64_t line) const;
  /// Installs the line as MRU; the line must not already be present.
  Victim fill(std::uint64_t line, AccessClass cls, bool prefetched = false);
  /// Every resident line still carrying a prefetch tag.
  std::uint64_t count_prefetched() const;

  std::uint64_t sets() const { return sets_; }
  std::uint32_t ways() const { return ways_; }

 private:
  std::int64_t find(std::uint64_t line) const;

  std::uint64_t sets_;
  std::uint32_t ways_;
  std::uint64_t clock_ = 0;
  std::vector<std::uint64_t> tag_;
  std::vector<std::uint64_t> stamp_;
  // bit0 valid, bit1 data class, bit2 prefetched
  std::vector<std::uint8_t> flags_;
};

/// Receives every lookup, fill and eviction of a hierarchy run.
class HierarchyObserver {
 public:
  virtual ~HierarchyObserver() = default;
  virtual void on_lookup(std::size_t /*record*/, std::size_t /*level*/, std::uint16_t /*core*/,
                         std::uint64_t /*line*/, bool /*hit*/) {}
  virtual void on_evict(std::size_t /*level*/, const Victim& /*victim*/) {}
  /// The access missed every level on its path.
  virtual void on_memory(std::size_t /*record*/, const TraceRecord& /*rec*/, std::uint64_t /*line*/) {}
  /// A prefetcher installed `line` at `level`; from_memory when no deeper
  /// level held it.
  virtual void on_prefetch_fill(std::size_t /*record*/, std::size_t /*level*/, const TraceRecord& /*trigger*/,
                                std::uint64_t /*line*/, bool /*from_memory*/) {}
};

class LevelHook;

/// A hierarchy of levels ordered L1 to LLC. Each access walks the levels
/// serving its class; on a miss every missing level on the path is filled
/// (non-inclusive, no back-invalidation).
class CacheHierarchy {
 public:
  CacheHierarchy(std::vector<CacheLevelConfig> levels, std::uint32_t n_cores, std::uint32_t line_size);

  /// Simulates one record; returns the path position that hit, or the path
  /// length when the access went to memory.
  std::size_t access(std::size_t index, const TraceRecord& rec);

  void set_observer(HierarchyObserver* obs) { observer_ = obs; }
  /// Invoked with the lookup result at this level once the access (including
  /// its fills) has completed.
  void set_level_hook(std::size_t level, LevelHook* hook);

  const std::vector<CacheLevelConfig>& levels() const { return configs_; }
  const std::vector<std::size_t>& path(AccessClass cls) const { return paths_[static_cast<int>(cls)]; }
  std::size_t instance_of(std::size_t level, std::uint16_t core) const { return core / configs_[level].share_cluster; }

  /// Partition holding lines of `cls` at one level instance.
  SetAssocCache& array(std::size_t level, std::size_t instance, AccessClass cls);
  bool contains(std::size_t level, std::size_t instance, std::uint64_t line) const;
  /// Fills into the level, counting the victim as an eviction.
  Victim install(std::size_t level, std::size_t instance, std::uint64_t line, AccessClass cls, bool prefetched);
  /// Resident lines of a level still carrying a prefetch tag.
  std::uint64_t count_prefetched(std::size_t level) const;
  std::size_t instance_count(std::size_t level) const { return instances_[level].size(); }

  CacheStats& stats() { return stats_; }
  const CacheStats& stats() const { return stats_; }
  std::uint32_t line_size() const { return line_size_; }

 private:
  struct Instance {
    SetAssocCache main;
    std::optional<SetAssocCache> data;  // data partition when way-partitioned
  };

  std::vector<CacheLevelConfig> configs_;
  std::vector<std::vector<Instance>> instances_;
  std::array<std::vector<std::size_t>, 2> paths_;
  std::vector<LevelHook*> hooks_;
  std::uint32_t line_size_;
  HierarchyObserver* observer_ = nullptr;
  CacheStats stats_;
};

/// Extension point invoked on every demand lookup at one level.
class LevelHook {
 public:
  virtual ~LevelHook() = default;
  virtual void on_demand(CacheHierarchy& h, std::size_t level, std::size_t instance, const TraceRecord& rec,
                         std::uint64_t line, const SetAssocCache::Lookup& result) = 0;
};

CacheStats simulate_hierarchy(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                              ReplacementPolicy policy = ReplacementPolicy::Lru,
                              HierarchyObserver* observer = nullptr);

/// Checks that every class present in the trace has a non-empty path.
void check_routing(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels);

struct SweepPoint {
  std::uint64_t requested_code_bytes = 0;
  std::uint32_t code_ways = 0;
  std::uint64_t code_bytes = 0;
  std::uint32_t data_ways = 0;
  CacheStats stats;
};

/// Re-runs the hierarchy with the named level way-partitioned, stepping the
/// code partition through `code_partition_sizes` and holding data at
/// `data_partition_bytes` (half the level when zero).
std::vector<SweepPoint> l2_sweep(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                 const std::vector<std::uint64_t>& code_partition_sizes,
                                 std::string_view level_name = "L2", std::uint64_t data_partition_bytes = 0,
                                 unsigned jobs = 1);

/// Partition geometry for a code partition of `code_bytes` on `level`.
CacheLevelConfig partitioned(const CacheLevelConfig& level, std::uint64_t code_bytes, std::uint64_t data_bytes);

/// Gen4-like hierarchy: private 32 KiB L1I/L1D, 1 MiB/core L2 shared by
/// `l2_cluster` cores, 1.375 MiB/core LLC shared by all cores.
std::vector<CacheLevelConfig> gen4_hierarchy(std::uint32_t n_cores, std::uint32_t l2_cluster = 1);

std::string stats_csv(const CacheStats& stats);
std::string level_config_string(const std::vector<CacheLevelConfig>& levels);
/// FNV-1a 64 of a canonical config string, as 16 hex digits.
std::string config_hash(std::string_view canonical);

}  // namespace memscope
