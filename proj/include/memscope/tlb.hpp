#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "memscope/trace.hpp"

namespace memscope {

enum class PageClass : std::uint8_t { Small4K, Huge2M };

std::string_view to_string(PageClass cls);

enum class TlbOutcome : std::uint8_t {
  Hit,
  /// VFN matched but the requester's ASID was not in the entry; a walk
  /// confirmed the mapping and the ASID was added.
  Extended,
  MissFilled,
};

std::string_view to_string(TlbOutcome outcome);

struct TlbEntry {
  bool valid = false;
  std::uint64_t vfn = 0;
  std::uint64_t pfn = 0;
  PageClass page_class = PageClass::Small4K;
  /// Holds at most share_cluster ASIDs.
  std::vector<std::uint32_t> asids;
  std::uint64_t stamp = 0;

  bool has_asid(std::uint32_t asid) const;
};

/// One structure of a TLB level: a fixed page class and geometry.
struct TlbStructConfig {
  std::uint32_t entries = 64;
  /// 0 means fully associative.
  std::uint32_t ways = 0;
  PageClass page_class = PageClass::Small4K;

  std::uint32_t effective_ways() const { return ways == 0 ? entries : ways; }
  std::uint32_t sets() const { return entries / effective_ways(); }
};

struct TlbLevelConfig {
  std::string name;
  std::vector<TlbStructConfig> structures;
  std::uint32_t share_cluster = 1;
};

struct TlbConfig {
  TlbLevelConfig l1;
  TlbLevelConfig l2;
  bool has_l2 = true;
  double walk_cost = 20.0;
};

/// Throws ConfigError on inconsistent geometry.
void check_tlb_config(const TlbConfig& cfg, std::uint32_t n_cores);

/// L1 I-TLB: 128-entry 8-way for 4 KiB pages plus an 8-entry fully
/// associative 2 MiB structure, private. L2: `l2_entries_per_core` 4 KiB
/// entries per core, 12-way, shared by `l2_cluster` cores with the per-core
/// budget held constant.
TlbConfig gen4_itlb(std::uint32_t l2_cluster = 1, std::uint32_t l2_entries_per_core = 1536);

/// One TLB structure instance serving the cores [first_core, first_core + cluster).
class TlbArray {
 public:
  TlbArray(const TlbStructConfig& cfg, std::uint32_t first_core, std::uint32_t cluster);

  struct Result {
    TlbOutcome outcome = TlbOutcome::Hit;
    /// A valid entry whose ASID set held more than one ASID was evicted.
    bool evicted_shared = false;
    /// The ASID set was full and its oldest ASID was dropped.
    bool asid_overflow = false;
  };

  /// Lookup with install on miss. `walk_pfn` is the translation a page walk
  /// would return; it is consulted only when the lookup does not hit.
  Result lookup_install(std::uint16_t core, std::uint32_t asid, std::uint64_t vfn, std::uint64_t walk_pfn);
  /// Pure probe with no recency update.
  const TlbEntry* find(std::uint64_t vfn) const;

  PageClass page_class() const { return cfg_.page_class; }
  std::uint32_t cluster() const { return cluster_; }
  const std::vector<TlbEntry>& entries() const { return entries_; }

 private:
  TlbStructConfig cfg_;
  std::uint32_t first_core_;
  std::uint32_t cluster_;
  std::uint32_t ways_;
  std::uint32_t sets_;
  std::uint64_t clock_ = 0;
  std::vector<TlbEntry> entries_;
};

struct TlbLevelStats {
  std::string name;
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;
  std::uint64_t asid_extension_hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t walks = 0;
  /// Evictions of entries that had been extended to more than one ASID.
  std::uint64_t extension_churn = 0;
  std::uint64_t asid_overflows = 0;
  double mpki = 0.0;

  bool operator==(const TlbLevelStats&) const = default;
};

struct TlbStats {
  TlbLevelStats l1;
  TlbLevelStats l2;
  std::uint64_t instructions = 0;
  std::uint64_t walks = 0;
  double walk_penalty = 0.0;

  bool operator==(const TlbStats&) const = default;
};

struct TlbEvent {
  std::size_t record = 0;
  int level = 0;  // 1 or 2
  TlbOutcome outcome = TlbOutcome::Hit;
};

using TlbEventSink = std::function<void(const TlbEvent&, const TraceRecord&)>;

/// Replays the IFETCH records of the trace through a private L1 I-TLB and an
/// optionally shared L2 I-TLB. MPKI counts misses plus ASID extensions, since
/// both require a page walk.
TlbStats simulate_itlb(const MemoryTrace& trace, const TlbConfig& cfg, const PageTableSnapshot& page_table,
                       const TlbEventSink& sink = {});

std::string tlb_stats_csv(const TlbStats& stats);

}  // namespace memscope
