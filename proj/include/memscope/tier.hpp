#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memscope/cache.hpp"
#include "memscope/prefetch.hpp"

namespace memscope {

enum class MissKind : std::uint8_t { IFetch, Load, Store, Prefetch };

/// One line fetched from memory.
struct MissEvent {
  std::uint64_t seq = 0;
  std::uint64_t page = 0;
  MissKind kind = MissKind::Load;

  bool operator==(const MissEvent&) const = default;
};

/// Demand LLC misses plus prefetch fills from memory, in trace order. Pages
/// are physical when the trace carries physical addresses, otherwise the
/// virtual page number tagged with the ASID in the upper bits.
std::vector<MissEvent> collect_llc_misses(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                          const PrefetcherConfig& pf = {});

enum class InitialPlacement { Random, FirstTouch };

struct TierConfig {
  std::string name = "tiered";
  double near_capacity_fraction = 1.0;
  double near_bw = 100.0;
  /// 0 when there is no far tier.
  double far_bw = 0.0;
  double near_latency = 1.0;
  double far_latency = 1.0;
  /// Miss-stream entries per epoch.
  std::uint64_t migration_epoch = 50000;
  /// Pages promoted per epoch.
  std::uint32_t promote_budget = 16;
  double hotness_decay = 0.5;
  InitialPlacement placement = InitialPlacement::Random;
  std::uint64_t seed = 1;
  /// Page universe size; 0 uses the distinct pages of the stream.
  std::uint64_t total_pages = 0;
  /// Lines moved per tier for each migrated page.
  std::uint32_t lines_per_page = 64;
  /// Outstanding work of the closed-loop load (bandwidth x latency units).
  double demand = 300.0;
  /// Reference system that normalizes throughput to 1.0.
  double baseline_bw = 100.0;
  double baseline_latency = 1.0;
  double near_unit_cost = 1.0;
  double far_unit_cost = 1.0;
};

void check_tier_config(const TierConfig& cfg);

/// 100% capacity at 1x bandwidth.
TierConfig baseline_tier();
/// 100% capacity at 2x bandwidth.
TierConfig ideal_tier();
/// 37.5% capacity at 2x bandwidth plus 62.5% at 1x with a slower far tier.
TierConfig tiered_tier();

/// Utilization penalty applied to tier latency.
double penalty(double utilization);

/// Capacity-weighted memory cost normalized to an all-far-unit-cost system.
double relative_cost(const TierConfig& cfg, double near_unit_cost, double far_unit_cost);

struct EpochSample {
  std::uint64_t epoch = 0;
  std::uint64_t near_lines = 0;
  std::uint64_t far_lines = 0;
  std::uint64_t near_migration_lines = 0;
  std::uint64_t far_migration_lines = 0;
  std::uint64_t promotions = 0;
  std::uint64_t near_pages = 0;
  double throughput = 0.0;
  double near_utilization = 0.0;
  double far_utilization = 0.0;

  bool operator==(const EpochSample&) const = default;
};

struct TierReport {
  std::string name;
  double relative_throughput = 0.0;
  /// Throughput of the reference system; divides epoch throughput.
  double reference_throughput = 0.0;
  double near_bw_measured = 0.0;
  double far_bw_measured = 0.0;
  double relative_cost = 0.0;
  double throughput_per_cost = 0.0;
  std::uint64_t warmup_epochs = 0;
  std::uint64_t total_pages = 0;
  std::uint64_t near_capacity_pages = 0;
  std::uint64_t migrations = 0;
  std::vector<EpochSample> epochs;

  bool operator==(const TierReport&) const = default;
};

/// Closed-loop throughput of one epoch: X solves X * L(X) = demand, where
/// L is the traffic-weighted penalized latency, capped at the saturating
/// rate of the busiest tier. `near_share`/`far_share` and the migration
/// shares are lines per stream line.
double epoch_throughput(const TierConfig& cfg, double near_share, double far_share, double near_migration,
                        double far_migration);

TierReport simulate_tiered(const std::vector<MissEvent>& stream, const TierConfig& cfg);

/// Runs several configurations over one stream, `jobs` at a time.
std::vector<TierReport> compare_tiers(const std::vector<MissEvent>& stream, const std::vector<TierConfig>& configs,
                                      unsigned jobs = 1);

std::string tier_report_json(const std::vector<TierReport>& reports, const std::vector<TierConfig>& configs);
std::string tier_epochs_csv(const TierReport& report);

}  // namespace memscope
