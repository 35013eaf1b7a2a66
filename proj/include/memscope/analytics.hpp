#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memscope/cache.hpp"
#include "memscope/tlb.hpp"
#include "memscope/trace.hpp"

namespace memscope {

/// Load and IFetch count every record of that kind with no cache in front.
enum class SampleEventKind { ItlbMiss, LlcLoadMiss, Load, IFetch };

std::string_view to_string(SampleEventKind kind);

struct Sample {
  std::uint64_t seq = 0;
  std::uint32_t asid = 0;
  std::uint64_t vaddr = 0;
  std::optional<std::uint64_t> paddr;

  bool operator==(const Sample&) const = default;
};

struct SampleStream {
  std::uint16_t core = 0;
  SampleEventKind kind = SampleEventKind::ItlbMiss;
  std::uint64_t period = 1;
  /// Miss events seen on this core before sampling.
  std::uint64_t events = 0;
  std::vector<Sample> samples;

  /// The period exceeded the number of events, so nothing was sampled.
  bool starved() const { return samples.empty() && events < period; }
  bool operator==(const SampleStream&) const = default;
};

/// Keeps every period-th event of a per-core miss sequence.
class PeriodicSampler {
 public:
  explicit PeriodicSampler(std::uint64_t period);
  bool tick() { return ++count_ % period_ == 0; }

 private:
  std::uint64_t period_;
  std::uint64_t count_ = 0;
};

/// Per-core samples of L1 I-TLB misses (lookups that did not hit).
std::vector<SampleStream> sample_itlb_misses(const MemoryTrace& trace, const TlbConfig& cfg,
                                             const PageTableSnapshot& page_table, std::uint64_t period);

/// Per-core samples of demand loads that missed every cache level.
std::vector<SampleStream> sample_llc_load_misses(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                                 std::uint64_t period);

/// Per-core samples of every LOAD record, unfiltered by any cache.
std::vector<SampleStream> sample_loads(const MemoryTrace& trace, std::uint64_t period);
/// Per-core samples of every IFETCH record.
std::vector<SampleStream> sample_ifetches(const MemoryTrace& trace, std::uint64_t period);

/// Samples with lo <= seq < hi.
std::vector<SampleStream> slice_streams(const std::vector<SampleStream>& streams, std::uint64_t lo, std::uint64_t hi);

/// Sparse counts per (address slice, sub-bin) over virtual addresses.
struct Heatmap {
  std::uint64_t slice_bytes = 2ull << 20;
  std::uint64_t bin_bytes = 4096;
  std::map<std::uint64_t, std::vector<std::uint64_t>> rows;

  std::uint64_t bins() const { return slice_bytes / bin_bytes; }
  std::uint64_t total() const;
  std::uint64_t nonzero_cells() const;
};

/// Throws ConfigError unless both sizes are powers of two with bin <= slice,
/// PreconditionError on an empty stream.
Heatmap heatmap(const SampleStream& stream, std::uint64_t slice_bytes = 2ull << 20, std::uint64_t bin_bytes = 4096);
std::string heatmap_csv(const Heatmap& map);

/// Cosine similarity of two heatmaps with identical geometry.
double cosine_similarity(const Heatmap& a, const Heatmap& b);

/// Pearson r of two equal-length vectors. UndefinedValueError on zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct PagePair {
  std::vector<std::uint64_t> pages;
  std::vector<double> a;
  std::vector<double> b;
};

/// Per-page sample counts of both streams over the union of touched pages.
PagePair page_counts(const SampleStream& a, const SampleStream& b, std::uint64_t page_size = 4096);

double correlation(const SampleStream& a, const SampleStream& b, std::uint64_t page_size = 4096);

struct PercentileFootprint {
  double percent = 0.0;
  std::uint64_t pages = 0;
  std::uint64_t bytes = 0;
  double fraction_of_touched = 0.0;
};

struct BandwidthDistribution {
  std::uint64_t page_size = 4096;
  /// (page, samples), hottest first; ties by page number.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pages;
  /// cumulative[k] = share of samples in the k+1 hottest pages.
  std::vector<double> cumulative;
  std::uint64_t total_pages = 0;
  std::uint64_t total_samples = 0;
  /// Samples dropped because no snapshot translated them.
  std::uint64_t untranslated = 0;

  /// Smallest set of hottest pages covering `percent` of the samples.
  PercentileFootprint footprint(double percent) const;
};

/// Aggregates all streams by physical page. Samples without a physical
/// address are translated through the snapshot closing their seq (or the one
/// before it); without snapshots they are keyed by ASID and virtual page.
BandwidthDistribution bw_distribution(const std::vector<SampleStream>& streams,
                                      const std::vector<PageTableSnapshot>& snapshots = {},
                                      std::uint64_t page_size = 4096);

std::string bw_distribution_json(const BandwidthDistribution& dist, const std::vector<double>& percents,
                                 std::optional<std::uint64_t> allocated_pages = std::nullopt);

struct IpcPoint {
  double cache_bytes = 0.0;
  double ipc = 0.0;
};

struct IpcProjection {
  /// IPC gained per doubling of cache size.
  double slope = 0.0;
  double intercept = 0.0;
  double projected = 0.0;
  std::size_t distinct_sizes = 0;
};

/// Least-squares line of ipc against log2(cache_bytes), evaluated at the
/// target. Duplicate sizes are averaged first.
IpcProjection project_ipc(const std::vector<IpcPoint>& points, double target_bytes);

}  // namespace memscope
