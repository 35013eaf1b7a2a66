#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "memscope/trace.hpp"

namespace memscope {

enum class SharingMode { MultiThread, MultiProcess };

/// Parameters of a synthetic multi-core workload. Code popularity is split
/// between a ranking shared by every core and a per-core private ranking,
/// data pages are always private per core.
struct SynthSpec {
  std::uint32_t n_cores = 2;
  SharingMode mode = SharingMode::MultiThread;
  std::uint64_t code_footprint_bytes = 4ull << 20;
  double code_zipf_s = 1.0;
  std::uint64_t data_footprint_bytes = 64ull << 20;
  double data_zipf_s = 1.2;
  /// Probability a code access draws from the shared ranking.
  double code_share = 1.0;
  /// Private rankings cover a separate per-core code region instead of a
  /// permutation of the shared pages.
  bool disjoint_private_code = false;
  double ifetch_fraction = 0.5;
  /// LOAD:STORE ratio.
  double read_write_ratio = 2.0;
  std::uint64_t n_events = 1'000'000;
  std::uint64_t rng_seed = 1;
  /// Seeds page rankings and placement; defaults to rng_seed. Hosts running
  /// the same workload share a layout seed but not an event seed.
  std::optional<std::uint64_t> layout_seed;
  /// Probability that a fresh access starts a sequential run of lines.
  double burst_prob = 0.0;
  double burst_mean_lines = 8.0;
  bool code_huge_pages = false;
  bool emit_physical = true;
  std::uint32_t page_size = 4096;
  std::uint32_t line_size = 64;
};

inline constexpr std::uint64_t kMaxFootprintPages = 1ull << 24;

/// Throws PreconditionError when the spec is out of range.
void check_spec(const SynthSpec& spec);

struct SynthOutput {
  MemoryTrace trace;
  /// Mappings of every page the trace touches, captured at the last seq.
  PageTableSnapshot page_table;
};

SynthOutput generate(const SynthSpec& spec);

/// Inverse-CDF sampler over ranks 0..n-1 with P(rank k) proportional to
/// (k+1)^-s.
class ZipfSampler {
 public:
  ZipfSampler(std::uint64_t n, double s);

  std::uint64_t operator()(double u) const;
  double pmf(std::uint64_t rank) const;
  std::uint64_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

/// Portable uniform draw in [0, 1) from a 64-bit engine.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Portable uniform integer in [0, n).
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n));
}

// Virtual and physical layout of generated traces.
namespace layout {
inline constexpr std::uint64_t kCodeVfnBase = 0x400;        // 4 MiB
inline constexpr std::uint64_t kDataVfnBase = 0x1000000;    // 64 GiB
inline constexpr std::uint64_t kCodePfnBase = 0x40000;      // 1 GiB
inline constexpr std::uint64_t kDataPfnBase = 0x1000000;    // 64 GiB
}  // namespace layout

}  // namespace memscope
