#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memscope/cache.hpp"
#include "memscope/trace.hpp"

namespace memscope {

struct StitchSpec {
  /// Records per capture window.
  std::uint64_t window_len = 1000;
  /// Records skipped between windows.
  std::uint64_t gap_len = 9000;
  std::uint64_t rng_seed = 1;
};

struct WindowProvenance {
  std::size_t source = 0;
  std::uint64_t window_index = 0;
  std::uint64_t orig_seq_start = 0;
  std::uint64_t orig_seq_end = 0;
  std::uint64_t orig_record_start = 0;
  std::uint64_t records = 0;
  std::uint64_t out_seq_start = 0;
  std::uint64_t out_seq_end = 0;

  bool operator==(const WindowProvenance&) const = default;
};

struct StitchResult {
  MemoryTrace trace;
  std::vector<WindowProvenance> manifest;
};

/// Start offsets of the capture windows over a source of `length` records.
/// Window k starts at k * (window + gap) plus a jitter drawn uniformly from
/// [0, gap]; the last window may be truncated by the end of the source.
std::vector<std::uint64_t> window_starts(std::uint64_t length, const StitchSpec& spec, std::uint64_t seed);

/// Extracts periodic windows from every source and concatenates them
/// round-robin across sources. Seq is renumbered from 0 so that line-split
/// pieces keep sharing a number. `names` label sources in errors.
StitchResult stitch(const std::vector<MemoryTrace>& sources, const StitchSpec& spec,
                    const std::vector<std::string>& names = {});

std::string stitch_manifest_json(const StitchResult& result, const std::vector<std::string>& names = {});

struct ValidationReport {
  double l1d_hit_ratio_full = 0.0;
  double l1d_hit_ratio_stitched = 0.0;
  double hit_ratio_error_pct = 0.0;
  double rw_ratio_full = 0.0;
  double rw_ratio_stitched = 0.0;
  double rw_ratio_error_pct = 0.0;
};

/// L1D hit ratio of the data records simulated as one stream.
double l1d_hit_ratio(const MemoryTrace& trace, const CacheLevelConfig& l1d);
/// LOAD records per STORE record.
double read_write_ratio(const MemoryTrace& trace);

ValidationReport validate(const MemoryTrace& full, const MemoryTrace& stitched, const CacheLevelConfig& l1d);

std::string validation_json(const ValidationReport& report);

}  // namespace memscope
