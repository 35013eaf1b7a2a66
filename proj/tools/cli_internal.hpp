#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "json.hpp"
#include "memscope/cache.hpp"
#include "memscope/prefetch.hpp"
#include "memscope/stitch.hpp"
#include "memscope/synth.hpp"
#include "memscope/tier.hpp"
#include "memscope/tlb.hpp"
#include "memscope/trace.hpp"

namespace memscope::cli {

using Json = nlohmann::ordered_json;

/// Column-ordered rows rendered as CSV or a JSON array of objects.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;

  void add(std::vector<Json> row) { rows.push_back(std::move(row)); }
  std::string csv() const;
  Json json() const;
};

/// State of one CLI invocation: effective config, output directory and the
/// list of files written so far.
class Run {
 public:
  Run(Config& cfg, std::filesystem::path out, std::optional<std::uint64_t> seed, std::string format, unsigned jobs,
      std::ostream& log);

  Config& cfg;
  std::optional<std::uint64_t> seed;
  std::string format;
  unsigned jobs;
  std::ostream& log;

  const std::filesystem::path& out() const { return out_; }
  /// Writes `content` to out/rel and records it in the manifest.
  void write(const std::string& rel, const std::string& content);
  void write_trace(const std::string& rel, const MemoryTrace& trace, TraceFormat format);
  void write_page_table(const std::string& rel, const PageTableSnapshot& table);
  /// Writes the table as report.<format> under `prefix`.
  void report(const Table& table, const std::string& prefix = "");
  /// Config echo plus manifest; call last.
  void finish(const std::string& command, const std::vector<std::string>& inputs);

  /// A nested run writing below out/sub sharing this run's manifest.
  Run sub(const std::string& sub);

 private:
  void note(const std::string& rel, const std::string& content);

  std::filesystem::path out_;
  std::string prefix_;
  std::shared_ptr<std::vector<Json>> files_;
};

SynthSpec synth_from(Config& cfg, const std::optional<std::uint64_t>& seed, const std::string& section = "synth");
std::vector<CacheLevelConfig> hierarchy_from(Config& cfg, std::uint32_t n_cores, const std::string& section = "cache");
TlbConfig tlb_from(Config& cfg, const std::string& section = "tlb");
PrefetcherConfig prefetch_from(Config& cfg, const std::string& section = "prefetch");
std::vector<TierConfig> tiers_from(Config& cfg, std::uint64_t stream_len, const std::optional<std::uint64_t>& seed);
StitchSpec stitch_from(Config& cfg, const std::optional<std::uint64_t>& seed);

MemoryTrace load_trace(const std::string& path);
PageTableSnapshot page_table_for(Config& cfg, const std::string& trace_path, const MemoryTrace& trace,
                                 const std::string& section);

Table cache_table(const CacheStats& stats);
Table tlb_table(const TlbStats& stats);
Table prefetch_table(const PrefetchReport& report);
Table tier_table(const std::vector<TierReport>& reports, const std::vector<TierConfig>& configs);

/// Thrown by paperlab recipes whose asserted property does not hold.
struct PropertyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> paperlab_recipes();
void run_paperlab(Run& run, const std::string& recipe);

}  // namespace memscope::cli
