#include "memscope/stitch.hpp"

#include <random>

#include "json.hpp"
#include "memscope/error.hpp"
#include "memscope/synth.hpp"

namespace memscope {

std::vector<std::uint64_t> window_starts(std::uint64_t length, const StitchSpec& spec, std::uint64_t seed) {
  if (spec.window_len == 0) throw PreconditionError("window_len must be >= 1");
  std::mt19937_64 rng(seed);
  const std::uint64_t period = spec.window_len + spec.gap_len;
  std::vector<std::uint64_t> starts;
  for (std::uint64_t base = 0; base < length; base += period) {
    const std::uint64_t jitter = spec.gap_len ? uniform_below(rng, spec.gap_len + 1) : 0;
    if (base + jitter >= length) break;
    starts.push_back(base + jitter);
  }
  return starts;
}

StitchResult stitch(const std::vector<MemoryTrace>& sources, const StitchSpec& spec,
                    const std::vector<std::string>& names) {
  if (sources.empty()) throw PreconditionError("stitch: no sources");
  if (spec.window_len == 0) throw PreconditionError("stitch: window_len must be >= 1");
  auto label = [&](std::size_t i) { return i < names.size() ? names[i] : "source " + std::to_string(i); };

  StitchResult out;
  auto& meta = out.trace.meta;
  meta = sources[0].meta;
  meta.origin = TraceOrigin::Stitched;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& src = sources[i];
    if (src.records.size() < spec.window_len)
      throw PreconditionError("stitch: " + label(i) + " has " + std::to_string(src.records.size()) +
                              " records, fewer than window_len " + std::to_string(spec.window_len));
    if (src.meta.page_size != meta.page_size || src.meta.line_size != meta.line_size)
      throw PreconditionError("stitch: " + label(i) + " differs in page or line size");
    meta.n_cores = std::max(meta.n_cores, src.meta.n_cores);
    meta.has_physical = meta.has_physical && src.meta.has_physical;
  }

  // Each source gets its own jitter stream so adding a host does not shift
  // the phases of the others.
  std::vector<std::vector<std::uint64_t>> starts;
  std::size_t rounds = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    starts.push_back(window_starts(sources[i].records.size(), spec, spec.rng_seed * 0x9E3779B97F4A7C15ull + i));
    rounds = std::max(rounds, starts.back().size());
  }

  std::uint64_t next_seq = 0;
  bool have_prev = false;
  std::size_t prev_source = 0;
  std::uint64_t prev_orig = 0;
  for (std::size_t k = 0; k < rounds; ++k) {
    for (std::size_t i = 0; i < sources.size(); ++i) {
      if (k >= starts[i].size()) continue;
      const auto& recs = sources[i].records;
      const std::uint64_t begin = starts[i][k];
      const std::uint64_t end = std::min<std::uint64_t>(recs.size(), begin + spec.window_len);
      WindowProvenance w;
      w.source = i;
      w.window_index = k;
      w.orig_record_start = begin;
      w.records = end - begin;
      w.orig_seq_start = recs[begin].seq;
      w.orig_seq_end = recs[end - 1].seq;
      for (std::uint64_t r = begin; r < end; ++r) {
        TraceRecord rec = recs[r];
        if (!have_prev || prev_source != i || prev_orig != rec.seq) {
          if (have_prev) ++next_seq;
          have_prev = true;
        }
        prev_source = i;
        prev_orig = rec.seq;
        rec.seq = next_seq;
        if (!meta.has_physical) rec.paddr.reset();
        if (r == begin) w.out_seq_start = rec.seq;
        w.out_seq_end = rec.seq;
        out.trace.records.push_back(rec);
      }
      out.manifest.push_back(w);
    }
  }
  return out;
}

std::string stitch_manifest_json(const StitchResult& result, const std::vector<std::string>& names) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& w : result.manifest) {
    nlohmann::ordered_json row;
    if (w.source < names.size())
      row["source"] = names[w.source];
    else
      row["source"] = w.source;
    row["window_index"] = w.window_index;
    row["orig_seq_start"] = w.orig_seq_start;
    row["orig_seq_end"] = w.orig_seq_end;
    row["orig_record_start"] = w.orig_record_start;
    row["records"] = w.records;
    row["out_seq_start"] = w.out_seq_start;
    row["out_seq_end"] = w.out_seq_end;
    rows.push_back(std::move(row));
  }
  return rows.dump(2) + "\n";
}

double l1d_hit_ratio(const MemoryTrace& trace, const CacheLevelConfig& l1d) {
  MemoryTrace data;
  data.meta = trace.meta;
  data.meta.n_cores = 1;
  for (const auto& r : trace.records) {
    if (r.kind == AccessKind::IFetch) continue;
    TraceRecord c = r;
    c.core = 0;
    data.records.push_back(c);
  }
  if (data.records.empty()) throw PreconditionError("l1d_hit_ratio: trace has no data records");
  CacheLevelConfig level = l1d;
  level.share_cluster = 1;
  level.classes = ServedClasses::Data;
  const auto stats = simulate_hierarchy(data, {level});
  const auto& c = stats.levels[0][AccessClass::Data];
  return static_cast<double>(c.hits) / static_cast<double>(c.accesses);
}

double read_write_ratio(const MemoryTrace& trace) {
  std::uint64_t loads = 0, stores = 0;
  for (const auto& r : trace.records) {
    loads += r.kind == AccessKind::Load;
    stores += r.kind == AccessKind::Store;
  }
  if (stores == 0) throw UndefinedValueError("read_write_ratio: trace has no stores");
  return static_cast<double>(loads) / static_cast<double>(stores);
}

ValidationReport validate(const MemoryTrace& full, const MemoryTrace& stitched, const CacheLevelConfig& l1d) {
  if (full.empty() || stitched.empty()) throw PreconditionError("validate: empty trace");
  if (full.meta.line_size != stitched.meta.line_size) throw PreconditionError("validate: line sizes differ");
  ValidationReport r;
  r.l1d_hit_ratio_full = l1d_hit_ratio(full, l1d);
  r.l1d_hit_ratio_stitched = l1d_hit_ratio(stitched, l1d);
  r.hit_ratio_error_pct = (r.l1d_hit_ratio_full - r.l1d_hit_ratio_stitched) / r.l1d_hit_ratio_full * 100.0;
  r.rw_ratio_full = read_write_ratio(full);
  r.rw_ratio_stitched = read_write_ratio(stitched);
  r.rw_ratio_error_pct = (r.rw_ratio_full - r.rw_ratio_stitched) / r.rw_ratio_full * 100.0;
  return r;
}

std::string validation_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["l1d_hit_ratio_full"] = report.l1d_hit_ratio_full;
  j["l1d_hit_ratio_stitched"] = report.l1d_hit_ratio_stitched;
  j["hit_ratio_error_pct"] = report.hit_ratio_error_pct;
  j["rw_ratio_full"] = report.rw_ratio_full;
  j["rw_ratio_stitched"] = report.rw_ratio_stitched;
  j["rw_ratio_error_pct"] = report.rw_ratio_error_pct;
  return j.dump(2) + "\n";
}

}  // namespace memscope
