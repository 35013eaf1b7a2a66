#include "memscope/analytics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "memscope/error.hpp"

namespace memscope {

std::string_view to_string(SampleEventKind kind) {
  switch (kind) {
    case SampleEventKind::ItlbMiss:
      return "ITLB_MISS";
    case SampleEventKind::LlcLoadMiss:
      return "LLC_LOAD_MISS";
    case SampleEventKind::Load:
      return "LOAD";
    case SampleEventKind::IFetch:
      return "IFETCH";
  }
  return "?";
}

PeriodicSampler::PeriodicSampler(std::uint64_t period) : period_(period) {
  if (period == 0) throw PreconditionError("sampling period must be >= 1");
}

namespace {

std::vector<SampleStream> empty_streams(std::uint32_t n_cores, SampleEventKind kind, std::uint64_t period) {
  std::vector<SampleStream> streams(n_cores);
  for (std::uint32_t c = 0; c < n_cores; ++c) {
    streams[c].core = static_cast<std::uint16_t>(c);
    streams[c].kind = kind;
    streams[c].period = period;
  }
  return streams;
}

class LoadMissSampler final : public HierarchyObserver {
 public:
  LoadMissSampler(std::vector<SampleStream>& streams, std::uint64_t period) : streams_(streams) {
    for (std::size_t i = 0; i < streams.size(); ++i) samplers_.emplace_back(period);
  }
  void on_memory(std::size_t, const TraceRecord& rec, std::uint64_t) override {
    if (rec.kind != AccessKind::Load) return;
    auto& s = streams_[rec.core];
    ++s.events;
    if (samplers_[rec.core].tick()) s.samples.push_back({rec.seq, rec.asid, rec.vaddr, rec.paddr});
  }

 private:
  std::vector<SampleStream>& streams_;
  std::vector<PeriodicSampler> samplers_;
};

}  // namespace

std::vector<SampleStream> sample_itlb_misses(const MemoryTrace& trace, const TlbConfig& cfg,
                                             const PageTableSnapshot& page_table, std::uint64_t period) {
  if (period == 0) throw PreconditionError("sampling period must be >= 1");
  auto streams = empty_streams(trace.meta.n_cores, SampleEventKind::ItlbMiss, period);
  std::vector<PeriodicSampler> samplers(trace.meta.n_cores, PeriodicSampler(period));
  simulate_itlb(trace, cfg, page_table, [&](const TlbEvent& ev, const TraceRecord& rec) {
    if (ev.level != 1 || ev.outcome == TlbOutcome::Hit) return;
    auto& s = streams[rec.core];
    ++s.events;
    if (samplers[rec.core].tick()) s.samples.push_back({rec.seq, rec.asid, rec.vaddr, rec.paddr});
  });
  return streams;
}

std::vector<SampleStream> sample_llc_load_misses(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                                 std::uint64_t period) {
  if (period == 0) throw PreconditionError("sampling period must be >= 1");
  auto streams = empty_streams(trace.meta.n_cores, SampleEventKind::LlcLoadMiss, period);
  LoadMissSampler sampler(streams, period);
  simulate_hierarchy(trace, levels, ReplacementPolicy::Lru, &sampler);
  return streams;
}

namespace {

std::vector<SampleStream> sample_records(const MemoryTrace& trace, AccessKind kind, SampleEventKind event,
                                         std::uint64_t period) {
  if (period == 0) throw PreconditionError("sampling period must be >= 1");
  auto streams = empty_streams(trace.meta.n_cores, event, period);
  std::vector<PeriodicSampler> samplers(trace.meta.n_cores, PeriodicSampler(period));
  for (const auto& rec : trace.records) {
    if (rec.kind != kind) continue;
    auto& s = streams[rec.core];
    ++s.events;
    if (samplers[rec.core].tick()) s.samples.push_back({rec.seq, rec.asid, rec.vaddr, rec.paddr});
  }
  return streams;
}

}  // namespace

std::vector<SampleStream> sample_loads(const MemoryTrace& trace, std::uint64_t period) {
  return sample_records(trace, AccessKind::Load, SampleEventKind::Load, period);
}

std::vector<SampleStream> sample_ifetches(const MemoryTrace& trace, std::uint64_t period) {
  return sample_records(trace, AccessKind::IFetch, SampleEventKind::IFetch, period);
}

std::vector<SampleStream> slice_streams(const std::vector<SampleStream>& streams, std::uint64_t lo, std::uint64_t hi) {
  std::vector<SampleStream> out;
  for (const auto& s : streams) {
    SampleStream t = s;
    t.samples.clear();
    auto first = std::lower_bound(s.samples.begin(), s.samples.end(), lo,
                                  [](const Sample& a, std::uint64_t v) { return a.seq < v; });
    auto last = std::lower_bound(first, s.samples.end(), hi, [](const Sample& a, std::uint64_t v) { return a.seq < v; });
    t.samples.assign(first, last);
    t.events = t.samples.size() * t.period;
    out.push_back(std::move(t));
  }
  return out;
}

std::uint64_t Heatmap::total() const {
  std::uint64_t n = 0;
  for (const auto& [slice, row] : rows)
    for (auto c : row) n += c;
  return n;
}

std::uint64_t Heatmap::nonzero_cells() const {
  std::uint64_t n = 0;
  for (const auto& [slice, row] : rows)
    for (auto c : row) n += c != 0;
  return n;
}

Heatmap heatmap(const SampleStream& stream, std::uint64_t slice_bytes, std::uint64_t bin_bytes) {
  if (!std::has_single_bit(slice_bytes)) throw ConfigError("heatmap slice size must be a power of two");
  if (!std::has_single_bit(bin_bytes) || bin_bytes > slice_bytes)
    throw ConfigError("heatmap bin size must be a power of two no larger than the slice");
  if (stream.samples.empty()) throw PreconditionError("heatmap: empty sample stream");
  Heatmap map;
  map.slice_bytes = slice_bytes;
  map.bin_bytes = bin_bytes;
  for (const auto& s : stream.samples) {
    auto& row = map.rows[s.vaddr / slice_bytes];
    if (row.empty()) row.assign(map.bins(), 0);
    ++row[(s.vaddr % slice_bytes) / bin_bytes];
  }
  return map;
}

std::string heatmap_csv(const Heatmap& map) {
  std::ostringstream os;
  os << "slice";
  for (std::uint64_t b = 0; b < map.bins(); ++b) os << ",b" << b;
  os << '\n';
  char buf[32];
  for (const auto& [slice, row] : map.rows) {
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(slice * map.slice_bytes));
    os << buf;
    for (auto c : row) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

double cosine_similarity(const Heatmap& a, const Heatmap& b) {
  if (a.slice_bytes != b.slice_bytes || a.bin_bytes != b.bin_bytes)
    throw PreconditionError("cosine_similarity: heatmaps differ in geometry");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [slice, row] : a.rows) {
    for (auto c : row) na += static_cast<double>(c) * static_cast<double>(c);
    auto it = b.rows.find(slice);
    if (it == b.rows.end()) continue;
    for (std::size_t i = 0; i < row.size(); ++i) dot += static_cast<double>(row[i]) * static_cast<double>(it->second[i]);
  }
  for (const auto& [slice, row] : b.rows)
    for (auto c : row) nb += static_cast<double>(c) * static_cast<double>(c);
  if (na == 0.0 || nb == 0.0) throw UndefinedValueError("cosine_similarity: empty heatmap");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw PreconditionError("pearson: vectors differ in length");
  if (x.size() < 2) throw UndefinedValueError("pearson: fewer than two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedValueError("pearson: zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

PagePair page_counts(const SampleStream& a, const SampleStream& b, std::uint64_t page_size) {
  std::map<std::uint64_t, std::pair<double, double>> bins;
  for (const auto& s : a.samples) bins[s.vaddr / page_size].first += 1.0;
  for (const auto& s : b.samples) bins[s.vaddr / page_size].second += 1.0;
  PagePair out;
  for (const auto& [page, c] : bins) {
    out.pages.push_back(page);
    out.a.push_back(c.first);
    out.b.push_back(c.second);
  }
  return out;
}

double correlation(const SampleStream& a, const SampleStream& b, std::uint64_t page_size) {
  auto pp = page_counts(a, b, page_size);
  return pearson(pp.a, pp.b);
}

PercentileFootprint BandwidthDistribution::footprint(double percent) const {
  if (!(percent > 0.0 && percent <= 100.0)) throw PreconditionError("percentile must be in (0, 100]");
  PercentileFootprint fp;
  fp.percent = percent;
  if (total_samples == 0) return fp;
  const double need = percent / 100.0 * static_cast<double>(total_samples) * (1.0 - 1e-12);
  std::uint64_t cum = 0;
  for (const auto& [page, count] : pages) {
    cum += count;
    ++fp.pages;
    if (static_cast<double>(cum) >= need) break;
  }
  fp.bytes = fp.pages * page_size;
  fp.fraction_of_touched = static_cast<double>(fp.pages) / static_cast<double>(total_pages);
  return fp;
}

BandwidthDistribution bw_distribution(const std::vector<SampleStream>& streams,
                                      const std::vector<PageTableSnapshot>& snapshots, std::uint64_t page_size) {
  std::vector<const PageTableSnapshot*> ordered;
  for (const auto& s : snapshots) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->snapshot_seq() < b->snapshot_seq(); });

  BandwidthDistribution dist;
  dist.page_size = page_size;
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  bool any = false;
  for (const auto& stream : streams) {
    for (const auto& s : stream.samples) {
      any = true;
      std::optional<std::uint64_t> key;
      if (s.paddr) {
        key = *s.paddr / page_size;
      } else if (!ordered.empty()) {
        auto it = std::lower_bound(ordered.begin(), ordered.end(), s.seq,
                                   [](const auto* snap, std::uint64_t seq) { return snap->snapshot_seq() < seq; });
        if (it == ordered.end()) --it;
        if (auto pa = (*it)->translate(s.asid, s.vaddr)) {
          key = *pa / page_size;
        } else if (it != ordered.begin()) {
          if (auto pb = (*std::prev(it))->translate(s.asid, s.vaddr)) key = *pb / page_size;
        }
      } else {
        key = (static_cast<std::uint64_t>(s.asid) << 40) | (s.vaddr / page_size);
      }
      if (!key) {
        ++dist.untranslated;
        continue;
      }
      ++counts[*key];
      ++dist.total_samples;
    }
  }
  if (!any) throw PreconditionError("bw_distribution: no samples");
  if (dist.untranslated > 0)
    std::fprintf(stderr, "warning: %llu samples could not be translated and were excluded\n",
                 static_cast<unsigned long long>(dist.untranslated));
  dist.pages.assign(counts.begin(), counts.end());
  std::sort(dist.pages.begin(), dist.pages.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  dist.total_pages = dist.pages.size();
  dist.cumulative.reserve(dist.pages.size());
  std::uint64_t cum = 0;
  for (const auto& [page, count] : dist.pages) {
    cum += count;
    dist.cumulative.push_back(static_cast<double>(cum) / static_cast<double>(dist.total_samples));
  }
  return dist;
}

std::string bw_distribution_json(const BandwidthDistribution& dist, const std::vector<double>& percents,
                                 std::optional<std::uint64_t> allocated_pages) {
  nlohmann::ordered_json j;
  j["page_size"] = dist.page_size;
  j["total_pages"] = dist.total_pages;
  j["total_samples"] = dist.total_samples;
  j["untranslated"] = dist.untranslated;
  if (allocated_pages) {
    j["allocated_pages"] = *allocated_pages;
    j["active_fraction"] =
        *allocated_pages ? static_cast<double>(dist.total_pages) / static_cast<double>(*allocated_pages) : 0.0;
  }
  auto rows = nlohmann::ordered_json::array();
  for (double p : percents) {
    auto fp = dist.footprint(p);
    rows.push_back({{"percent", fp.percent},
                    {"pages", fp.pages},
                    {"bytes", fp.bytes},
                    {"fraction_of_touched", fp.fraction_of_touched}});
  }
  j["percentiles"] = std::move(rows);
  return j.dump(2) + "\n";
}

IpcProjection project_ipc(const std::vector<IpcPoint>& points, double target_bytes) {
  std::map<double, std::pair<double, std::size_t>> by_size;
  double max_size = 0.0;
  for (const auto& p : points) {
    if (!(p.cache_bytes > 0.0)) throw PreconditionError("project_ipc: cache sizes must be > 0");
    auto& slot = by_size[p.cache_bytes];
    slot.first += p.ipc;
    ++slot.second;
    max_size = std::max(max_size, p.cache_bytes);
  }
  if (by_size.size() < 2) throw PreconditionError("project_ipc: need at least two distinct cache sizes");
  if (target_bytes < max_size) throw PreconditionError("project_ipc: target is below the largest measured size");

  std::vector<double> xs, ys;
  for (const auto& [size, acc] : by_size) {
    xs.push_back(std::log2(size));
    ys.push_back(acc.first / static_cast<double>(acc.second));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  IpcProjection out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.projected = my + out.slope * (std::log2(target_bytes) - mx);
  out.distinct_sizes = by_size.size();
  return out;
}

}  // namespace memscope
