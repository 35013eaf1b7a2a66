#include "memscope/tier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "memscope/error.hpp"
#include "memscope/parallel.hpp"
#include "memscope/synth.hpp"

namespace memscope {

namespace {

MissKind miss_kind(AccessKind kind) {
  switch (kind) {
    case AccessKind::IFetch:
      return MissKind::IFetch;
    case AccessKind::Load:
      return MissKind::Load;
    case AccessKind::Store:
      return MissKind::Store;
  }
  return MissKind::Load;
}

class MissCollector final : public HierarchyObserver {
 public:
  MissCollector(const TraceMeta& meta, std::vector<MissEvent>& out) : meta_(meta), out_(out) {}

  void on_memory(std::size_t, const TraceRecord& rec, std::uint64_t line) override {
    out_.push_back({rec.seq, page_of(rec, line), miss_kind(rec.kind)});
  }
  void on_prefetch_fill(std::size_t, std::size_t, const TraceRecord& trigger, std::uint64_t line,
                        bool from_memory) override {
    if (from_memory) out_.push_back({trigger.seq, page_of(trigger, line), MissKind::Prefetch});
  }

 private:
  std::uint64_t page_of(const TraceRecord& rec, std::uint64_t line) const {
    std::uint64_t page = line * meta_.line_size / meta_.page_size;
    if (!rec.paddr) page |= static_cast<std::uint64_t>(rec.asid) << 40;
    return page;
  }

  const TraceMeta& meta_;
  std::vector<MissEvent>& out_;
};

}  // namespace

std::vector<MissEvent> collect_llc_misses(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                          const PrefetcherConfig& pf) {
  std::vector<MissEvent> out;
  MissCollector collector(trace.meta, out);
  simulate_with_prefetch(trace, levels, pf, nullptr, &collector);
  return out;
}

void check_tier_config(const TierConfig& cfg) {
  auto fail = [&](const std::string& what) { throw ConfigError("tier config '" + cfg.name + "': " + what); };
  if (!(cfg.near_capacity_fraction > 0.0 && cfg.near_capacity_fraction <= 1.0))
    fail("near_capacity_fraction must be in (0, 1]");
  if (!(cfg.near_bw > 0.0)) fail("near_bw must be > 0");
  if (cfg.far_bw < 0.0) fail("far_bw must be >= 0");
  if (!(cfg.near_latency > 0.0) || !(cfg.far_latency > 0.0)) fail("latencies must be > 0");
  if (cfg.migration_epoch == 0) fail("migration_epoch must be >= 1");
  if (!(cfg.hotness_decay >= 0.0 && cfg.hotness_decay < 1.0)) fail("hotness_decay must be in [0, 1)");
  if (!(cfg.demand > 0.0)) fail("demand must be > 0");
  if (!(cfg.baseline_bw > 0.0) || !(cfg.baseline_latency > 0.0)) fail("baseline bandwidth and latency must be > 0");
}

TierConfig baseline_tier() {
  TierConfig cfg;
  cfg.name = "baseline";
  cfg.near_capacity_fraction = 1.0;
  cfg.near_bw = 100.0;
  return cfg;
}

TierConfig ideal_tier() {
  TierConfig cfg;
  cfg.name = "ideal";
  cfg.near_capacity_fraction = 1.0;
  cfg.near_bw = 200.0;
  cfg.near_unit_cost = 2.0;
  return cfg;
}

TierConfig tiered_tier() {
  TierConfig cfg;
  cfg.name = "tiered";
  cfg.near_capacity_fraction = 0.375;
  cfg.near_bw = 200.0;
  cfg.far_bw = 100.0;
  cfg.far_latency = 2.0;
  cfg.near_unit_cost = 2.0;
  return cfg;
}

double penalty(double utilization) { return 1.0 / (1.0 - std::min(std::max(utilization, 0.0), 0.95)); }

double relative_cost(const TierConfig& cfg, double near_unit_cost, double far_unit_cost) {
  if (!(near_unit_cost > 0.0) || !(far_unit_cost > 0.0)) throw PreconditionError("unit costs must be > 0");
  const double near = cfg.near_capacity_fraction;
  return (near * near_unit_cost + (1.0 - near) * far_unit_cost) / far_unit_cost;
}

double epoch_throughput(const TierConfig& cfg, double near_share, double far_share, double near_migration,
                        double far_migration) {
  const double near_load = near_share + near_migration;
  const double far_load = far_share + far_migration;
  if (far_load > 0.0 && !(cfg.far_bw > 0.0)) throw ConfigError("traffic routed to an absent far tier");
  const double demand_lines = near_share + far_share;
  if (!(demand_lines > 0.0)) return 0.0;

  double cap = std::numeric_limits<double>::infinity();
  if (near_load > 0.0) cap = std::min(cap, cfg.near_bw / near_load);
  if (far_load > 0.0) cap = std::min(cap, cfg.far_bw / far_load);

  auto latency = [&](double x) {
    double l = near_share * cfg.near_latency * penalty(x * near_load / cfg.near_bw);
    if (far_share > 0.0 || far_load > 0.0)
      l += far_share * cfg.far_latency * penalty(far_load > 0.0 ? x * far_load / cfg.far_bw : 0.0);
    return l / demand_lines;
  };
  if (cap * latency(cap) <= cfg.demand) return cap;
  double lo = 0.0, hi = cap;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * latency(mid) < cfg.demand)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

TierReport simulate_tiered(const std::vector<MissEvent>& stream, const TierConfig& cfg) {
  check_tier_config(cfg);
  if (stream.empty()) throw PreconditionError("simulate_tiered: empty miss stream");

  // Page indices in first-touch order, filler pages after.
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  std::vector<std::uint32_t> ids(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    auto [it, fresh] = index.try_emplace(stream[i].page, static_cast<std::uint32_t>(index.size()));
    ids[i] = it->second;
  }
  const std::uint64_t distinct = index.size();
  if (cfg.total_pages != 0 && cfg.total_pages < distinct)
    throw ConfigError("total_pages " + std::to_string(cfg.total_pages) + " is below the " +
                      std::to_string(distinct) + " distinct pages of the stream");
  const std::uint64_t total = std::max<std::uint64_t>(cfg.total_pages, distinct);
  const auto near_cap = static_cast<std::uint64_t>(std::floor(cfg.near_capacity_fraction * total + 1e-9));
  if (near_cap == 0) throw ConfigError("near_capacity_fraction too small: no page fits in the near tier");
  if (near_cap < total && !(cfg.far_bw > 0.0))
    throw ConfigError("near tier holds " + std::to_string(near_cap) + " of " + std::to_string(total) +
                      " pages and there is no far tier");

  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0u);
  if (cfg.placement == InitialPlacement::Random) {
    std::mt19937_64 rng(cfg.seed);
    for (std::uint64_t i = total; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
  }
  std::vector<std::uint8_t> in_near(total, 0);
  for (std::uint64_t i = 0; i < near_cap && i < total; ++i) in_near[order[i]] = 1;
  std::uint64_t near_pages = std::min(near_cap, total);

  TierReport report;
  report.name = cfg.name;
  report.total_pages = total;
  report.near_capacity_pages = near_cap;

  std::vector<double> hot(total, 0.0);
  std::vector<std::uint32_t> count(total, 0);
  std::vector<std::uint32_t> touched;
  std::vector<std::uint32_t> far_cand, near_cand;
  std::uint64_t pending_near = 0, pending_far = 0;
  const std::uint64_t lpp = cfg.lines_per_page;

  for (std::size_t start = 0, epoch = 0; start < stream.size(); start += cfg.migration_epoch, ++epoch) {
    const std::size_t end = std::min<std::size_t>(stream.size(), start + cfg.migration_epoch);
    EpochSample s;
    s.epoch = epoch;
    s.near_migration_lines = pending_near;
    s.far_migration_lines = pending_far;
    touched.clear();
    for (std::size_t i = start; i < end; ++i) {
      const std::uint32_t id = ids[i];
      if (count[id]++ == 0) touched.push_back(id);
      if (in_near[id])
        ++s.near_lines;
      else
        ++s.far_lines;
    }
    const double n = static_cast<double>(end - start);
    s.throughput = epoch_throughput(cfg, static_cast<double>(s.near_lines) / n, static_cast<double>(s.far_lines) / n,
                                    static_cast<double>(pending_near) / n, static_cast<double>(pending_far) / n);
    s.near_utilization = s.throughput * static_cast<double>(s.near_lines + pending_near) / n / cfg.near_bw;
    s.far_utilization =
        cfg.far_bw > 0.0 ? s.throughput * static_cast<double>(s.far_lines + pending_far) / n / cfg.far_bw : 0.0;
    pending_near = pending_far = 0;

    for (auto& h : hot) h *= cfg.hotness_decay;
    for (std::uint32_t id : touched) {
      hot[id] += count[id];
      count[id] = 0;
    }

    if (cfg.promote_budget > 0 && near_cap < total) {
      const std::size_t budget = cfg.promote_budget;
      far_cand.clear();
      near_cand.clear();
      for (std::uint32_t id = 0; id < total; ++id) {
        if (in_near[id])
          near_cand.push_back(id);
        else if (hot[id] > 0.0)
          far_cand.push_back(id);
      }
      auto hotter = [&](std::uint32_t a, std::uint32_t b) { return hot[a] != hot[b] ? hot[a] > hot[b] : a < b; };
      auto colder = [&](std::uint32_t a, std::uint32_t b) { return hot[a] != hot[b] ? hot[a] < hot[b] : a < b; };
      const std::size_t kf = std::min(budget, far_cand.size());
      const std::size_t kn = std::min(budget, near_cand.size());
      std::partial_sort(far_cand.begin(), far_cand.begin() + static_cast<std::ptrdiff_t>(kf), far_cand.end(), hotter);
      std::partial_sort(near_cand.begin(), near_cand.begin() + static_cast<std::ptrdiff_t>(kn), near_cand.end(),
                        colder);
      std::size_t next_victim = 0;
      for (std::size_t i = 0; i < kf; ++i) {
        const std::uint32_t up = far_cand[i];
        if (near_pages < near_cap) {
          in_near[up] = 1;
          ++near_pages;
          pending_near += lpp;
          pending_far += lpp;
          ++s.promotions;
          continue;
        }
        if (next_victim >= kn) break;
        const std::uint32_t down = near_cand[next_victim];
        if (!(hot[up] > hot[down])) break;
        ++next_victim;
        in_near[up] = 1;
        in_near[down] = 0;
        pending_near += 2 * lpp;
        pending_far += 2 * lpp;
        ++s.promotions;
      }
    }
    s.near_pages = near_pages;
    report.migrations += s.promotions;
    report.epochs.push_back(s);
  }

  TierConfig base = cfg;
  base.near_bw = cfg.baseline_bw;
  base.near_latency = cfg.baseline_latency;
  base.far_bw = 0.0;
  const double reference = epoch_throughput(base, 1.0, 0.0, 0.0, 0.0);

  const std::size_t epochs = report.epochs.size();
  const std::size_t tail = std::max<std::size_t>(1, epochs / 4);
  double steady = 0.0, near_bw = 0.0, far_bw = 0.0;
  for (std::size_t e = epochs - tail; e < epochs; ++e) {
    const auto& s = report.epochs[e];
    const double n = static_cast<double>(s.near_lines + s.far_lines);
    steady += s.throughput;
    near_bw += s.throughput * static_cast<double>(s.near_lines + s.near_migration_lines) / n;
    far_bw += s.throughput * static_cast<double>(s.far_lines + s.far_migration_lines) / n;
  }
  steady /= static_cast<double>(tail);
  report.near_bw_measured = near_bw / static_cast<double>(tail);
  report.far_bw_measured = far_bw / static_cast<double>(tail);
  for (const auto& s : report.epochs) {
    if (s.throughput >= 0.98 * steady) break;
    ++report.warmup_epochs;
  }
  report.reference_throughput = reference;
  report.relative_throughput = steady / reference;
  report.relative_cost = relative_cost(cfg, cfg.near_unit_cost, cfg.far_unit_cost);
  report.throughput_per_cost = report.relative_throughput / report.relative_cost;
  return report;
}

std::vector<TierReport> compare_tiers(const std::vector<MissEvent>& stream, const std::vector<TierConfig>& configs,
                                      unsigned jobs) {
  std::vector<TierReport> reports(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) { reports[i] = simulate_tiered(stream, configs[i]); });
  return reports;
}

std::string tier_report_json(const std::vector<TierReport>& reports, const std::vector<TierConfig>& configs) {
  if (reports.size() != configs.size()) throw PreconditionError("tier_report_json: reports and configs differ in size");
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const auto& c = configs[i];
    nlohmann::ordered_json row;
    row["config"] = r.name;
    row["near_capacity_fraction"] = c.near_capacity_fraction;
    row["near_bw"] = c.near_bw;
    row["far_capacity_fraction"] = 1.0 - c.near_capacity_fraction;
    row["far_bw"] = c.far_bw;
    row["relative_throughput"] = r.relative_throughput;
    row["measured_near_bw"] = r.near_bw_measured;
    row["measured_far_bw"] = r.far_bw_measured;
    row["cost_near"] = c.near_capacity_fraction * c.near_unit_cost / c.far_unit_cost;
    row["cost_far"] = (1.0 - c.near_capacity_fraction);
    row["cost_total"] = r.relative_cost;
    row["throughput_per_cost"] = r.throughput_per_cost;
    row["warmup_epochs"] = r.warmup_epochs;
    row["migrations"] = r.migrations;
    rows.push_back(std::move(row));
  }
  return rows.dump(2) + "\n";
}

std::string tier_epochs_csv(const TierReport& report) {
  std::ostringstream os;
  os << "epoch,throughput,relative_throughput,near_lines,far_lines,near_migration_lines,far_migration_lines,"
        "promotions,near_pages,near_utilization,far_utilization\n";
  const double ref = report.reference_throughput > 0.0 ? report.reference_throughput : 1.0;
  char buf[160];
  for (const auto& s : report.epochs) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", s.throughput, s.throughput / ref);
    os << s.epoch << ',' << buf << ',' << s.near_lines << ',' << s.far_lines << ',' << s.near_migration_lines << ','
       << s.far_migration_lines << ',' << s.promotions << ',' << s.near_pages << ',';
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", s.near_utilization, s.far_utilization);
    os << buf << '\n';
  }
  return os.str();
}

}  // namespace memscope
