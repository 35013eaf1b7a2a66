#include "memscope/tlb.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "memscope/error.hpp"

namespace memscope {

std::string_view to_string(PageClass cls) { return cls == PageClass::Small4K ? "4K" : "2M"; }

std::string_view to_string(TlbOutcome outcome) {
  switch (outcome) {
    case TlbOutcome::Hit:
      return "HIT";
    case TlbOutcome::Extended:
      return "EXTENDED";
    case TlbOutcome::MissFilled:
      return "MISS_FILLED";
  }
  return "?";
}

bool TlbEntry::has_asid(std::uint32_t asid) const {
  return std::find(asids.begin(), asids.end(), asid) != asids.end();
}

void check_tlb_config(const TlbConfig& cfg, std::uint32_t n_cores) {
  auto check_level = [&](const TlbLevelConfig& level) {
    auto fail = [&](const std::string& what) { throw ConfigError("TLB level '" + level.name + "': " + what); };
    if (level.share_cluster == 0 || n_cores % level.share_cluster != 0)
      fail("share_cluster " + std::to_string(level.share_cluster) + " does not divide n_cores " +
           std::to_string(n_cores));
    bool seen[2] = {false, false};
    for (const auto& s : level.structures) {
      if (s.entries == 0) fail("structure with zero entries");
      if (s.entries % s.effective_ways() != 0) fail("entries must be divisible by ways");
      auto& flag = seen[static_cast<int>(s.page_class)];
      if (flag) fail("two structures for page class " + std::string(to_string(s.page_class)));
      flag = true;
    }
  };
  check_level(cfg.l1);
  if (cfg.l1.share_cluster != 1) throw ConfigError("L1 I-TLB must be private (share_cluster = 1)");
  if (cfg.has_l2) check_level(cfg.l2);
  if (cfg.walk_cost < 0.0) throw ConfigError("walk_cost must be >= 0");
}

TlbConfig gen4_itlb(std::uint32_t l2_cluster, std::uint32_t l2_entries_per_core) {
  TlbConfig cfg;
  cfg.l1.name = "L1_ITLB";
  cfg.l1.structures = {{128, 8, PageClass::Small4K}, {8, 0, PageClass::Huge2M}};
  cfg.l1.share_cluster = 1;
  cfg.l2.name = "L2_ITLB";
  cfg.l2.structures = {{l2_entries_per_core * l2_cluster, 12, PageClass::Small4K}};
  cfg.l2.share_cluster = l2_cluster;
  return cfg;
}

TlbArray::TlbArray(const TlbStructConfig& cfg, std::uint32_t first_core, std::uint32_t cluster)
    : cfg_(cfg),
      first_core_(first_core),
      cluster_(cluster),
      ways_(cfg.effective_ways()),
      sets_(cfg.sets()),
      entries_(cfg.entries) {
  for (auto& e : entries_) {
    e.page_class = cfg.page_class;
    e.asids.reserve(cluster);
  }
}

const TlbEntry* TlbArray::find(std::uint64_t vfn) const {
  const std::size_t base = static_cast<std::size_t>(vfn % sets_) * ways_;
  for (std::uint32_t w = 0; w < ways_; ++w) {
    const auto& e = entries_[base + w];
    if (e.valid && e.vfn == vfn) return &e;
  }
  return nullptr;
}

TlbArray::Result TlbArray::lookup_install(std::uint16_t core, std::uint32_t asid, std::uint64_t vfn,
                                          std::uint64_t walk_pfn) {
  if (core < first_core_ || core >= first_core_ + cluster_)
    throw RoutingError("core " + std::to_string(core) + " is outside the TLB cluster [" +
                       std::to_string(first_core_) + ", " + std::to_string(first_core_ + cluster_) + ")");
  Result result;
  const std::size_t base = static_cast<std::size_t>(vfn % sets_) * ways_;
  TlbEntry* match = nullptr;
  for (std::uint32_t w = 0; w < ways_; ++w) {
    auto& e = entries_[base + w];
    if (e.valid && e.vfn == vfn) {
      match = &e;
      break;
    }
  }
  if (match) {
    match->stamp = ++clock_;
    if (match->has_asid(asid)) {
      result.outcome = TlbOutcome::Hit;
      return result;
    }
    if (match->pfn == walk_pfn) {
      if (match->asids.size() >= cluster_) {
        match->asids.erase(match->asids.begin());
        result.asid_overflow = true;
      }
      match->asids.push_back(asid);
      result.outcome = TlbOutcome::Extended;
      return result;
    }
    // The cached mapping disagrees with the walk: replace it in place.
    result.evicted_shared = match->asids.size() > 1;
    match->pfn = walk_pfn;
    match->asids.assign(1, asid);
    result.outcome = TlbOutcome::MissFilled;
    return result;
  }
  TlbEntry* victim = &entries_[base];
  for (std::uint32_t w = 0; w < ways_; ++w) {
    auto& e = entries_[base + w];
    if (!e.valid) {
      victim = &e;
      break;
    }
    if (e.stamp < victim->stamp) victim = &e;
  }
  result.evicted_shared = victim->valid && victim->asids.size() > 1;
  victim->valid = true;
  victim->vfn = vfn;
  victim->pfn = walk_pfn;
  victim->asids.assign(1, asid);
  victim->stamp = ++clock_;
  result.outcome = TlbOutcome::MissFilled;
  return result;
}

namespace {

// Per-level instances: instance i serves cores [i*cluster, (i+1)*cluster).
struct LevelState {
  const TlbLevelConfig* cfg = nullptr;
  // [instance][structure]
  std::vector<std::vector<TlbArray>> arrays;
  // structure index per page class, -1 when absent
  int slot[2] = {-1, -1};

  LevelState(const TlbLevelConfig& level, std::uint32_t n_cores) : cfg(&level) {
    for (std::size_t s = 0; s < level.structures.size(); ++s)
      slot[static_cast<int>(level.structures[s].page_class)] = static_cast<int>(s);
    for (std::uint32_t first = 0; first < n_cores; first += level.share_cluster) {
      std::vector<TlbArray> row;
      for (const auto& s : level.structures) row.emplace_back(s, first, level.share_cluster);
      arrays.push_back(std::move(row));
    }
  }

  TlbArray* array_for(std::uint16_t core, PageClass cls) {
    int s = slot[static_cast<int>(cls)];
    if (s < 0) return nullptr;
    return &arrays[core / cfg->share_cluster][static_cast<std::size_t>(s)];
  }
};

void count(TlbLevelStats& st, const TlbArray::Result& r) {
  ++st.lookups;
  switch (r.outcome) {
    case TlbOutcome::Hit:
      ++st.hits;
      break;
    case TlbOutcome::Extended:
      ++st.asid_extension_hits;
      break;
    case TlbOutcome::MissFilled:
      ++st.misses;
      break;
  }
  if (r.evicted_shared) ++st.extension_churn;
  if (r.asid_overflow) ++st.asid_overflows;
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

TlbStats simulate_itlb(const MemoryTrace& trace, const TlbConfig& cfg, const PageTableSnapshot& page_table,
                       const TlbEventSink& sink) {
  check_tlb_config(cfg, trace.meta.n_cores);
  LevelState l1(cfg.l1, trace.meta.n_cores);
  std::optional<LevelState> l2;
  if (cfg.has_l2) l2.emplace(cfg.l2, trace.meta.n_cores);

  TlbStats stats;
  stats.l1.name = cfg.l1.name;
  stats.l2.name = cfg.has_l2 ? cfg.l2.name : "";
  stats.instructions = trace.records.size();
  const std::uint64_t page_size = trace.meta.page_size;

  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& rec = trace.records[i];
    if (rec.kind != AccessKind::IFetch) continue;
    PageClass cls;
    std::uint64_t vfn, pfn;
    if (auto huge = page_table.lookup_huge(rec.asid, rec.vaddr / kHugePageSize)) {
      cls = PageClass::Huge2M;
      vfn = rec.vaddr / kHugePageSize;
      pfn = *huge;
    } else if (auto small = page_table.lookup(rec.asid, rec.vaddr / page_size)) {
      cls = PageClass::Small4K;
      vfn = rec.vaddr / page_size;
      pfn = *small;
    } else {
      throw IntegrityError("simulate_itlb: unresolvable vfn " + hex(rec.vaddr / page_size) + " (asid " +
                           std::to_string(rec.asid) + ", record " + std::to_string(i) + ")");
    }

    bool walked = true;
    TlbLevelStats* walker = &stats.l1;
    if (TlbArray* a = l1.array_for(rec.core, cls)) {
      auto r = a->lookup_install(rec.core, rec.asid, vfn, pfn);
      count(stats.l1, r);
      if (sink) sink({i, 1, r.outcome}, rec);
      if (r.outcome == TlbOutcome::Hit) walked = false;
    }
    if (walked && l2) {
      if (TlbArray* a = l2->array_for(rec.core, cls)) {
        auto r = a->lookup_install(rec.core, rec.asid, vfn, pfn);
        count(stats.l2, r);
        if (sink) sink({i, 2, r.outcome}, rec);
        walker = &stats.l2;
        if (r.outcome == TlbOutcome::Hit) walked = false;
      }
    }
    if (walked) ++walker->walks;
  }

  auto mpki = [&](const TlbLevelStats& s) {
    return stats.instructions ? static_cast<double>(s.misses + s.asid_extension_hits) * 1000.0 /
                                    static_cast<double>(stats.instructions)
                              : 0.0;
  };
  stats.l1.mpki = mpki(stats.l1);
  stats.l2.mpki = mpki(stats.l2);
  stats.walks = stats.l1.walks + stats.l2.walks;
  stats.walk_penalty = static_cast<double>(stats.walks) * cfg.walk_cost;
  return stats;
}

std::string tlb_stats_csv(const TlbStats& stats) {
  std::ostringstream os;
  os << "level,lookups,hits,extended,misses,walks,mpki,extension_churn\n";
  char mpki[64];
  for (const auto* s : {&stats.l1, &stats.l2}) {
    if (s->name.empty()) continue;
    std::snprintf(mpki, sizeof mpki, "%.6f", s->mpki);
    os << s->name << ',' << s->lookups << ',' << s->hits << ',' << s->asid_extension_hits << ',' << s->misses << ','
       << s->walks << ',' << mpki << ',' << s->extension_churn << '\n';
  }
  return os.str();
}

}  // namespace memscope
