#include "memscope/cache.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

#include "memscope/error.hpp"
#include "memscope/parallel.hpp"

namespace memscope {

namespace {

constexpr std::uint8_t kValid = 1;
constexpr std::uint8_t kDataClass = 2;
constexpr std::uint8_t kPrefetched = 4;

}  // namespace

std::string_view to_string(AccessClass cls) { return cls == AccessClass::Code ? "CODE" : "DATA"; }

std::string_view to_string(ServedClasses classes) {
  switch (classes) {
    case ServedClasses::Code:
      return "CODE";
    case ServedClasses::Data:
      return "DATA";
    case ServedClasses::Unified:
      return "UNIFIED";
  }
  return "?";
}

bool serves(ServedClasses classes, AccessClass cls) {
  return classes == ServedClasses::Unified || (classes == ServedClasses::Code) == (cls == AccessClass::Code);
}

void check_level(const CacheLevelConfig& level, std::uint32_t n_cores) {
  auto fail = [&](const std::string& what) { throw ConfigError("cache level '" + level.name + "': " + what); };
  if (level.ways == 0 || level.line_size == 0 || level.size_bytes == 0) fail("size, ways and line size must be > 0");
  if (level.size_bytes % (static_cast<std::uint64_t>(level.ways) * level.line_size) != 0)
    fail("size must be divisible by ways * line_size");
  if (level.share_cluster == 0 || n_cores % level.share_cluster != 0)
    fail("share_cluster " + std::to_string(level.share_cluster) + " does not divide n_cores " +
         std::to_string(n_cores));
  if (level.code_ways.has_value() != level.data_ways.has_value())
    fail("code_ways and data_ways must be set together");
  if (level.code_ways && (*level.code_ways == 0 || *level.data_ways == 0))
    fail("partition smaller than one way");
}

double CacheStats::mpki(std::size_t level, AccessClass cls) const {
  if (instructions == 0) return 0.0;
  return static_cast<double>(levels.at(level)[cls].misses) * 1000.0 / static_cast<double>(instructions);
}

const LevelStats& CacheStats::level(std::string_view name) const {
  for (const auto& l : levels)
    if (l.name == name) return l;
  throw ConfigError("no cache level named '" + std::string(name) + "'");
}

double CacheStats::code_mpki_ratio(std::string_view upper, std::string_view lower) const {
  auto up = static_cast<double>(level(upper)[AccessClass::Code].misses);
  auto low = static_cast<double>(level(lower)[AccessClass::Code].misses);
  if (low == 0.0) throw UndefinedValueError("code MPKI ratio: lower level has no code misses");
  return up / low;
}

SetAssocCache::SetAssocCache(std::uint64_t sets, std::uint32_t ways)
    : sets_(sets), ways_(ways), tag_(sets * ways), stamp_(sets * ways), flags_(sets * ways) {}

std::int64_t SetAssocCache::find(std::uint64_t line) const {
  const std::uint64_t base = (line % sets_) * ways_;
  for (std::uint32_t w = 0; w < ways_; ++w)
    if ((flags_[base + w] & kValid) && tag_[base + w] == line) return static_cast<std::int64_t>(base + w);
  return -1;
}

SetAssocCache::Lookup SetAssocCache::access(std::uint64_t line) {
  auto slot = find(line);
  if (slot < 0) return {};
  stamp_[slot] = ++clock_;
  Lookup r{true, (flags_[slot] & kPrefetched) != 0};
  flags_[slot] &= static_cast<std::uint8_t>(~kPrefetched);
  return r;
}

bool SetAssocCache::contains(std::uint64_t line) const { return find(line) >= 0; }

bool SetAssocCache::is_prefetched(std::uint64_t line) const {
  auto slot = find(line);
  return slot >= 0 && (flags_[slot] & kPrefetched);
}

Victim SetAssocCache::fill(std::uint64_t line, AccessClass cls, bool prefetched) {
  const std::uint64_t base = (line % sets_) * ways_;
  std::uint64_t slot = base;
  std::uint64_t oldest = std::numeric_limits<std::uint64_t>::max();
  for (std::uint32_t w = 0; w < ways_; ++w) {
    if (!(flags_[base + w] & kValid)) {
      slot = base + w;
      oldest = 0;
      break;
    }
    if (stamp_[base + w] < oldest) {
      oldest = stamp_[base + w];
      slot = base + w;
    }
  }
  Victim victim;
  if (flags_[slot] & kValid) {
    victim.valid = true;
    victim.line = tag_[slot];
    victim.cls = (flags_[slot] & kDataClass) ? AccessClass::Data : AccessClass::Code;
    victim.prefetched = (flags_[slot] & kPrefetched) != 0;
  }
  tag_[slot] = line;
  stamp_[slot] = ++clock_;
  flags_[slot] = static_cast<std::uint8_t>(kValid | (cls == AccessClass::Data ? kDataClass : 0) |
                                           (prefetched ? kPrefetched : 0));
  return victim;
}

std::uint64_t SetAssocCache::count_prefetched() const {
  std::uint64_t n = 0;
  for (auto f : flags_)
    if ((f & kValid) && (f & kPrefetched)) ++n;
  return n;
}

CacheHierarchy::CacheHierarchy(std::vector<CacheLevelConfig> levels, std::uint32_t n_cores, std::uint32_t line_size)
    : configs_(std::move(levels)), hooks_(configs_.size(), nullptr), line_size_(line_size) {
  stats_.levels.resize(configs_.size());
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    const auto& cfg = configs_[i];
    check_level(cfg, n_cores);
    if (cfg.line_size != line_size)
      throw ConfigError("cache level '" + cfg.name + "': line size " + std::to_string(cfg.line_size) +
                        " differs from trace line size " + std::to_string(line_size));
    stats_.levels[i].name = cfg.name;
    std::vector<Instance> insts;
    const std::uint32_t n_inst = n_cores / cfg.share_cluster;
    for (std::uint32_t k = 0; k < n_inst; ++k) {
      if (cfg.code_ways)
        insts.push_back({SetAssocCache(cfg.sets(), *cfg.code_ways), SetAssocCache(cfg.sets(), *cfg.data_ways)});
      else
        insts.push_back({SetAssocCache(cfg.sets(), cfg.ways), std::nullopt});
    }
    instances_.push_back(std::move(insts));
    for (auto cls : {AccessClass::Code, AccessClass::Data})
      if (serves(cfg.classes, cls)) paths_[static_cast<int>(cls)].push_back(i);
  }
}

void CacheHierarchy::set_level_hook(std::size_t level, LevelHook* hook) { hooks_.at(level) = hook; }

SetAssocCache& CacheHierarchy::array(std::size_t level, std::size_t instance, AccessClass cls) {
  auto& inst = instances_[level][instance];
  if (inst.data && cls == AccessClass::Data) return *inst.data;
  return inst.main;
}

bool CacheHierarchy::contains(std::size_t level, std::size_t instance, std::uint64_t line) const {
  const auto& inst = instances_[level][instance];
  return inst.main.contains(line) || (inst.data && inst.data->contains(line));
}

Victim CacheHierarchy::install(std::size_t level, std::size_t instance, std::uint64_t line, AccessClass cls,
                               bool prefetched) {
  Victim v = array(level, instance, cls).fill(line, cls, prefetched);
  if (v.valid) {
    ++stats_.levels[level][v.cls].evictions;
    if (observer_) observer_->on_evict(level, v);
  }
  return v;
}

std::uint64_t CacheHierarchy::count_prefetched(std::size_t level) const {
  std::uint64_t n = 0;
  for (const auto& inst : instances_[level]) {
    n += inst.main.count_prefetched();
    if (inst.data) n += inst.data->count_prefetched();
  }
  return n;
}

std::size_t CacheHierarchy::access(std::size_t index, const TraceRecord& rec) {
  const AccessClass cls = class_of(rec.kind);
  const std::uint64_t line = rec.index_addr() / line_size_;
  const auto& p = paths_[static_cast<int>(cls)];
  ++stats_.instructions;

  // Paths are at most a handful of levels deep.
  std::array<SetAssocCache::Lookup, 8> results{};
  std::size_t hit_pos = p.size();
  for (std::size_t pos = 0; pos < p.size(); ++pos) {
    const std::size_t level = p[pos];
    auto& inst = instances_[level][instance_of(level, rec.core)];
    auto r = inst.main.access(line);
    if (!r.hit && inst.data) r = inst.data->access(line);
    if (pos < results.size()) results[pos] = r;
    auto& counters = stats_.levels[level][cls];
    ++counters.accesses;
    if (r.hit)
      ++counters.hits;
    else
      ++counters.misses;
    if (observer_) observer_->on_lookup(index, level, rec.core, line, r.hit);
    if (r.hit) {
      hit_pos = pos;
      break;
    }
  }
  if (hit_pos == p.size()) {
    ++stats_.memory_lines;
    if (observer_) observer_->on_memory(index, rec, line);
  }
  for (std::size_t pos = 0; pos < hit_pos; ++pos) {
    const std::size_t level = p[pos];
    const std::size_t inst = instance_of(level, rec.core);
    if (!contains(level, inst, line)) install(level, inst, line, cls, false);
  }
  for (std::size_t pos = 0; pos <= std::min(hit_pos, p.size() - 1) && pos < results.size(); ++pos) {
    const std::size_t level = p[pos];
    if (hooks_[level]) hooks_[level]->on_demand(*this, level, instance_of(level, rec.core), rec, line, results[pos]);
  }
  return hit_pos;
}

void check_routing(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels) {
  bool need[2] = {false, false};
  for (const auto& r : trace.records) need[static_cast<int>(class_of(r.kind))] = true;
  for (auto cls : {AccessClass::Code, AccessClass::Data}) {
    if (!need[static_cast<int>(cls)]) continue;
    bool any = std::any_of(levels.begin(), levels.end(), [&](const auto& l) { return serves(l.classes, cls); });
    if (!any)
      throw ConfigError(std::string(to_string(cls)) + " accesses are routed to a hierarchy with no level serving them");
  }
}

CacheStats simulate_hierarchy(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                              ReplacementPolicy /*policy*/, HierarchyObserver* observer) {
  if (levels.empty()) throw ConfigError("cache hierarchy has no levels");
  if (trace.empty()) throw PreconditionError("simulate_hierarchy: empty trace");
  check_routing(trace, levels);
  CacheHierarchy h(levels, trace.meta.n_cores, trace.meta.line_size);
  h.set_observer(observer);
  for (std::size_t i = 0; i < trace.records.size(); ++i) h.access(i, trace.records[i]);
  return h.stats();
}

CacheLevelConfig partitioned(const CacheLevelConfig& level, std::uint64_t code_bytes, std::uint64_t data_bytes) {
  const std::uint64_t way_bytes = level.sets() * level.line_size;
  if (way_bytes == 0) throw ConfigError("cache level '" + level.name + "': no sets");
  if (code_bytes < way_bytes || data_bytes < way_bytes)
    throw ConfigError("cache level '" + level.name + "': partition smaller than one way (" +
                      std::to_string(way_bytes) + " bytes)");
  CacheLevelConfig out = level;
  out.code_ways = static_cast<std::uint32_t>(code_bytes / way_bytes);
  out.data_ways = static_cast<std::uint32_t>(data_bytes / way_bytes);
  return out;
}

std::vector<SweepPoint> l2_sweep(const MemoryTrace& trace, const std::vector<CacheLevelConfig>& levels,
                                 const std::vector<std::uint64_t>& code_partition_sizes, std::string_view level_name,
                                 std::uint64_t data_partition_bytes, unsigned jobs) {
  if (!std::is_sorted(code_partition_sizes.begin(), code_partition_sizes.end()))
    throw PreconditionError("l2_sweep: partition sizes must be ascending");
  auto it = std::find_if(levels.begin(), levels.end(), [&](const auto& l) { return l.name == level_name; });
  if (it == levels.end()) throw ConfigError("l2_sweep: no level named '" + std::string(level_name) + "'");
  const std::size_t idx = static_cast<std::size_t>(it - levels.begin());
  const std::uint64_t data_bytes = data_partition_bytes ? data_partition_bytes : it->size_bytes / 2;

  std::vector<SweepPoint> points(code_partition_sizes.size());
  std::vector<std::vector<CacheLevelConfig>> configs;
  for (std::size_t i = 0; i < code_partition_sizes.size(); ++i) {
    auto cfg = levels;
    cfg[idx] = partitioned(*it, code_partition_sizes[i], data_bytes);
    points[i].requested_code_bytes = code_partition_sizes[i];
    points[i].code_ways = *cfg[idx].code_ways;
    points[i].data_ways = *cfg[idx].data_ways;
    points[i].code_bytes = static_cast<std::uint64_t>(points[i].code_ways) * it->sets() * it->line_size;
    configs.push_back(std::move(cfg));
  }
  auto run = [&](std::size_t i) { points[i].stats = simulate_hierarchy(trace, configs[i]); };
  parallel_for(points.size(), jobs, run);
  return points;
}

std::vector<CacheLevelConfig> gen4_hierarchy(std::uint32_t n_cores, std::uint32_t l2_cluster) {
  std::vector<CacheLevelConfig> levels;
  levels.push_back({"L1I", 32ull << 10, 8, 64, 1, ServedClasses::Code, {}, {}});
  levels.push_back({"L1D", 32ull << 10, 8, 64, 1, ServedClasses::Data, {}, {}});
  levels.push_back({"L2", (1ull << 20) * l2_cluster, 16, 64, l2_cluster, ServedClasses::Unified, {}, {}});
  levels.push_back({"L3", (1441792ull) * n_cores, 11, 64, n_cores, ServedClasses::Unified, {}, {}});
  return levels;
}

std::string stats_csv(const CacheStats& stats) {
  std::ostringstream os;
  os << "level,class,accesses,hits,misses,evictions,mpki\n";
  char mpki[64];
  for (std::size_t i = 0; i < stats.levels.size(); ++i) {
    for (auto cls : {AccessClass::Code, AccessClass::Data}) {
      const auto& c = stats.levels[i][cls];
      if (c.accesses == 0 && c.evictions == 0) continue;
      std::snprintf(mpki, sizeof mpki, "%.6f", stats.mpki(i, cls));
      os << stats.levels[i].name << ',' << to_string(cls) << ',' << c.accesses << ',' << c.hits << ',' << c.misses
         << ',' << c.evictions << ',' << mpki << '\n';
    }
  }
  return os.str();
}

std::string level_config_string(const std::vector<CacheLevelConfig>& levels) {
  std::ostringstream os;
  for (const auto& l : levels) {
    os << l.name << ':' << l.size_bytes << ':' << l.ways << ':' << l.line_size << ':' << l.share_cluster << ':'
       << to_string(l.classes);
    if (l.code_ways) os << ":cw" << *l.code_ways << ":dw" << *l.data_ways;
    os << ';';
  }
  return os.str();
}

std::string config_hash(std::string_view canonical) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace memscope
