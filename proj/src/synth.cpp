#include "memscope/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "memscope/error.hpp"

namespace memscope {

namespace {

constexpr std::uint64_t kPagesPerHuge = kHugePageSize / 4096;

std::uint64_t round_up(std::uint64_t v, std::uint64_t m) { return (v + m - 1) / m * m; }

std::vector<std::uint32_t> shuffled(std::uint64_t n, std::mt19937_64& rng) {
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::uint64_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
  return perm;
}

// Sequential-run state of one (core, class) stream. Positions are page
// indices inside one address region.
struct Cursor {
  std::uint64_t remaining = 0;
  int region = -1;
  std::uint64_t page = 0;
  std::uint64_t line = 0;
};

std::uint64_t burst_length(std::mt19937_64& rng, double mean) {
  if (mean <= 1.0) return 1;
  double p = 1.0 / mean;
  double u = uniform01(rng);
  return static_cast<std::uint64_t>(std::ceil(std::log1p(-u) / std::log1p(-p))) + (u == 0.0);
}

}  // namespace

ZipfSampler::ZipfSampler(std::uint64_t n, double s) {
  if (n == 0) throw PreconditionError("zipf: empty rank table");
  cdf_.resize(n);
  double acc = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    acc += std::pow(static_cast<double>(k + 1), -s);
    cdf_[k] = acc;
  }
  for (auto& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

std::uint64_t ZipfSampler::operator()(double u) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::uint64_t>(it - cdf_.begin());
}

double ZipfSampler::pmf(std::uint64_t rank) const {
  return rank == 0 ? cdf_[0] : cdf_[rank] - cdf_[rank - 1];
}

void check_spec(const SynthSpec& spec) {
  auto fail = [](const std::string& what) { throw PreconditionError("synth spec: " + what); };
  if (spec.n_cores == 0 || spec.n_cores > 65535) fail("n_cores must be in [1, 65535]");
  if (!std::has_single_bit(spec.page_size) || !std::has_single_bit(spec.line_size) ||
      spec.page_size % spec.line_size != 0)
    fail("page_size and line_size must be powers of two with line dividing page");
  if (spec.page_size != 4096) fail("generator lays out 4 KiB pages only");
  if (spec.code_footprint_bytes < spec.page_size) fail("code footprint smaller than one page");
  if (spec.data_footprint_bytes < spec.page_size) fail("data footprint smaller than one page");
  if (spec.code_footprint_bytes / spec.page_size > kMaxFootprintPages ||
      spec.data_footprint_bytes / spec.page_size > kMaxFootprintPages)
    fail("footprint exceeds 2^24 pages");
  auto frac = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!frac(spec.code_share)) fail("code_share outside [0,1]");
  if (!frac(spec.ifetch_fraction)) fail("ifetch_fraction outside [0,1]");
  if (!frac(spec.burst_prob)) fail("burst_prob outside [0,1]");
  if (!(spec.read_write_ratio > 0.0)) fail("read_write_ratio must be > 0");
  if (spec.code_zipf_s < 0.0 || spec.data_zipf_s < 0.0) fail("zipf exponents must be >= 0");
  if (spec.burst_mean_lines < 1.0) fail("burst_mean_lines must be >= 1");
}

SynthOutput generate(const SynthSpec& spec) {
  check_spec(spec);
  const std::uint32_t cores = spec.n_cores;
  const std::uint64_t code_pages = spec.code_footprint_bytes / spec.page_size;
  const std::uint64_t data_pages = spec.data_footprint_bytes / spec.page_size;
  const std::uint64_t code_stride = round_up(code_pages, kPagesPerHuge);
  const std::uint64_t data_stride = round_up(data_pages, kPagesPerHuge);
  const std::uint64_t lines_per_page = spec.page_size / spec.line_size;

  std::mt19937_64 layout_rng(spec.layout_seed.value_or(spec.rng_seed));
  std::mt19937_64 rng(spec.rng_seed ^ 0x5bd1e9955bd1e995ull);

  ZipfSampler code_zipf(code_pages, spec.code_zipf_s);
  ZipfSampler data_zipf(data_pages, spec.data_zipf_s);
  auto shared_rank = shuffled(code_pages, layout_rng);
  std::vector<std::vector<std::uint32_t>> private_rank, data_rank;
  if (spec.code_share < 1.0)
    for (std::uint32_t c = 0; c < cores; ++c) private_rank.push_back(shuffled(code_pages, layout_rng));
  for (std::uint32_t c = 0; c < cores; ++c) data_rank.push_back(shuffled(data_pages, layout_rng));

  // Region -1 is the shared code region, region c >= 0 the disjoint private
  // code region of core c.
  auto code_vfn = [&](int region, std::uint64_t page) {
    return layout::kCodeVfnBase + static_cast<std::uint64_t>(region + 1) * code_stride + page;
  };
  auto code_pfn = [&](int region, std::uint64_t page) {
    return layout::kCodePfnBase + static_cast<std::uint64_t>(region + 1) * code_stride + page;
  };
  auto data_vfn = [&](std::uint32_t core, std::uint64_t page) { return layout::kDataVfnBase + core * data_stride + page; };
  auto data_pfn = [&](std::uint32_t core, std::uint64_t page) { return layout::kDataPfnBase + core * data_stride + page; };
  auto asid_of = [&](std::uint32_t core) { return spec.mode == SharingMode::MultiProcess ? core : 0u; };

  SynthOutput out;
  auto& trace = out.trace;
  trace.meta.page_size = spec.page_size;
  trace.meta.line_size = spec.line_size;
  trace.meta.n_cores = cores;
  trace.meta.has_physical = spec.emit_physical;
  trace.meta.origin = TraceOrigin::Synthetic;
  trace.records.reserve(spec.n_events);

  out.page_table = PageTableSnapshot(spec.n_events ? spec.n_events - 1 : 0, spec.page_size);
  std::unordered_set<std::uint64_t> mapped;  // (asid, vfn) already in the table
  auto note_mapping = [&](std::uint32_t asid, std::uint64_t vfn, std::uint64_t pfn, bool code) {
    std::uint64_t key = (static_cast<std::uint64_t>(asid) << 44) ^ vfn;
    if (!mapped.insert(key).second) return;
    if (code && spec.code_huge_pages) {
      out.page_table.map_huge(asid, vfn / kPagesPerHuge, pfn / kPagesPerHuge);
    } else {
      out.page_table.map(asid, vfn, pfn);
    }
  };

  std::vector<Cursor> code_cursor(cores), data_cursor(cores);
  std::vector<std::uint32_t> order(cores);
  std::iota(order.begin(), order.end(), 0u);
  const double load_prob = spec.read_write_ratio / (spec.read_write_ratio + 1.0);

  for (std::uint64_t i = 0; i < spec.n_events; ++i) {
    // Round-robin over cores with the order reshuffled every round.
    if (i % cores == 0)
      for (std::uint32_t k = cores; k > 1; --k) std::swap(order[k - 1], order[uniform_below(rng, k)]);
    const std::uint32_t core = order[i % cores];

    TraceRecord rec;
    rec.seq = i;
    rec.core = static_cast<std::uint16_t>(core);
    rec.asid = asid_of(core);
    if (uniform01(rng) < spec.ifetch_fraction)
      rec.kind = AccessKind::IFetch;
    else
      rec.kind = uniform01(rng) < load_prob ? AccessKind::Load : AccessKind::Store;

    const bool code = rec.kind == AccessKind::IFetch;
    Cursor& cur = code ? code_cursor[core] : data_cursor[core];
    const std::uint64_t region_pages = code ? code_pages : data_pages;
    if (cur.remaining > 0) {
      --cur.remaining;
      if (++cur.line == lines_per_page) {
        cur.line = 0;
        cur.page = (cur.page + 1) % region_pages;
      }
    } else {
      if (code) {
        if (uniform01(rng) < spec.code_share) {
          cur.region = -1;
          cur.page = shared_rank[code_zipf(uniform01(rng))];
        } else {
          cur.region = spec.disjoint_private_code ? static_cast<int>(core) : -1;
          cur.page = private_rank[core][code_zipf(uniform01(rng))];
        }
      } else {
        cur.page = data_rank[core][data_zipf(uniform01(rng))];
      }
      cur.line = uniform_below(rng, lines_per_page);
      if (spec.burst_prob > 0.0 && uniform01(rng) < spec.burst_prob)
        cur.remaining = burst_length(rng, spec.burst_mean_lines) - 1;
    }

    std::uint64_t vfn, pfn;
    if (code) {
      vfn = code_vfn(cur.region, cur.page);
      pfn = code_pfn(cur.region, cur.page);
    } else {
      vfn = data_vfn(core, cur.page);
      pfn = data_pfn(core, cur.page);
    }
    rec.size = code ? 16 : 8;
    const std::uint64_t slots = spec.line_size / rec.size;
    const std::uint64_t offset = cur.line * spec.line_size + uniform_below(rng, slots) * rec.size;
    rec.vaddr = vfn * spec.page_size + offset;
    if (spec.emit_physical) rec.paddr = pfn * spec.page_size + offset;
    note_mapping(rec.asid, vfn, pfn, code);
    trace.records.push_back(rec);
  }
  return out;
}

}  // namespace memscope
