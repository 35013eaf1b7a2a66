#include "memscope/trace.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "memscope/error.hpp"

namespace memscope {

namespace {

constexpr std::string_view kMagic = "#memtrace";
constexpr std::size_t kBinaryRecordSize = 34;
constexpr std::uint64_t kAbsentPaddr = ~0ull;

std::string where(std::string_view name, std::size_t line) {
  std::ostringstream os;
  os << name << ":" << line;
  return os.str();
}

template <typename T>
bool parse_uint(std::string_view text, T& out, int base = 10) {
  if (base == 16 && text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
    text.remove_prefix(2);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out, base);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Consecutive records may share a seq only when they are pieces of one
// line-split access.
bool continues_split(const TraceRecord& prev, const TraceRecord& next, std::uint32_t line_size) {
  return prev.core == next.core && prev.asid == next.asid && prev.kind == next.kind &&
         next.vaddr == prev.vaddr + prev.size && next.vaddr % line_size == 0;
}

class RecordSink {
 public:
  RecordSink(MemoryTrace& trace, std::string_view name) : trace_(trace), name_(name) {}

  void add(const TraceRecord& raw, const std::string& loc) {
    const auto& meta = trace_.meta;
    if (raw.core >= meta.n_cores)
      throw IntegrityError(loc + ": record core " + std::to_string(raw.core) + " >= n_cores " +
                           std::to_string(meta.n_cores));
    if (raw.paddr && !meta.has_physical)
      throw IntegrityError(loc + ": record carries paddr but header has phys=0");
    if (!trace_.records.empty()) {
      const auto& prev = trace_.records.back();
      bool ok = raw.seq > prev.seq || (raw.seq == prev.seq && continues_split(prev, raw, meta.line_size));
      if (!ok)
        throw IntegrityError(loc + ": seq " + std::to_string(raw.seq) + " does not increase (previous " +
                             std::to_string(prev.seq) + ")");
    }
    for (auto& piece : split_on_lines(raw, meta.line_size)) trace_.records.push_back(piece);
  }

 private:
  MemoryTrace& trace_;
  std::string_view name_;
};

void put_le(std::string& buf, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void check_meta(const TraceMeta& meta, std::string_view where) {
  if (!std::has_single_bit(meta.page_size) || !std::has_single_bit(meta.line_size))
    throw FormatError(std::string(where) + ": page and line sizes must be powers of two");
  if (meta.line_size > meta.page_size)
    throw FormatError(std::string(where) + ": line size must divide page size");
  if (meta.n_cores == 0) throw FormatError(std::string(where) + ": cores must be >= 1");
}

MemoryTrace read_text(std::istream& in, std::string_view name, std::string header) {
  MemoryTrace trace;
  trace.meta = parse_header(header);
  check_meta(trace.meta, name);
  RecordSink sink(trace, name);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto row = trim(line);
    if (row.empty() || row.front() == '#') continue;
    auto cols = split(row, ',');
    if (cols.size() != 7)
      throw FormatError(where(name, lineno) + ": expected 7 columns, got " + std::to_string(cols.size()));
    TraceRecord rec;
    unsigned size = 0;
    bool ok = parse_uint(trim(cols[0]), rec.seq) && parse_uint(trim(cols[1]), rec.core) &&
              parse_uint(trim(cols[2]), rec.asid) && parse_uint(trim(cols[4]), rec.vaddr, 16) &&
              parse_uint(trim(cols[6]), size);
    auto kind = parse_access_kind(trim(cols[3]));
    if (!ok || !kind || size == 0 || size > 255)
      throw FormatError(where(name, lineno) + ": malformed record '" + std::string(row) + "'");
    rec.kind = *kind;
    rec.size = static_cast<std::uint8_t>(size);
    auto paddr = trim(cols[5]);
    if (paddr != "-") {
      std::uint64_t pa = 0;
      if (!parse_uint(paddr, pa, 16))
        throw FormatError(where(name, lineno) + ": malformed paddr '" + std::string(paddr) + "'");
      rec.paddr = pa;
    }
    sink.add(rec, where(name, lineno));
  }
  return trace;
}

MemoryTrace read_binary(std::istream& in, std::string_view name) {
  unsigned char lenbuf[4];
  if (!in.read(reinterpret_cast<char*>(lenbuf), 4))
    throw FormatError(std::string(name) + ": truncated header length");
  auto len = get_le(lenbuf, 4);
  if (len > 4096) throw FormatError(std::string(name) + ": bad magic");
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len)))
    throw FormatError(std::string(name) + ": truncated header");
  MemoryTrace trace;
  trace.meta = parse_header(header);
  check_meta(trace.meta, name);
  RecordSink sink(trace, name);
  std::array<unsigned char, kBinaryRecordSize> buf{};
  std::uint64_t offset = 4 + len;
  while (true) {
    in.read(reinterpret_cast<char*>(buf.data()), kBinaryRecordSize);
    auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    std::string loc = std::string(name) + "@" + std::to_string(offset);
    if (got != kBinaryRecordSize) throw FormatError(loc + ": truncated record");
    const unsigned char* p = buf.data();
    TraceRecord rec;
    rec.seq = get_le(p, 8);
    rec.core = static_cast<std::uint16_t>(get_le(p + 8, 2));
    rec.asid = static_cast<std::uint32_t>(get_le(p + 10, 4));
    auto kind = p[14];
    if (kind > 2) throw FormatError(loc + ": bad access kind " + std::to_string(kind));
    rec.kind = static_cast<AccessKind>(kind);
    rec.vaddr = get_le(p + 15, 8);
    auto pa = get_le(p + 23, 8);
    if (pa != kAbsentPaddr) rec.paddr = pa;
    rec.size = p[31];
    if (rec.size == 0) throw FormatError(loc + ": zero-size access");
    sink.add(rec, loc);
    offset += kBinaryRecordSize;
  }
  return trace;
}

}  // namespace

std::string_view to_string(AccessKind kind) {
  switch (kind) {
    case AccessKind::IFetch:
      return "IFETCH";
    case AccessKind::Load:
      return "LOAD";
    case AccessKind::Store:
      return "STORE";
  }
  return "?";
}

std::optional<AccessKind> parse_access_kind(std::string_view text) {
  if (text == "IFETCH" || text == "I") return AccessKind::IFetch;
  if (text == "LOAD" || text == "L") return AccessKind::Load;
  if (text == "STORE" || text == "S") return AccessKind::Store;
  return std::nullopt;
}

char origin_code(TraceOrigin origin) {
  switch (origin) {
    case TraceOrigin::Synthetic:
      return 'S';
    case TraceOrigin::Recorded:
      return 'R';
    case TraceOrigin::Stitched:
      return 'T';
  }
  return '?';
}

void PageTableSnapshot::map(std::uint32_t asid, std::uint64_t vfn, std::uint64_t pfn) {
  small_[{asid, vfn}] = pfn;
}

void PageTableSnapshot::map_huge(std::uint32_t asid, std::uint64_t huge_vfn, std::uint64_t huge_pfn) {
  huge_[{asid, huge_vfn}] = huge_pfn;
}

void PageTableSnapshot::unmap(std::uint32_t asid, std::uint64_t vfn) { small_.erase({asid, vfn}); }

std::optional<std::uint64_t> PageTableSnapshot::lookup(std::uint32_t asid, std::uint64_t vfn) const {
  auto it = small_.find({asid, vfn});
  if (it == small_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint64_t> PageTableSnapshot::lookup_huge(std::uint32_t asid, std::uint64_t huge_vfn) const {
  auto it = huge_.find({asid, huge_vfn});
  if (it == huge_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint64_t> PageTableSnapshot::translate(std::uint32_t asid, std::uint64_t vaddr) const {
  if (!huge_.empty()) {
    if (auto hp = lookup_huge(asid, vaddr / kHugePageSize)) return *hp * kHugePageSize + vaddr % kHugePageSize;
  }
  if (auto pfn = lookup(asid, vaddr / page_size_)) return *pfn * page_size_ + vaddr % page_size_;
  return std::nullopt;
}

PageTableSnapshot PageTableSnapshot::from_trace(const MemoryTrace& trace) {
  PageTableSnapshot table(trace.empty() ? 0 : trace.records.back().seq, trace.meta.page_size);
  for (const auto& r : trace.records) {
    if (!r.paddr) continue;
    table.map(r.asid, r.vaddr / trace.meta.page_size, *r.paddr / trace.meta.page_size);
  }
  return table;
}

std::vector<std::array<std::uint64_t, 3>> PageTableSnapshot::small_entries() const {
  std::vector<std::array<std::uint64_t, 3>> out;
  out.reserve(small_.size());
  for (const auto& [k, pfn] : small_) out.push_back({k.asid, k.vfn, pfn});
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::array<std::uint64_t, 3>> PageTableSnapshot::huge_entries() const {
  std::vector<std::array<std::uint64_t, 3>> out;
  out.reserve(huge_.size());
  for (const auto& [k, pfn] : huge_) out.push_back({k.asid, k.vfn, pfn});
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<TraceRecord> split_on_lines(const TraceRecord& rec, std::uint32_t line_size) {
  std::vector<TraceRecord> out;
  std::uint64_t addr = rec.vaddr;
  std::uint64_t remaining = rec.size;
  while (remaining > 0) {
    std::uint64_t line_end = (addr / line_size + 1) * line_size;
    std::uint64_t len = std::min<std::uint64_t>(remaining, line_end - addr);
    TraceRecord piece = rec;
    piece.vaddr = addr;
    piece.size = static_cast<std::uint8_t>(len);
    if (rec.paddr) piece.paddr = *rec.paddr + (addr - rec.vaddr);
    out.push_back(piece);
    addr += len;
    remaining -= len;
  }
  return out;
}

void check_trace(const MemoryTrace& trace) {
  const auto& meta = trace.meta;
  if (!std::has_single_bit(meta.page_size) || !std::has_single_bit(meta.line_size) ||
      meta.page_size % meta.line_size != 0)
    throw IntegrityError("trace geometry: page and line sizes must be powers of two, line dividing page");
  const TraceRecord* prev = nullptr;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    auto at = "record " + std::to_string(i) + ": ";
    if (r.size == 0) throw IntegrityError(at + "zero-size access");
    if (r.vaddr / meta.line_size != (r.vaddr + r.size - 1) / meta.line_size)
      throw IntegrityError(at + "access crosses a cacheline");
    if (r.core >= meta.n_cores) throw IntegrityError(at + "core out of range");
    if (r.paddr && !meta.has_physical) throw IntegrityError(at + "paddr present but has_physical is false");
    if (prev && !(r.seq > prev->seq || (r.seq == prev->seq && continues_split(*prev, r, meta.line_size))))
      throw IntegrityError(at + "seq does not increase");
    prev = &r;
  }
}

std::string format_header(const TraceMeta& meta) {
  std::ostringstream os;
  os << kMagic << " v" << meta.version << " page=" << meta.page_size << " line=" << meta.line_size
     << " cores=" << meta.n_cores << " phys=" << (meta.has_physical ? 1 : 0)
     << " origin=" << origin_code(meta.origin);
  return os.str();
}

TraceMeta parse_header(std::string_view line) {
  line = trim(line);
  auto tokens = split(line, ' ');
  if (tokens.empty() || tokens[0] != kMagic) throw FormatError("bad magic: expected '#memtrace' header");
  if (tokens.size() < 2 || tokens[1] != "v1")
    throw FormatError("unsupported trace version '" + std::string(tokens.size() > 1 ? tokens[1] : "") + "'");
  TraceMeta meta;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    auto tok = tokens[i];
    if (tok.empty()) continue;
    auto eq = tok.find('=');
    if (eq == std::string_view::npos) throw FormatError("bad header token '" + std::string(tok) + "'");
    auto key = tok.substr(0, eq);
    auto val = tok.substr(eq + 1);
    bool ok = true;
    if (key == "page") {
      ok = parse_uint(val, meta.page_size);
    } else if (key == "line") {
      ok = parse_uint(val, meta.line_size);
    } else if (key == "cores") {
      ok = parse_uint(val, meta.n_cores);
    } else if (key == "phys") {
      ok = val == "0" || val == "1";
      meta.has_physical = val == "1";
    } else if (key == "origin") {
      if (val == "S")
        meta.origin = TraceOrigin::Synthetic;
      else if (val == "R")
        meta.origin = TraceOrigin::Recorded;
      else if (val == "T")
        meta.origin = TraceOrigin::Stitched;
      else
        ok = false;
    }
    if (!ok) throw FormatError("bad header value '" + std::string(tok) + "'");
  }
  return meta;
}

MemoryTrace read_trace(std::istream& in, std::string_view name) {
  char first = 0;
  if (!in.get(first)) throw FormatError(std::string(name) + ": empty file, missing header");
  in.unget();
  if (first == '#') {
    std::string header;
    std::getline(in, header);
    return read_text(in, name, header);
  }
  return read_binary(in, name);
}

MemoryTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace '" + path.string() + "'");
  return read_trace(in, path.string());
}

void write_trace(const MemoryTrace& trace, std::ostream& out, TraceFormat format) {
  check_trace(trace);
  auto header = format_header(trace.meta);
  if (format == TraceFormat::Text) {
    out << header << '\n';
    char buf[160];
    for (const auto& r : trace.records) {
      int n;
      if (r.paddr)
        n = std::snprintf(buf, sizeof buf, "%llu,%u,%u,%s,0x%llx,0x%llx,%u\n",
                          static_cast<unsigned long long>(r.seq), r.core, r.asid, to_string(r.kind).data(),
                          static_cast<unsigned long long>(r.vaddr), static_cast<unsigned long long>(*r.paddr),
                          r.size);
      else
        n = std::snprintf(buf, sizeof buf, "%llu,%u,%u,%s,0x%llx,-,%u\n", static_cast<unsigned long long>(r.seq),
                          r.core, r.asid, to_string(r.kind).data(), static_cast<unsigned long long>(r.vaddr),
                          r.size);
      out.write(buf, n);
    }
  } else {
    std::string buf;
    put_le(buf, header.size(), 4);
    buf += header;
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    buf.clear();
    buf.reserve(kBinaryRecordSize * 4096);
    for (const auto& r : trace.records) {
      put_le(buf, r.seq, 8);
      put_le(buf, r.core, 2);
      put_le(buf, r.asid, 4);
      put_le(buf, static_cast<std::uint8_t>(r.kind), 1);
      put_le(buf, r.vaddr, 8);
      put_le(buf, r.paddr ? *r.paddr : kAbsentPaddr, 8);
      put_le(buf, r.size, 1);
      put_le(buf, 0, 2);
      if (buf.size() >= kBinaryRecordSize * 4096) {
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
      }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("trace write failed");
}

void write_trace(const MemoryTrace& trace, const std::filesystem::path& path, TraceFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_trace(trace, out, format);
}

TranslationResult translate(const MemoryTrace& trace, const std::vector<PageTableSnapshot>& snapshots) {
  if (snapshots.empty()) throw PreconditionError("translate: no page-table snapshots supplied");
  for (std::size_t i = 1; i < snapshots.size(); ++i)
    if (snapshots[i].snapshot_seq() < snapshots[i - 1].snapshot_seq())
      throw PreconditionError("translate: snapshots must be ordered by snapshot_seq");

  TranslationResult result;
  result.trace = trace;
  auto& records = result.trace.records;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    // The snapshot captured at the end of the record's interval.
    auto it = std::lower_bound(snapshots.begin(), snapshots.end(), r.seq,
                               [](const PageTableSnapshot& s, std::uint64_t seq) { return s.snapshot_seq() < seq; });
    if (it == snapshots.end()) --it;
    r.paddr.reset();
    if (auto pa = it->translate(r.asid, r.vaddr)) {
      r.paddr = pa;
      ++result.resolved_primary;
    } else if (it != snapshots.begin()) {
      if (auto fb = std::prev(it)->translate(r.asid, r.vaddr)) {
        r.paddr = fb;
        ++result.resolved_fallback;
      }
    }
    if (!r.paddr) result.unresolved.push_back(i);
  }
  result.trace.meta.has_physical = result.resolved_primary + result.resolved_fallback > 0;
  return result;
}

void write_page_table(const PageTableSnapshot& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "#pagetable seq=" << table.snapshot_seq() << " page=" << table.page_size() << '\n';
  char buf[96];
  for (const auto& e : table.small_entries()) {
    std::snprintf(buf, sizeof buf, "%llu,0x%llx,0x%llx,4K\n", static_cast<unsigned long long>(e[0]),
                  static_cast<unsigned long long>(e[1]), static_cast<unsigned long long>(e[2]));
    out << buf;
  }
  for (const auto& e : table.huge_entries()) {
    std::snprintf(buf, sizeof buf, "%llu,0x%llx,0x%llx,2M\n", static_cast<unsigned long long>(e[0]),
                  static_cast<unsigned long long>(e[1]), static_cast<unsigned long long>(e[2]));
    out << buf;
  }
  if (!out) throw IoError("page table write failed");
}

PageTableSnapshot read_page_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open page table '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("#pagetable", 0) != 0)
    throw FormatError(path.string() + ": bad magic: expected '#pagetable' header");
  std::uint64_t seq = 0;
  std::uint32_t page = 4096;
  for (auto tok : split(trim(line), ' ')) {
    if (tok.rfind("seq=", 0) == 0 && !parse_uint(tok.substr(4), seq)) throw FormatError(path.string() + ": bad seq");
    if (tok.rfind("page=", 0) == 0 && !parse_uint(tok.substr(5), page))
      throw FormatError(path.string() + ": bad page size");
  }
  PageTableSnapshot table(seq, page);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto row = trim(line);
    if (row.empty() || row.front() == '#') continue;
    auto cols = split(row, ',');
    std::uint32_t asid = 0;
    std::uint64_t vfn = 0, pfn = 0;
    if (cols.size() != 4 || !parse_uint(cols[0], asid) || !parse_uint(cols[1], vfn, 16) ||
        !parse_uint(cols[2], pfn, 16) || (cols[3] != "4K" && cols[3] != "2M"))
      throw FormatError(where(path.string(), lineno) + ": malformed page-table row");
    if (cols[3] == "2M")
      table.map_huge(asid, vfn, pfn);
    else
      table.map(asid, vfn, pfn);
  }
  return table;
}

}  // namespace memscope
