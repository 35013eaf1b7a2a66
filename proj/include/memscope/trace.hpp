#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace memscope {

enum class AccessKind : std::uint8_t { IFetch = 0, Load = 1, Store = 2 };

enum class TraceOrigin : std::uint8_t { Synthetic, Recorded, Stitched };

enum class TraceFormat { Text, Binary };

std::string_view to_string(AccessKind kind);
std::optional<AccessKind> parse_access_kind(std::string_view text);
char origin_code(TraceOrigin origin);

inline bool is_code(AccessKind kind) { return kind == AccessKind::IFetch; }

struct TraceRecord {
  std::uint64_t seq = 0;
  std::uint16_t core = 0;
  std::uint32_t asid = 0;
  AccessKind kind = AccessKind::Load;
  std::uint64_t vaddr = 0;
  std::optional<std::uint64_t> paddr;
  std::uint8_t size = 8;

  /// Address caches and prefetchers index by: physical when known.
  std::uint64_t index_addr() const { return paddr ? *paddr : vaddr; }

  bool operator==(const TraceRecord&) const = default;
};

struct TraceMeta {
  std::uint32_t version = 1;
  std::uint32_t page_size = 4096;
  std::uint32_t line_size = 64;
  std::uint32_t n_cores = 1;
  bool has_physical = false;
  TraceOrigin origin = TraceOrigin::Synthetic;

  bool operator==(const TraceMeta&) const = default;
};

struct MemoryTrace {
  TraceMeta meta;
  std::vector<TraceRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool operator==(const MemoryTrace&) const = default;
};

inline constexpr std::uint64_t kHugePageSize = 2ull << 20;

/// One captured copy of the process page tables. Keys are (asid, vfn) at the
/// trace page size; 2 MiB mappings are held separately, keyed by 2 MiB frame.
class PageTableSnapshot {
 public:
  struct Key {
    std::uint32_t asid;
    std::uint64_t vfn;
    bool operator==(const Key&) const = default;
  };

  PageTableSnapshot() = default;
  explicit PageTableSnapshot(std::uint64_t snapshot_seq, std::uint32_t page_size = 4096)
      : snapshot_seq_(snapshot_seq), page_size_(page_size) {}

  std::uint64_t snapshot_seq() const { return snapshot_seq_; }
  void set_snapshot_seq(std::uint64_t seq) { snapshot_seq_ = seq; }
  std::uint32_t page_size() const { return page_size_; }

  void map(std::uint32_t asid, std::uint64_t vfn, std::uint64_t pfn);
  void map_huge(std::uint32_t asid, std::uint64_t huge_vfn, std::uint64_t huge_pfn);
  void unmap(std::uint32_t asid, std::uint64_t vfn);

  std::optional<std::uint64_t> lookup(std::uint32_t asid, std::uint64_t vfn) const;
  std::optional<std::uint64_t> lookup_huge(std::uint32_t asid, std::uint64_t huge_vfn) const;

  /// Full virtual-to-physical translation; huge mappings take precedence.
  std::optional<std::uint64_t> translate(std::uint32_t asid, std::uint64_t vaddr) const;

  std::size_t size() const { return small_.size() + huge_.size(); }

  /// Builds a snapshot from the (vaddr, paddr) pairs a physical trace carries.
  static PageTableSnapshot from_trace(const MemoryTrace& trace);

  /// Sorted (asid, vfn, pfn) triples; huge mappings excluded.
  std::vector<std::array<std::uint64_t, 3>> small_entries() const;
  std::vector<std::array<std::uint64_t, 3>> huge_entries() const;

 private:
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<std::uint64_t>{}(k.vfn * 0x9E3779B97F4A7C15ull ^ k.asid);
    }
  };

  std::uint64_t snapshot_seq_ = 0;
  std::uint32_t page_size_ = 4096;
  std::unordered_map<Key, std::uint64_t, KeyHash> small_;
  std::unordered_map<Key, std::uint64_t, KeyHash> huge_;
};

/// Splits an access that crosses cacheline boundaries into line-contained
/// pieces. All pieces keep the original seq.
std::vector<TraceRecord> split_on_lines(const TraceRecord& rec, std::uint32_t line_size);

/// Throws IntegrityError on the first violated trace invariant.
void check_trace(const MemoryTrace& trace);

MemoryTrace read_trace(const std::filesystem::path& path);
MemoryTrace read_trace(std::istream& in, std::string_view name = "<stream>");

void write_trace(const MemoryTrace& trace, const std::filesystem::path& path, TraceFormat format);
void write_trace(const MemoryTrace& trace, std::ostream& out, TraceFormat format);

std::string format_header(const TraceMeta& meta);
TraceMeta parse_header(std::string_view line);

struct TranslationResult {
  MemoryTrace trace;
  std::size_t resolved_primary = 0;
  std::size_t resolved_fallback = 0;
  /// Indices into trace.records whose paddr could not be resolved.
  std::vector<std::size_t> unresolved;
};

/// Fills paddr from the snapshot closing each record's interval, falling back
/// to the snapshot captured before it.
TranslationResult translate(const MemoryTrace& trace, const std::vector<PageTableSnapshot>& snapshots);

void write_page_table(const PageTableSnapshot& table, const std::filesystem::path& path);
PageTableSnapshot read_page_table(const std::filesystem::path& path);

}  // namespace memscope
