#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "memscope/analytics.hpp"
#include "memscope/cache.hpp"
#include "memscope/error.hpp"
#include "memscope/prefetch.hpp"
#include "memscope/stitch.hpp"
#include "memscope/synth.hpp"
#include "memscope/tier.hpp"
#include "memscope/tlb.hpp"
#include "memscope/trace.hpp"

namespace py = pybind11;
using namespace memscope;

namespace {

py::dict cache_dict(const CacheStats& s) {
  py::dict out;
  out["instructions"] = s.instructions;
  out["memory_lines"] = s.memory_lines;
  py::list levels;
  for (std::size_t i = 0; i < s.levels.size(); ++i) {
    py::dict l;
    l["name"] = s.levels[i].name;
    for (auto cls : {AccessClass::Code, AccessClass::Data}) {
      const auto& c = s.levels[i][cls];
      py::dict d;
      d["accesses"] = c.accesses;
      d["hits"] = c.hits;
      d["misses"] = c.misses;
      d["evictions"] = c.evictions;
      d["mpki"] = s.mpki(i, cls);
      l[cls == AccessClass::Code ? "code" : "data"] = d;
    }
    levels.append(l);
  }
  out["levels"] = levels;
  return out;
}

py::dict tlb_level_dict(const TlbLevelStats& s) {
  py::dict d;
  d["name"] = s.name;
  d["lookups"] = s.lookups;
  d["hits"] = s.hits;
  d["extended"] = s.asid_extension_hits;
  d["misses"] = s.misses;
  d["walks"] = s.walks;
  d["mpki"] = s.mpki;
  return d;
}

std::vector<CacheLevelConfig> levels_or_gen4(const MemoryTrace& t, std::uint32_t l2_cluster) {
  return gen4_hierarchy(t.meta.n_cores, l2_cluster);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Trace-driven memory hierarchy simulation";
  m.attr("__version__") = cli::version();

  auto base = py::register_exception<Error>(m, "MemscopeError");
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<UndefinedValueError>(m, "UndefinedValueError", base.ptr());
  py::register_exception<RoutingError>(m, "RoutingError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<MemoryTrace>(m, "Trace")
      .def("__len__", &MemoryTrace::size)
      .def_property_readonly("n_cores", [](const MemoryTrace& t) { return t.meta.n_cores; })
      .def_property_readonly("page_size", [](const MemoryTrace& t) { return t.meta.page_size; })
      .def_property_readonly("has_physical", [](const MemoryTrace& t) { return t.meta.has_physical; })
      .def("record", [](const MemoryTrace& t, std::size_t i) {
        if (i >= t.records.size()) throw py::index_error();
        const auto& r = t.records[i];
        py::dict d;
        d["seq"] = r.seq;
        d["core"] = r.core;
        d["asid"] = r.asid;
        d["kind"] = std::string(to_string(r.kind));
        d["vaddr"] = r.vaddr;
        d["paddr"] = r.paddr;
        d["size"] = r.size;
        return d;
      })
      .def("__eq__", [](const MemoryTrace& a, const MemoryTrace& b) { return a == b; });

  py::class_<PageTableSnapshot>(m, "PageTable")
      .def("__len__", &PageTableSnapshot::size)
      .def("translate", &PageTableSnapshot::translate, py::arg("asid"), py::arg("vaddr"));

  m.def("read_trace", py::overload_cast<const std::filesystem::path&>(&read_trace), py::arg("path"));
  m.def(
      "write_trace",
      [](const MemoryTrace& t, const std::filesystem::path& p, const std::string& fmt) {
        if (fmt != "binary" && fmt != "text") throw ConfigError("format must be binary or text");
        write_trace(t, p, fmt == "binary" ? TraceFormat::Binary : TraceFormat::Text);
      },
      py::arg("trace"), py::arg("path"), py::arg("format") = "binary");

  m.def(
      "generate",
      [](std::uint32_t n_cores, std::uint64_t events, std::uint64_t seed, double code_share, bool disjoint_private_code,
         bool multiprocess, std::uint64_t code_footprint, std::uint64_t data_footprint, double data_zipf,
         double ifetch_fraction, double read_write_ratio) {
        SynthSpec s;
        s.n_cores = n_cores;
        s.n_events = events;
        s.rng_seed = seed;
        s.code_share = code_share;
        s.disjoint_private_code = disjoint_private_code;
        s.mode = multiprocess ? SharingMode::MultiProcess : SharingMode::MultiThread;
        s.code_footprint_bytes = code_footprint;
        s.data_footprint_bytes = data_footprint;
        s.data_zipf_s = data_zipf;
        s.ifetch_fraction = ifetch_fraction;
        s.read_write_ratio = read_write_ratio;
        auto out = generate(s);
        return py::make_tuple(std::move(out.trace), std::move(out.page_table));
      },
      py::arg("n_cores") = 2, py::arg("events") = 100000, py::arg("seed") = 1, py::arg("code_share") = 1.0,
      py::arg("disjoint_private_code") = false, py::arg("multiprocess") = false,
      py::arg("code_footprint") = 4ull << 20, py::arg("data_footprint") = 64ull << 20, py::arg("data_zipf") = 1.2,
      py::arg("ifetch_fraction") = 0.5, py::arg("read_write_ratio") = 2.0);

  m.def(
      "simulate_cache",
      [](const MemoryTrace& t, std::uint32_t l2_cluster) {
        return cache_dict(simulate_hierarchy(t, levels_or_gen4(t, l2_cluster)));
      },
      py::arg("trace"), py::arg("l2_cluster") = 1);

  m.def(
      "simulate_itlb",
      [](const MemoryTrace& t, const PageTableSnapshot& pt, std::uint32_t l2_cluster, std::uint32_t entries) {
        auto s = simulate_itlb(t, gen4_itlb(l2_cluster, entries), pt);
        py::dict d;
        d["l1"] = tlb_level_dict(s.l1);
        d["l2"] = tlb_level_dict(s.l2);
        d["walks"] = s.walks;
        return d;
      },
      py::arg("trace"), py::arg("page_table"), py::arg("l2_cluster") = 1, py::arg("l2_entries_per_core") = 1536);

  m.def(
      "prefetch_accuracy",
      [](std::uint64_t total, std::uint64_t unused) {
        PrefetchAccount a;
        a.total_prefetched = total;
        a.unused_evicted = unused;
        return accuracy(a);
      },
      py::arg("total_prefetched"), py::arg("unused_evicted"));
  m.def(
      "prefetch_coverage",
      [](std::uint64_t total, std::uint64_t unused, std::uint64_t brought_in) {
        PrefetchAccount a;
        a.total_prefetched = total;
        a.unused_evicted = unused;
        a.total_lines_brought_in = brought_in;
        return coverage(a);
      },
      py::arg("total_prefetched"), py::arg("unused_evicted"), py::arg("total_lines_brought_in"));

  m.def(
      "compare_prefetch",
      [](const MemoryTrace& t, const std::string& kind, std::uint32_t degree, std::uint32_t distance,
         const std::string& level) {
        PrefetcherConfig pf;
        auto k = parse_prefetcher_kind(kind);
        if (!k) throw ConfigError("unknown prefetcher kind '" + kind + "'");
        pf.kind = *k;
        pf.degree = degree;
        pf.distance = distance;
        pf.level = level;
        auto r = compare_prefetch(t, gen4_hierarchy(t.meta.n_cores), pf);
        py::dict d;
        d["accuracy"] = r.accuracy;
        d["coverage"] = r.coverage;
        d["traffic_lines_pf_on"] = r.traffic_lines_pf_on;
        d["traffic_lines_pf_off"] = r.traffic_lines_pf_off;
        d["traffic_overhead_pct"] = r.traffic_overhead_pct;
        return d;
      },
      py::arg("trace"), py::arg("kind") = "next_line", py::arg("degree") = 1, py::arg("distance") = 1,
      py::arg("level") = "L2");

  m.def(
      "compare_tiers",
      [](const MemoryTrace& t, std::uint64_t epochs, std::uint64_t seed, unsigned jobs) {
        if (epochs == 0) throw ConfigError("epochs must be >= 1");
        auto stream = collect_llc_misses(t, gen4_hierarchy(t.meta.n_cores));
        std::vector<TierConfig> configs{baseline_tier(), ideal_tier(), tiered_tier()};
        for (auto& c : configs) {
          c.migration_epoch = std::max<std::uint64_t>(1, stream.size() / epochs);
          c.seed = seed;
        }
        py::list out;
        for (const auto& r : compare_tiers(stream, configs, jobs)) {
          py::dict d;
          d["name"] = r.name;
          d["relative_throughput"] = r.relative_throughput;
          d["relative_cost"] = r.relative_cost;
          d["throughput_per_cost"] = r.throughput_per_cost;
          d["near_bw"] = r.near_bw_measured;
          d["far_bw"] = r.far_bw_measured;
          d["warmup_epochs"] = r.warmup_epochs;
          d["migrations"] = r.migrations;
          out.append(d);
        }
        return out;
      },
      py::arg("trace"), py::arg("epochs") = 40, py::arg("seed") = 1, py::arg("jobs") = 1);

  m.def("pearson", &pearson, py::arg("x"), py::arg("y"));
  m.def(
      "code_correlation",
      [](const MemoryTrace& t, std::uint16_t a, std::uint16_t b) {
        auto s = sample_ifetches(t, 1);
        if (a >= s.size() || b >= s.size()) throw PreconditionError("core out of range");
        return correlation(s[a], s[b], t.meta.page_size);
      },
      py::arg("trace"), py::arg("core_a") = 0, py::arg("core_b") = 1);
  m.def(
      "project_ipc",
      [](const std::vector<std::pair<double, double>>& points, double target) {
        std::vector<IpcPoint> pts;
        for (const auto& [size, ipc] : points) pts.push_back({size, ipc});
        auto p = project_ipc(pts, target);
        py::dict d;
        d["slope"] = p.slope;
        d["intercept"] = p.intercept;
        d["projected"] = p.projected;
        return d;
      },
      py::arg("points"), py::arg("target_bytes"));

  m.def(
      "stitch",
      [](const std::vector<MemoryTrace>& sources, std::uint64_t window, std::uint64_t gap, std::uint64_t seed) {
        StitchSpec spec{window, gap, seed};
        auto r = stitch(sources, spec);
        py::list manifest;
        for (const auto& w : r.manifest) {
          py::dict d;
          d["source"] = w.source;
          d["window_index"] = w.window_index;
          d["orig_seq_start"] = w.orig_seq_start;
          d["orig_seq_end"] = w.orig_seq_end;
          manifest.append(d);
        }
        return py::make_tuple(std::move(r.trace), manifest);
      },
      py::arg("sources"), py::arg("window") = 1000, py::arg("gap") = 9000, py::arg("seed") = 1);

  m.def(
      "validate",
      [](const MemoryTrace& full, const MemoryTrace& stitched) {
        CacheLevelConfig l1d;
        l1d.name = "L1D";
        l1d.size_bytes = 32ull << 10;
        l1d.ways = 8;
        l1d.classes = ServedClasses::Data;
        auto v = validate(full, stitched, l1d);
        py::dict d;
        d["l1d_hit_ratio_full"] = v.l1d_hit_ratio_full;
        d["l1d_hit_ratio_stitched"] = v.l1d_hit_ratio_stitched;
        d["hit_ratio_error_pct"] = v.hit_ratio_error_pct;
        d["rw_ratio_full"] = v.rw_ratio_full;
        d["rw_ratio_stitched"] = v.rw_ratio_stitched;
        d["rw_ratio_error_pct"] = v.rw_ratio_error_pct;
        return d;
      },
      py::arg("full"), py::arg("stitched"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
