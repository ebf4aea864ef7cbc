#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpmoti/oracle.hpp"
#include "vpmoti/vpindex.hpp"
#include "vpmoti/workload.hpp"

namespace vpmoti::bench {

enum class IndexMode { unpart, vp, both };

/// Structural knobs shared by both index modes.
struct IndexTuning {
    int grid_levels = 10;
    int hist_cells = 64;
    std::size_t max_curve_runs = 1024;
    std::size_t page_size = 4096;
    std::size_t buffer_pages = 50;
    std::size_t refresh_period = 10000;
    int tau_hist_buckets = 100;
    std::size_t tau_hist_window = 100000;
    int analyzer_max_iters = 100;
};

struct ExperimentSpec {
    WorkloadConfig workload;
    std::vector<AxisSpec> axes;
    double outlier_frac = 0.0;
    std::string skew_name = "two-axis";
    IndexMode mode = IndexMode::both;
    int k = 2;
    QueryShapeKind shape = QueryShapeKind::circle;
    QueryTimeKind time_kind = QueryTimeKind::slice;
    std::size_t n_queries = 1000;
    int reps = 3;
    bool verify = false;
    std::string sweep_var = "none";  // none|objects|vmax|radius|predictive|skew|shape
    std::vector<std::string> sweep_values;
    std::size_t sample_size = 10000;
    IndexTuning tuning;
    std::optional<double> fixed_tau;
    bool allow_offrange = false;
    std::string experiment_id = "exp";
};

struct MetricsRow {
    std::string experiment_id;
    std::string mode;
    std::string sweep_value;
    double avg_query_logical_io = 0;
    double avg_query_physical_io = 0;
    double avg_update_physical_io = 0;
    double avg_query_time_us = 0;
    double avg_update_time_us = 0;
    double build_time_ms = 0;
    double analyzer_time_ms = 0;
};

inline constexpr const char* kMetricsHeader =
    "experiment_id,mode,sweep_value,avg_query_logical_io,avg_query_physical_io,"
    "avg_update_physical_io,avg_query_time_us,avg_update_time_us,build_time_ms,"
    "analyzer_time_ms";

struct VerificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A named axis mixture.
struct SkewSpec {
    std::string name;
    std::vector<AxisSpec> axes;
    double outlier_frac = 0.0;
};

/// Presets: "two-axis" (0 and 90 degrees), "four-axis" (0/45/90/135),
/// "uniform" (isotropic), or "custom:<deg>@<weight>@<jitterdeg>,...".
/// For the presets, the weight left over by `outlier_frac` is split evenly.
inline SkewSpec make_skew(const std::string& name, double jitter_rad,
                          double outlier_frac) {
    SkewSpec s{name, {}, outlier_frac};
    const auto evenly = [&](std::vector<double> angles_deg) {
        const double w = (1.0 - outlier_frac) / static_cast<double>(angles_deg.size());
        for (const double a : angles_deg) {
            s.axes.push_back({a * std::numbers::pi / 180.0, w, jitter_rad});
        }
    };
    if (name == "two-axis") {
        evenly({0, 90});
    } else if (name == "four-axis") {
        evenly({0, 45, 90, 135});
    } else if (name == "uniform") {
        s.outlier_frac = 1.0;
    } else if (name.starts_with("custom:")) {
        std::stringstream ss(name.substr(7));
        std::string part;
        while (std::getline(ss, part, ',')) {
            double deg = 0, weight = 0, jit_deg = 0;
            if (std::sscanf(part.c_str(), "%lf@%lf@%lf", &deg, &weight, &jit_deg) != 3) {
                throw std::invalid_argument("make_skew: bad custom axis: " + part);
            }
            s.axes.push_back({deg * std::numbers::pi / 180.0, weight,
                              jit_deg * std::numbers::pi / 180.0});
        }
        if (s.axes.empty()) throw std::invalid_argument("make_skew: empty custom spec");
    } else {
        throw std::invalid_argument("make_skew: unknown skew: " + name);
    }
    return s;
}

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     t0)
        .count();
}

struct ReplayTotals {
    std::size_t queries = 0;
    std::size_t updates = 0;
    std::uint64_t query_logical = 0;
    std::uint64_t query_physical = 0;
    std::uint64_t update_physical = 0;
    double query_time_us = 0;
    double update_time_us = 0;
};

inline std::string describe_mismatch(std::size_t query_no, const std::set<ObjectId>& want,
                                     const std::set<ObjectId>& got) {
    std::ostringstream os;
    os << "query #" << query_no << ": expected " << want.size() << " ids, got "
       << got.size();
    int shown = 0;
    os << "; missing:";
    for (ObjectId id : want) {
        if (!got.contains(id)) {
            os << ' ' << id;
            if (++shown >= 10) break;
        }
    }
    shown = 0;
    os << "; extra:";
    for (ObjectId id : got) {
        if (!want.contains(id)) {
            os << ' ' << id;
            if (++shown >= 10) break;
        }
    }
    return os.str();
}

/// Replays the interleaved update/query stream against one index, attributing
/// I/O deltas and wall time to each operation. When `truth` is given, every
/// query result is compared against it and the first mismatch aborts.
template <typename Index>
ReplayTotals replay(Index& index, const Workload& w, Timestamp end_time,
                    ObjectTable* truth) {
    ReplayTotals totals;
    std::size_t ui = 0;
    const auto apply_updates_until = [&](Timestamp t) {
        while (ui < w.updates.size() && w.updates[ui].t <= t) {
            const UpdateEvent& u = w.updates[ui++];
            const IoStats before = index.stats();
            const auto t0 = std::chrono::steady_clock::now();
            index.update(u.object, u.t);
            totals.update_time_us += ms_since(t0) * 1000.0;
            const IoStats delta = index.stats() - before;
            totals.update_physical += delta.physical_reads + delta.physical_writes;
            ++totals.updates;
            if (truth) truth->upsert(u.object);
        }
    };
    for (std::size_t qi = 0; qi < w.queries.size(); ++qi) {
        const QueryEvent& qe = w.queries[qi];
        apply_updates_until(qe.issue_time);
        const IoStats before = index.stats();
        const auto t0 = std::chrono::steady_clock::now();
        const std::set<ObjectId> got = index.range_query(qe.query, qe.issue_time);
        totals.query_time_us += ms_since(t0) * 1000.0;
        const IoStats delta = index.stats() - before;
        totals.query_logical += delta.logical_accesses;
        totals.query_physical += delta.physical_reads + delta.physical_writes;
        ++totals.queries;
        if (truth) {
            const std::set<ObjectId> want = truth->range(qe.query);
            if (want != got) {
                throw VerificationError(describe_mismatch(qi, want, got));
            }
        }
    }
    apply_updates_until(end_time);
    return totals;
}

inline void check_table_ranges(const WorkloadConfig& cfg, bool allow_offrange) {
    if (allow_offrange) return;
    const auto bad = [&](const std::string& what) {
        throw std::invalid_argument("parameter outside the benchmark range (" + what +
                                    "); pass allow_offrange to override");
    };
    if (cfg.n_objects > 500000) bad("objects > 500K");
    if (cfg.v_max < 20 || cfg.v_max > 200) bad("v_max outside [20, 200]");
    if (cfg.radius < 100 || cfg.radius > 1000) bad("radius outside [100, 1000]");
    if (cfg.predictive_time < 0 || cfg.predictive_time > 120) {
        bad("predictive_time outside [0, 120]");
    }
    if (cfg.duration != 240 && cfg.duration != 600) bad("duration not 240 or 600");
}

}  // namespace detail

inline VpIndexConfig make_index_config(const WorkloadConfig& wcfg, int k,
                                       const IndexTuning& t,
                                       std::optional<double> fixed_tau,
                                       std::uint64_t analyzer_seed) {
    VpIndexConfig cfg;
    cfg.domain = wcfg.domain;
    cfg.grid.levels = t.grid_levels;
    cfg.max_update_interval = wcfg.max_update_interval;
    cfg.hist_cells = t.hist_cells;
    cfg.max_curve_runs = t.max_curve_runs;
    cfg.page_size = t.page_size;
    cfg.buffer_pages = t.buffer_pages;
    cfg.k = k;
    cfg.refresh_period = t.refresh_period;
    cfg.fixed_tau = fixed_tau;
    cfg.analyzer.max_iters = t.analyzer_max_iters;
    cfg.analyzer.seed = analyzer_seed;
    cfg.analyzer.hist_buckets = t.tau_hist_buckets;
    cfg.analyzer.hist_window = t.tau_hist_window;
    return cfg;
}

/// Generates one full workload (objects, updates, queries, velocity sample)
/// for an experiment cell.
struct BuiltWorkload {
    Workload data;
    std::vector<Vec2> sample;
};

inline BuiltWorkload build_workload(const WorkloadConfig& wcfg,
                                    const std::vector<AxisSpec>& axes,
                                    double outlier_frac, std::size_t n_queries,
                                    QueryShapeKind shape, QueryTimeKind time_kind,
                                    std::size_t sample_size) {
    BuiltWorkload out;
    out.data = gen_objects(wcfg, axes, outlier_frac);
    out.data.updates = gen_update_stream(wcfg, out.data, axes, outlier_frac);
    out.data.queries = gen_queries(wcfg, n_queries, shape, time_kind);
    out.sample = sample_velocities(out.data.objects, sample_size, wcfg.seed);
    return out;
}

namespace detail {

struct ModeResult {
    ReplayTotals totals;
    double build_time_ms = 0;
    double analyzer_time_ms = 0;
};

template <typename Index>
ModeResult run_mode(Index& index, const BuiltWorkload& bw, Timestamp end_time,
                    bool verify) {
    ModeResult r;
    const auto t0 = std::chrono::steady_clock::now();
    for (const MovingPoint& o : bw.data.objects) index.insert(o, o.t_ref);
    r.build_time_ms = ms_since(t0);
    ObjectTable truth;
    if (verify) {
        for (const MovingPoint& o : bw.data.objects) truth.insert(o);
    }
    index.reset_stats();
    r.totals = replay(index, bw.data, end_time, verify ? &truth : nullptr);
    return r;
}

inline void accumulate(MetricsRow& row, const ModeResult& r) {
    const double nq = std::max<double>(1, static_cast<double>(r.totals.queries));
    const double nu = std::max<double>(1, static_cast<double>(r.totals.updates));
    row.avg_query_logical_io += static_cast<double>(r.totals.query_logical) / nq;
    row.avg_query_physical_io += static_cast<double>(r.totals.query_physical) / nq;
    row.avg_update_physical_io += static_cast<double>(r.totals.update_physical) / nu;
    row.avg_query_time_us += r.totals.query_time_us / nq;
    row.avg_update_time_us += r.totals.update_time_us / nu;
    row.build_time_ms += r.build_time_ms;
    row.analyzer_time_ms += r.analyzer_time_ms;
}

inline void finish_average(MetricsRow& row, int reps) {
    const double r = static_cast<double>(reps);
    row.avg_query_logical_io /= r;
    row.avg_query_physical_io /= r;
    row.avg_update_physical_io /= r;
    row.avg_query_time_us /= r;
    row.avg_update_time_us /= r;
    row.build_time_ms /= r;
    row.analyzer_time_ms /= r;
}

/// Applies one sweep value onto a copy of the spec's parameters.
struct CellParams {
    WorkloadConfig workload;
    std::vector<AxisSpec> axes;
    double outlier_frac;
    QueryShapeKind shape;
    std::string label;
};

inline CellParams apply_sweep(const ExperimentSpec& spec, const std::string& value) {
    CellParams p{spec.workload, spec.axes, spec.outlier_frac, spec.shape, value};
    if (spec.sweep_var == "none") {
        p.label = "default";
    } else if (spec.sweep_var == "objects") {
        p.workload.n_objects = static_cast<std::size_t>(std::stod(value));
    } else if (spec.sweep_var == "vmax") {
        p.workload.v_max = std::stod(value);
    } else if (spec.sweep_var == "radius") {
        p.workload.radius = std::stod(value);
    } else if (spec.sweep_var == "predictive") {
        p.workload.predictive_time = std::stod(value);
    } else if (spec.sweep_var == "skew") {
        double jitter = 2.0 * std::numbers::pi / 180.0;
        if (!spec.axes.empty()) jitter = spec.axes.front().jitter_sigma;
        const SkewSpec s = make_skew(value, jitter, spec.outlier_frac);
        p.axes = s.axes;
        p.outlier_frac = s.outlier_frac;
    } else if (spec.sweep_var == "shape") {
        if (value == "circle") {
            p.shape = QueryShapeKind::circle;
        } else if (value == "rect") {
            p.shape = QueryShapeKind::rect;
        } else {
            throw std::invalid_argument("sweep shape: " + value);
        }
    } else {
        throw std::invalid_argument("unknown sweep variable: " + spec.sweep_var);
    }
    return p;
}

}  // namespace detail

/// Runs the experiment grid: every sweep value x every repetition x every
/// requested index mode, each on a fresh store and buffer, and returns one
/// averaged row per (sweep value, mode).
inline std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec,
                                              std::ostream* log = nullptr) {
    std::vector<std::string> values = spec.sweep_values;
    if (spec.sweep_var == "none" || values.empty()) values = {"default"};
    std::vector<MetricsRow> rows;
    for (const std::string& value : values) {
        const detail::CellParams cell = detail::apply_sweep(spec, value);
        detail::check_table_ranges(cell.workload, spec.allow_offrange);
        MetricsRow unpart_row{spec.experiment_id, "unpart", cell.label};
        MetricsRow vp_row{spec.experiment_id, "vp", cell.label};
        for (int rep = 0; rep < spec.reps; ++rep) {
            WorkloadConfig wcfg = cell.workload;
            wcfg.seed = cell.workload.seed + 1000003ull * static_cast<std::uint64_t>(rep);
            const BuiltWorkload bw =
                build_workload(wcfg, cell.axes, cell.outlier_frac, spec.n_queries,
                               cell.shape, spec.time_kind, spec.sample_size);
            const VpIndexConfig icfg = make_index_config(
                wcfg, spec.k, spec.tuning, spec.fixed_tau, wcfg.seed ^ 0x5eedull);
            if (log) {
                *log << "# " << spec.experiment_id << " value=" << cell.label
                     << " rep=" << rep << " objects=" << bw.data.objects.size()
                     << " updates=" << bw.data.updates.size() << '\n';
            }
            if (spec.mode != IndexMode::vp) {
                UnpartitionedIndex index(icfg);
                detail::accumulate(
                    unpart_row,
                    detail::run_mode(index, bw, wcfg.duration, spec.verify));
            }
            if (spec.mode != IndexMode::unpart) {
                const auto t0 = std::chrono::steady_clock::now();
                velocity_partitioning(bw.sample, spec.k, icfg.analyzer);
                const double analyzer_ms = detail::ms_since(t0);
                VpIndex index(bw.sample, icfg);
                detail::ModeResult r =
                    detail::run_mode(index, bw, wcfg.duration, spec.verify);
                r.analyzer_time_ms = analyzer_ms;
                detail::accumulate(vp_row, r);
            }
        }
        if (spec.mode != IndexMode::vp) {
            detail::finish_average(unpart_row, spec.reps);
            rows.push_back(unpart_row);
        }
        if (spec.mode != IndexMode::unpart) {
            detail::finish_average(vp_row, spec.reps);
            rows.push_back(vp_row);
        }
    }
    return rows;
}

inline void emit_csv(const std::vector<MetricsRow>& rows, std::ostream& os) {
    if (rows.empty()) throw std::invalid_argument("emit_csv: no rows");
    os << kMetricsHeader << '\n';
    char buf[512];
    for (const MetricsRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                      r.experiment_id.c_str(), r.mode.c_str(), r.sweep_value.c_str(),
                      r.avg_query_logical_io, r.avg_query_physical_io,
                      r.avg_update_physical_io, r.avg_query_time_us,
                      r.avg_update_time_us, r.build_time_ms, r.analyzer_time_ms);
        os << buf;
    }
}

inline std::vector<MetricsRow> parse_metrics_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kMetricsHeader) {
        throw std::runtime_error("parse_metrics_csv: bad header");
    }
    std::vector<MetricsRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        MetricsRow r;
        std::string field;
        std::getline(ss, r.experiment_id, ',');
        std::getline(ss, r.mode, ',');
        std::getline(ss, r.sweep_value, ',');
        double* nums[] = {&r.avg_query_logical_io, &r.avg_query_physical_io,
                          &r.avg_update_physical_io, &r.avg_query_time_us,
                          &r.avg_update_time_us, &r.build_time_ms, &r.analyzer_time_ms};
        for (double* n : nums) {
            if (!std::getline(ss, field, ',')) {
                throw std::runtime_error("parse_metrics_csv: short row");
            }
            *n = std::stod(field);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

// --- fixed-threshold sweep ----------------------------------------------------

struct TauSweepRow {
    std::string kind;  // "fixed" or "auto"
    double tau = 0;
    double avg_query_logical_io = 0;
};

/// Replays one workload under a grid of fixed outlier thresholds plus the
/// self-computed threshold, reporting average query logical I/O for each.
inline std::vector<TauSweepRow> run_tau_sweep(const ExperimentSpec& spec,
                                              std::size_t grid_points = 20,
                                              std::ostream* log = nullptr) {
    detail::check_table_ranges(spec.workload, spec.allow_offrange);
    const BuiltWorkload bw =
        build_workload(spec.workload, spec.axes, spec.outlier_frac, spec.n_queries,
                       spec.shape, spec.time_kind, spec.sample_size);
    const VpIndexConfig base_cfg = make_index_config(
        spec.workload, spec.k, spec.tuning, std::nullopt, spec.workload.seed ^ 0x5eedull);

    // The grid spans the largest perpendicular speed any partition saw.
    const PartitionResult analysis =
        velocity_partitioning(bw.sample, spec.k, base_cfg.analyzer);
    double v_perp_max = 0;
    for (std::size_t i = 0; i < bw.sample.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const DvaDescriptor& d : analysis.dvas) {
            best = std::min(best, d.perp_speed(bw.sample[i]));
        }
        v_perp_max = std::max(v_perp_max, best);
    }

    std::vector<TauSweepRow> rows;
    const auto measure = [&](std::optional<double> fixed) {
        VpIndexConfig cfg = base_cfg;
        cfg.fixed_tau = fixed;
        VpIndex index(bw.sample, cfg);
        const detail::ModeResult r =
            detail::run_mode(index, bw, spec.workload.duration, spec.verify);
        const double nq = std::max<double>(1, static_cast<double>(r.totals.queries));
        TauSweepRow row;
        row.kind = fixed ? "fixed" : "auto";
        row.tau = fixed ? *fixed : index.dvas().front().tau;
        row.avg_query_logical_io = static_cast<double>(r.totals.query_logical) / nq;
        if (log) {
            *log << "# tau-sweep " << row.kind << " tau=" << row.tau
                 << " io=" << row.avg_query_logical_io << '\n';
        }
        return row;
    };
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double tau =
            v_perp_max * static_cast<double>(i) / static_cast<double>(grid_points - 1);
        rows.push_back(measure(tau));
    }
    rows.push_back(measure(std::nullopt));
    return rows;
}

inline void emit_tau_sweep(const std::vector<TauSweepRow>& rows, std::ostream& os) {
    if (rows.empty()) throw std::invalid_argument("emit_tau_sweep: no rows");
    os << "kind,tau,avg_query_logical_io\n";
    char buf[160];
    for (const TauSweepRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.4f\n", r.kind.c_str(), r.tau,
                      r.avg_query_logical_io);
        os << buf;
    }
}

}  // namespace vpmoti::bench
