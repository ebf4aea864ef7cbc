#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpmoti/geometry.hpp"

namespace vpmoti {

/// One dominant travel direction of a synthetic population.
struct AxisSpec {
    double angle = 0;         // radians
    double weight = 0;        // fraction of the population
    double jitter_sigma = 0;  // radians, normal jitter around the axis
};

struct WorkloadConfig {
    Domain domain;
    std::size_t n_objects = 100000;
    double v_max = 100;                // m/ts
    double max_update_interval = 120;  // ts
    double radius = 500;               // m, circular queries
    double rect_side_x = 1000;         // m, rectangular queries
    double rect_side_y = 1000;
    double predictive_time = 60;  // ts
    double duration = 240;        // ts
    double p_switch = 0.05;       // chance an update re-draws the travel axis
    std::uint64_t seed = 1;
};

enum class QueryShapeKind { circle, rect };
enum class QueryTimeKind { slice, interval, moving };

struct UpdateEvent {
    Timestamp t = 0;
    MovingPoint object;  // t_ref == t
};

struct QueryEvent {
    Timestamp issue_time = 0;
    RangeQuery query;
};

struct Workload {
    std::vector<MovingPoint> objects;
    std::vector<int> axis_labels;  // per object: axis index, -1 isotropic
    std::vector<UpdateEvent> updates;
    std::vector<QueryEvent> queries;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t item) {
    std::uint64_t s = seed ^ (0xd1342543de82ef95ull * (stream + 1));
    s ^= 0xaf251af3b0f025b5ull * (item + 1);
    std::uint64_t state = s;
    return splitmix64(state);
}

/// (0, 1]
inline double unit_open_lo(std::mt19937_64& rng) {
    return 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

struct VelocityDrawer {
    const std::vector<AxisSpec>& axes;
    double outlier_frac;
    double v_max;

    int draw_label(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        if (u01(rng) < outlier_frac || axes.empty()) return -1;
        double total = 0;
        for (const auto& a : axes) total += a.weight;
        double pick = u01(rng) * total;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            pick -= axes[i].weight;
            if (pick <= 0) return static_cast<int>(i);
        }
        return static_cast<int>(axes.size()) - 1;
    }

    Vec2 draw_velocity(std::mt19937_64& rng, int label) const {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        double theta;
        if (label < 0) {
            theta = u01(rng) * 2 * std::numbers::pi;
        } else {
            const AxisSpec& a = axes[static_cast<std::size_t>(label)];
            theta = a.angle;
            if (a.jitter_sigma > 0) {
                theta += std::normal_distribution<double>(0.0, a.jitter_sigma)(rng);
            }
            if (u01(rng) < 0.5) theta += std::numbers::pi;  // either direction
        }
        const double speed = v_max * unit_open_lo(rng);  // (0, v_max]
        return Vec2{speed * std::cos(theta), speed * std::sin(theta)};
    }
};

/// Folds a projected position back into the domain, mirror-style.
inline double reflect_axis(double x, double lo, double hi) {
    const double w = hi - lo;
    double y = std::fmod(x - lo, 2 * w);
    if (y < 0) y += 2 * w;
    return (y <= w) ? lo + y : lo + 2 * w - y;
}

inline Vec2 reflect_into(const Rect& r, Vec2 p) {
    return Vec2{reflect_axis(p.x, r.lo.x, r.hi.x), reflect_axis(p.y, r.lo.y, r.hi.y)};
}

}  // namespace detail

/// Synthetic population: positions uniform over the domain; directions drawn
/// from the axis mixture (either way along the axis, normal jitter) or
/// isotropically with probability `outlier_frac`; speeds uniform on
/// (0, v_max].
inline Workload gen_objects(const WorkloadConfig& cfg, const std::vector<AxisSpec>& axes,
                            double outlier_frac) {
    Workload w;
    w.objects.reserve(cfg.n_objects);
    w.axis_labels.reserve(cfg.n_objects);
    std::mt19937_64 rng(detail::derive_seed(cfg.seed, 0, 0));
    std::uniform_real_distribution<double> ux(cfg.domain.extent.lo.x, cfg.domain.extent.hi.x);
    std::uniform_real_distribution<double> uy(cfg.domain.extent.lo.y, cfg.domain.extent.hi.y);
    const detail::VelocityDrawer drawer{axes, outlier_frac, cfg.v_max};
    for (std::size_t i = 0; i < cfg.n_objects; ++i) {
        const int label = drawer.draw_label(rng);
        const Vec2 pos{ux(rng), uy(rng)};
        const Vec2 vel = drawer.draw_velocity(rng, label);
        w.objects.push_back(MovingPoint{static_cast<ObjectId>(i + 1), pos, vel, 0.0});
        w.axis_labels.push_back(label);
    }
    return w;
}

/// Update stream over [0, duration]: each object's first update time is drawn
/// from the stationary residual of its uniform (0, max_update_interval] cycle
/// (so the long-run rate duration/(interval/2) holds from t = 0), later gaps
/// are uniform; each update projects the position (reflecting off the domain
/// walls), re-draws speed and jitter, and keeps its axis with probability
/// 1 - p_switch. Events are ordered by (time, id).
inline std::vector<UpdateEvent> gen_update_stream(const WorkloadConfig& cfg,
                                                  const Workload& base,
                                                  const std::vector<AxisSpec>& axes,
                                                  double outlier_frac) {
    std::vector<UpdateEvent> events;
    const detail::VelocityDrawer drawer{axes, outlier_frac, cfg.v_max};
    for (std::size_t i = 0; i < base.objects.size(); ++i) {
        MovingPoint cur = base.objects[i];
        int label = base.axis_labels.empty() ? -1 : base.axis_labels[i];
        std::mt19937_64 rng(detail::derive_seed(cfg.seed, 1, cur.id));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        double t = cfg.max_update_interval *
                   (1.0 - std::sqrt(1.0 - detail::unit_open_lo(rng)));
        while (t <= cfg.duration) {
            if (u01(rng) < cfg.p_switch) label = drawer.draw_label(rng);
            const Vec2 pos = detail::reflect_into(cfg.domain.extent, position_at(cur, t));
            const Vec2 vel = drawer.draw_velocity(rng, label);
            cur = MovingPoint{cur.id, pos, vel, t};
            events.push_back({t, cur});
            t += cfg.max_update_interval * detail::unit_open_lo(rng);
        }
    }
    std::sort(events.begin(), events.end(), [](const UpdateEvent& a, const UpdateEvent& b) {
        return a.t != b.t ? a.t < b.t : a.object.id < b.object.id;
    });
    return events;
}

/// Query mix: centers uniform over the domain, issue times uniform over the
/// duration, predictive offsets uniform on [0, predictive_time]. Interval
/// queries draw two offsets; moving queries add a random query velocity.
inline std::vector<QueryEvent> gen_queries(const WorkloadConfig& cfg,
                                           std::size_t n_queries, QueryShapeKind shape,
                                           QueryTimeKind time_kind) {
    std::vector<QueryEvent> out;
    out.reserve(n_queries);
    std::mt19937_64 rng(detail::derive_seed(cfg.seed, 2, 0));
    std::uniform_real_distribution<double> ux(cfg.domain.extent.lo.x, cfg.domain.extent.hi.x);
    std::uniform_real_distribution<double> uy(cfg.domain.extent.lo.y, cfg.domain.extent.hi.y);
    std::uniform_real_distribution<double> uissue(0.0, cfg.duration);
    std::uniform_real_distribution<double> uoff(0.0, cfg.predictive_time);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < n_queries; ++i) {
        const Timestamp issue = uissue(rng);
        const Vec2 center{ux(rng), uy(rng)};
        QueryShape qshape;
        if (shape == QueryShapeKind::circle) {
            qshape = Circle(center, cfg.radius);
        } else {
            const Vec2 half{cfg.rect_side_x / 2, cfg.rect_side_y / 2};
            qshape = Rect(center - half, center + half);
        }
        RangeQuery q;
        switch (time_kind) {
            case QueryTimeKind::slice:
                q = RangeQuery::slice(qshape, issue + uoff(rng));
                break;
            case QueryTimeKind::interval: {
                double o1 = uoff(rng), o2 = uoff(rng);
                if (o1 > o2) std::swap(o1, o2);
                q = RangeQuery::interval(qshape, issue + o1, issue + o2);
                break;
            }
            case QueryTimeKind::moving: {
                double o1 = uoff(rng), o2 = uoff(rng);
                if (o1 > o2) std::swap(o1, o2);
                const double theta = u01(rng) * 2 * std::numbers::pi;
                const double speed = cfg.v_max * detail::unit_open_lo(rng);
                q = RangeQuery::moving(qshape, issue + o1, issue + o2,
                                       Vec2{speed * std::cos(theta), speed * std::sin(theta)});
                break;
            }
        }
        out.push_back({issue, q});
    }
    std::sort(out.begin(), out.end(), [](const QueryEvent& a, const QueryEvent& b) {
        return a.issue_time < b.issue_time;
    });
    return out;
}

/// Seeded sample (without replacement) of object velocities for the analyzer.
inline std::vector<Vec2> sample_velocities(const std::vector<MovingPoint>& objects,
                                           std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(detail::derive_seed(seed, 3, 0));
    std::vector<Vec2> out;
    out.reserve(std::min(count, objects.size()));
    // Reservoir sampling keeps the pass deterministic and single-shot.
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (out.size() < count) {
            out.push_back(objects[i].vel);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            const std::size_t j = pick(rng);
            if (j < count) out[j] = objects[i].vel;
        }
    }
    return out;
}

// --- workload file format ---------------------------------------------------
//
//   #vpmoti-workload v1
//   O id x y vx vy tref
//   U t id x y vx vy
//   Q t kind shape-params t1 [t2] [qvx qvy]
//
// kind is slice|interval|moving; shape-params is `circle cx cy r` or
// `rect lx ly hx hy`. Fields are space-separated, reals printed with six
// decimal places.

inline constexpr const char* kWorkloadHeader = "#vpmoti-workload v1";

inline void save_workload(std::ostream& os, const Workload& w) {
    os << kWorkloadHeader << '\n';
    char buf[256];
    for (const MovingPoint& o : w.objects) {
        std::snprintf(buf, sizeof buf, "O %llu %.6f %.6f %.6f %.6f %.6f\n",
                      static_cast<unsigned long long>(o.id), o.pos.x, o.pos.y, o.vel.x,
                      o.vel.y, o.t_ref);
        os << buf;
    }
    for (const UpdateEvent& u : w.updates) {
        std::snprintf(buf, sizeof buf, "U %.6f %llu %.6f %.6f %.6f %.6f\n", u.t,
                      static_cast<unsigned long long>(u.object.id), u.object.pos.x,
                      u.object.pos.y, u.object.vel.x, u.object.vel.y);
        os << buf;
    }
    for (const QueryEvent& qe : w.queries) {
        const RangeQuery& q = qe.query;
        const char* kind = "slice";
        if (q.is_interval()) {
            kind = (q.qvel.x != 0 || q.qvel.y != 0) ? "moving" : "interval";
        }
        std::string shape;
        if (const auto* c = std::get_if<Circle>(&q.shape)) {
            std::snprintf(buf, sizeof buf, "circle %.6f %.6f %.6f", c->center.x,
                          c->center.y, c->radius);
            shape = buf;
        } else {
            const Rect& r = std::get<Rect>(q.shape);
            std::snprintf(buf, sizeof buf, "rect %.6f %.6f %.6f %.6f", r.lo.x, r.lo.y,
                          r.hi.x, r.hi.y);
            shape = buf;
        }
        std::snprintf(buf, sizeof buf, "Q %.6f %s %s %.6f", qe.issue_time, kind,
                      shape.c_str(), q.t_begin());
        os << buf;
        if (q.is_interval()) {
            std::snprintf(buf, sizeof buf, " %.6f", q.t_end());
            os << buf;
        }
        if (q.qvel.x != 0 || q.qvel.y != 0) {
            std::snprintf(buf, sizeof buf, " %.6f %.6f", q.qvel.x, q.qvel.y);
            os << buf;
        }
        os << '\n';
    }
}

inline Workload load_workload(std::istream& is) {
    Workload w;
    std::string line;
    if (!std::getline(is, line) || line != kWorkloadHeader) {
        throw std::runtime_error("load_workload: missing or unknown header");
    }
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        const auto fail = [&](const char* what) {
            throw std::runtime_error("load_workload: line " + std::to_string(line_no) +
                                     ": " + what);
        };
        char tag;
        ss >> tag;
        if (tag == 'O') {
            unsigned long long id;
            double x, y, vx, vy, tref;
            if (!(ss >> id >> x >> y >> vx >> vy >> tref)) fail("bad object record");
            w.objects.push_back(MovingPoint{id, Vec2{x, y}, Vec2{vx, vy}, tref});
            w.axis_labels.push_back(-1);
        } else if (tag == 'U') {
            unsigned long long id;
            double t, x, y, vx, vy;
            if (!(ss >> t >> id >> x >> y >> vx >> vy)) fail("bad update record");
            w.updates.push_back({t, MovingPoint{id, Vec2{x, y}, Vec2{vx, vy}, t}});
        } else if (tag == 'Q') {
            double t;
            std::string kind, shape_kind;
            if (!(ss >> t >> kind >> shape_kind)) fail("bad query record");
            QueryShape shape;
            if (shape_kind == "circle") {
                double cx, cy, r;
                if (!(ss >> cx >> cy >> r)) fail("bad circle");
                shape = Circle(Vec2{cx, cy}, r);
            } else if (shape_kind == "rect") {
                double lx, ly, hx, hy;
                if (!(ss >> lx >> ly >> hx >> hy)) fail("bad rect");
                shape = Rect(Vec2{lx, ly}, Vec2{hx, hy});
            } else {
                fail("unknown shape");
            }
            RangeQuery q;
            double t1;
            if (!(ss >> t1)) fail("missing t1");
            if (kind == "slice") {
                q = RangeQuery::slice(shape, t1);
            } else if (kind == "interval" || kind == "moving") {
                double t2;
                if (!(ss >> t2)) fail("missing t2");
                Vec2 qvel;
                if (kind == "moving") {
                    double qvx, qvy;
                    if (!(ss >> qvx >> qvy)) fail("missing query velocity");
                    qvel = Vec2{qvx, qvy};
                }
                q = RangeQuery::moving(shape, t1, t2, qvel);
            } else {
                fail("unknown query kind");
            }
            w.queries.push_back({t, q});
        } else {
            fail("unknown record tag");
        }
    }
    return w;
}

}  // namespace vpmoti
