#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <variant>

namespace vpmoti {

using ObjectId = std::uint64_t;
using Timestamp = double;

/// 2D vector over meters (or meters per timestamp when used as a velocity).
/// Constructors reject non-finite components.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw std::invalid_argument("Vec2: non-finite component");
        }
    }

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(Vec2 o) { return *this = *this + o; }

    bool operator==(const Vec2&) const = default;

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm_sq() const { return dot(*this); }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

/// Orthonormal frame used to express positions/velocities along a dominant
/// velocity axis. `u` is the frame's x-axis; `u_perp = (-u.y, u.x)` completes
/// a right-handed (det = +1) basis, so `to_frame` is a proper rotation.
class Rotation {
public:
    /// Builds the frame whose x-axis points along `axis` (normalized here).
    explicit Rotation(Vec2 axis) {
        const double n = axis.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw std::invalid_argument("Rotation: zero or non-finite axis");
        }
        u_ = Vec2{axis.x / n, axis.y / n};
        u_perp_ = Vec2{-u_.y, u_.x};
    }

    static Rotation identity() { return Rotation(Vec2{1.0, 0.0}); }

    Vec2 axis() const { return u_; }
    Vec2 axis_perp() const { return u_perp_; }

    /// World coordinates -> frame coordinates.
    Vec2 to_frame(Vec2 p) const { return {p.dot(u_), p.dot(u_perp_)}; }

    /// Frame coordinates -> world coordinates (exact inverse of to_frame).
    Vec2 from_frame(Vec2 q) const {
        return {u_.x * q.x + u_perp_.x * q.y, u_.y * q.x + u_perp_.y * q.y};
    }

private:
    Vec2 u_{1.0, 0.0};
    Vec2 u_perp_{0.0, 1.0};
};

/// A point object under the linear motion model: position `pos` at reference
/// time `t_ref`, moving with constant velocity `vel` until its next update.
struct MovingPoint {
    ObjectId id = 0;
    Vec2 pos;
    Vec2 vel;
    Timestamp t_ref = 0.0;
};

/// Position of `o` at time `t` under linear motion. Backward projection
/// (t < t_ref) is permitted; it is up to the caller to want it.
inline Vec2 position_at(const MovingPoint& o, Timestamp t) {
    return o.pos + o.vel * (t - o.t_ref);
}

/// Expresses an object's full kinematic state in a rotated frame. Linear
/// motion commutes with the rotation, so projecting then rotating equals
/// rotating then projecting.
inline MovingPoint rotate_to_frame(const MovingPoint& o, const Rotation& r) {
    return MovingPoint{o.id, r.to_frame(o.pos), r.to_frame(o.vel), o.t_ref};
}

inline MovingPoint rotate_from_frame(const MovingPoint& o, const Rotation& r) {
    return MovingPoint{o.id, r.from_frame(o.pos), r.from_frame(o.vel), o.t_ref};
}

/// Distance from velocity point `v` to the line through `mean` with unit
/// direction `u`. Equals |to_frame(v - mean).y| for the frame built on `u`.
inline double perp_distance(Vec2 v, Vec2 mean, Vec2 u) {
    const Vec2 c = v - mean;
    const Vec2 along = u * c.dot(u);
    return (c - along).norm();
}

/// Axis-aligned rectangle, closed on all sides.
struct Rect {
    Vec2 lo;
    Vec2 hi;

    Rect() = default;
    Rect(Vec2 lo_, Vec2 hi_) : lo(lo_), hi(hi_) {
        if (lo.x > hi.x || lo.y > hi.y) {
            throw std::invalid_argument("Rect: lo must not exceed hi");
        }
    }

    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
    double area() const { return width() * height(); }
    Vec2 center() const { return {(lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0}; }

    bool contains(Vec2 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }

    bool intersects(const Rect& o) const {
        return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y;
    }

    /// Smallest rectangle containing both.
    Rect union_with(const Rect& o) const {
        return Rect({std::min(lo.x, o.lo.x), std::min(lo.y, o.lo.y)},
                    {std::max(hi.x, o.hi.x), std::max(hi.y, o.hi.y)});
    }

    Vec2 clamp(Vec2 p) const {
        return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
    }
};

struct Circle {
    Vec2 center;
    double radius = 0.0;

    Circle() = default;
    Circle(Vec2 c, double r) : center(c), radius(r) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw std::invalid_argument("Circle: radius must be positive");
        }
    }

    Rect bounding_rect() const {
        return Rect(center - Vec2{radius, radius}, center + Vec2{radius, radius});
    }
};

using QueryShape = std::variant<Circle, Rect>;

struct TimeSlice {
    Timestamp t = 0.0;
};

struct TimeInterval {
    Timestamp t1 = 0.0;
    Timestamp t2 = 0.0;

    TimeInterval() = default;
    TimeInterval(Timestamp a, Timestamp b) : t1(a), t2(b) {
        if (t1 > t2) throw std::invalid_argument("TimeInterval: t1 > t2");
    }
};

using QueryTime = std::variant<TimeSlice, TimeInterval>;

/// Predictive range query. The shape is anchored at the start of the query
/// time; for moving queries it translates by `qvel * (t - t_begin)`.
struct RangeQuery {
    QueryShape shape;
    QueryTime time;
    Vec2 qvel;  // zero unless a moving query

    Timestamp t_begin() const {
        if (const auto* s = std::get_if<TimeSlice>(&time)) return s->t;
        return std::get<TimeInterval>(time).t1;
    }
    Timestamp t_end() const {
        if (const auto* s = std::get_if<TimeSlice>(&time)) return s->t;
        return std::get<TimeInterval>(time).t2;
    }
    bool is_interval() const { return std::holds_alternative<TimeInterval>(time); }

    /// Bounding rectangle of the shape at its anchor time.
    Rect shape_bounds() const {
        if (const auto* c = std::get_if<Circle>(&shape)) return c->bounding_rect();
        return std::get<Rect>(shape);
    }

    /// Bounding rectangle of everything the (possibly moving) shape covers
    /// over the whole query time.
    Rect swept_bounds() const {
        Rect b = shape_bounds();
        if (is_interval()) {
            const double span = t_end() - t_begin();
            const Vec2 shift = qvel * span;
            b = b.union_with(Rect(b.lo + shift, b.hi + shift));
        }
        return b;
    }

    static RangeQuery slice(QueryShape shape, Timestamp t) {
        return RangeQuery{std::move(shape), TimeSlice{t}, Vec2{}};
    }
    static RangeQuery interval(QueryShape shape, Timestamp t1, Timestamp t2) {
        return RangeQuery{std::move(shape), TimeInterval{t1, t2}, Vec2{}};
    }
    static RangeQuery moving(QueryShape shape, Timestamp t1, Timestamp t2, Vec2 qvel) {
        return RangeQuery{std::move(shape), TimeInterval{t1, t2}, qvel};
    }
};

namespace detail {

inline bool shape_contains(const QueryShape& shape, Vec2 offset, Vec2 p) {
    if (const auto* c = std::get_if<Circle>(&shape)) {
        return (p - (c->center + offset)).norm_sq() <= c->radius * c->radius;
    }
    const Rect& r = std::get<Rect>(shape);
    return Rect(r.lo + offset, r.hi + offset).contains(p);
}

// s-interval on which lo <= p + b*s <= hi holds; empty() marks no solution.
struct Span1D {
    double lo = 0.0, hi = -1.0;
    bool empty() const { return lo > hi; }
};

inline Span1D axis_span(double p, double b, double lo, double hi,
                        double s_min, double s_max) {
    if (b == 0.0) {
        if (p >= lo && p <= hi) return {s_min, s_max};
        return {};
    }
    double a = (lo - p) / b;
    double c = (hi - p) / b;
    if (a > c) std::swap(a, c);
    a = std::max(a, s_min);
    c = std::min(c, s_max);
    if (a > c) return {};
    return {a, c};
}

}  // namespace detail

/// Whether object `o` satisfies query `q`, evaluated in closed form.
///
/// Slice: shape membership of the projected position. Interval/moving: the
/// relative motion between object and shape is linear, so circle membership
/// reduces to minimizing a quadratic over the interval and rectangle
/// membership to intersecting per-axis linear inequality spans.
inline bool contains(const RangeQuery& q, const MovingPoint& o) {
    if (const auto* s = std::get_if<TimeSlice>(&q.time)) {
        return detail::shape_contains(q.shape, Vec2{}, position_at(o, s->t));
    }
    const auto& iv = std::get<TimeInterval>(q.time);
    const double span = iv.t2 - iv.t1;
    const Vec2 p1 = position_at(o, iv.t1);
    const Vec2 rel_vel = o.vel - q.qvel;

    if (const auto* c = std::get_if<Circle>(&q.shape)) {
        const Vec2 a = p1 - c->center;
        double s_best = 0.0;
        const double bb = rel_vel.norm_sq();
        if (bb > 0.0) {
            s_best = std::clamp(-a.dot(rel_vel) / bb, 0.0, span);
        }
        const Vec2 closest = a + rel_vel * s_best;
        return closest.norm_sq() <= c->radius * c->radius;
    }

    const Rect& r = std::get<Rect>(q.shape);
    const auto sx = detail::axis_span(p1.x, rel_vel.x, r.lo.x, r.hi.x, 0.0, span);
    if (sx.empty()) return false;
    const auto sy = detail::axis_span(p1.y, rel_vel.y, r.lo.y, r.hi.y, 0.0, span);
    if (sy.empty()) return false;
    return std::max(sx.lo, sy.lo) <= std::min(sx.hi, sy.hi);
}

/// The world the objects live in.
struct Domain {
    Rect extent{Vec2{0.0, 0.0}, Vec2{100000.0, 100000.0}};

    Domain() = default;
    explicit Domain(Rect r) : extent(r) {
        if (!(r.width() > 0.0) || !(r.height() > 0.0)) {
            throw std::invalid_argument("Domain: degenerate extent");
        }
    }
};

}  // namespace vpmoti
