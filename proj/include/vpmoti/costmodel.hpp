#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vpmoti::costmodel {

/// A moving/expanding rectangle: position bounds plus per-axis velocity
/// bounds of its lower and upper edges.
struct MovingRect {
    double r_lo[2] = {0, 0};
    double r_hi[2] = {0, 0};
    double v_lo[2] = {0, 0};
    double v_hi[2] = {0, 0};

    void check() const {
        for (int i = 0; i < 2; ++i) {
            if (r_lo[i] > r_hi[i] || v_lo[i] > v_hi[i]) {
                throw std::invalid_argument("MovingRect: inverted bounds");
            }
        }
    }

    double extent(int axis, double t = 0) const {
        return (r_hi[axis] + v_hi[axis] * t) - (r_lo[axis] + v_lo[axis] * t);
    }

    /// Extent clamped at zero once the rectangle inverts.
    double area_at(double t) const {
        return std::max(0.0, extent(0, t)) * std::max(0.0, extent(1, t));
    }
};

/// Node N inflated by half the query extent per axis, with the query's edge
/// velocities subtracted, so that "N intersects Q during the interval"
/// becomes "N' sweeps over Q's center point".
inline MovingRect transform_node(const MovingRect& n, const MovingRect& q) {
    n.check();
    q.check();
    MovingRect out;
    for (int i = 0; i < 2; ++i) {
        const double half_q = (q.r_hi[i] - q.r_lo[i]) / 2;
        out.r_lo[i] = n.r_lo[i] - half_q;
        out.r_hi[i] = n.r_hi[i] + half_q;
        out.v_lo[i] = n.v_lo[i] - q.v_hi[i];
        out.v_hi[i] = n.v_hi[i] - q.v_lo[i];
    }
    return out;
}

/// Closed-form volume of the region the rectangle sweeps over [0, q_T]:
/// the area is quadratic in t, so the integral is cubic; an axis that
/// inverts contributes zero area past its inversion time.
inline double sweep_volume(const MovingRect& np, double q_t) {
    np.check();
    if (q_t < 0) throw std::invalid_argument("sweep_volume: negative interval");
    double t_end = q_t;
    for (int i = 0; i < 2; ++i) {
        const double w0 = np.extent(i, 0);
        const double dv = np.v_hi[i] - np.v_lo[i];
        if (dv < 0) t_end = std::min(t_end, -w0 / dv);
    }
    if (t_end <= 0) return 0;
    const double w0 = np.extent(0, 0), a = np.v_hi[0] - np.v_lo[0];
    const double h0 = np.extent(1, 0), b = np.v_hi[1] - np.v_lo[1];
    // integral of (w0 + a t)(h0 + b t) dt from 0 to t_end
    const double c2 = w0 * b + h0 * a;
    return w0 * h0 * t_end + c2 * t_end * t_end / 2 +
           a * b * t_end * t_end * t_end / 3;
}

/// Node side length d, shared top speed v, predictive horizon t_h: the
/// simplified two-axis setting the expansion comparison is made in.
struct ExpansionParams {
    double d = 0;
    double v = 0;
    double t_h = 0;

    ExpansionParams(double d_, double v_, double t_h_) : d(d_), v(v_), t_h(t_h_) {
        if (!(d > 0) || !(v > 0) || t_h < 0) {
            throw std::invalid_argument("ExpansionParams: require d>0, v>0, t_h>=0");
        }
    }
};

/// (d + 2vt)^2 — node search area when it expands along both axes.
inline double area_unpart(const ExpansionParams& p, double t) {
    const double s = p.d + 2 * p.v * t;
    return s * s;
}

/// 2d^2 + 4dvt — combined area of two nodes each expanding along one axis.
inline double area_part(const ExpansionParams& p, double t) {
    return 2 * p.d * p.d + 4 * p.d * p.v * t;
}

/// d^2 t_h + 2dv t_h^2 + (4/3) v^2 t_h^3.
inline double vol_unpart(const ExpansionParams& p) {
    return p.d * p.d * p.t_h + 2 * p.d * p.v * p.t_h * p.t_h +
           4.0 / 3.0 * p.v * p.v * p.t_h * p.t_h * p.t_h;
}

/// 2d^2 t_h + 2dv t_h^2.
inline double vol_part(const ExpansionParams& p) {
    return 2 * p.d * p.d * p.t_h + 2 * p.d * p.v * p.t_h * p.t_h;
}

/// vol_part - vol_unpart = d^2 t_h - (4/3) v^2 t_h^3; positive while the
/// one-axis layout is ahead, negative past the crossover horizon.
inline double delta_v(const ExpansionParams& p) {
    return p.d * p.d * p.t_h - 4.0 / 3.0 * p.v * p.v * p.t_h * p.t_h * p.t_h;
}

/// d/dt_h of delta_v: d^2 - 4 v^2 t_h^2.
inline double delta_v_rate(const ExpansionParams& p) {
    return p.d * p.d - 4 * p.v * p.v * p.t_h * p.t_h;
}

/// Horizon beyond which the two-axis search volume exceeds the one-axis
/// volume: d*sqrt(3) / (2v).
inline double crossover_time(double d, double v) {
    if (!(d > 0) || !(v > 0)) {
        throw std::invalid_argument("crossover_time: require d>0, v>0");
    }
    return d * std::sqrt(3.0) / (2 * v);
}

/// Leaf-node geometry and speed bounds feeding the threshold cost function.
struct TauCostParams {
    double d = 0;       // transformed leaf-node side length
    double v_xmax = 0;  // max along-axis speed
    double v_ymax = 0;  // max perpendicular speed over the whole partition
    double n = 0;       // object count
    double n_l = 0;     // average objects per leaf

    TauCostParams(double d_, double v_xmax_, double v_ymax_, double n_, double n_l_)
        : d(d_), v_xmax(v_xmax_), v_ymax(v_ymax_), n(n_), n_l(n_l_) {
        if (!(d > 0) || !(v_xmax > 0) || !(v_ymax > 0) || !(n > 0) || !(n_l > 0)) {
            throw std::invalid_argument("TauCostParams: all fields must be positive");
        }
    }
};

/// Combined area of the transformed leaf nodes of the axis partition
/// (n_d objects, perpendicular speed bound v_yd) and the outlier partition
/// (the remaining n - n_d at v_ymax), weighted by leaf counts.
inline double ta_total(double t, double n_d, const TauCostParams& p, double v_yd) {
    const double dva = n_d / p.n_l * (p.d + 2 * p.v_xmax * t) * (p.d + 2 * v_yd * t);
    const double out =
        (p.n - n_d) / p.n_l * (p.d + 2 * p.v_xmax * t) * (p.d + 2 * p.v_ymax * t);
    return dva + out;
}

/// d/dt of ta_total.
inline double ta_rate(double t, double n_d, const TauCostParams& p, double v_yd) {
    return 2 * n_d / p.n_l * ((v_yd - p.v_ymax) * (p.d + 4 * p.v_xmax * t)) +
           2 * p.n / p.n_l *
               (p.d * p.v_ymax + p.v_xmax * (p.d + 4 * p.v_ymax * t));
}

/// The part of ta_rate that varies with the threshold choice; minimizing it
/// over (n_d, v_yd) pairs is equivalent to minimizing ta_rate.
inline double tau_objective(double n_d, double v_yd, double v_ymax) {
    return n_d * (v_yd - v_ymax);
}

}  // namespace vpmoti::costmodel
