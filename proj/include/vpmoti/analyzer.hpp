#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "vpmoti/geometry.hpp"

namespace vpmoti {

struct DegenerateSampleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PcaResult {
    Vec2 mean;
    Vec2 pc1;
    Vec2 pc2;
    double lambda1 = 0;
    double lambda2 = 0;
};

namespace detail {

// First-nonzero-component-positive convention, for deterministic output.
inline Vec2 sign_normalize(Vec2 v) {
    if (v.x < 0 || (v.x == 0 && v.y < 0)) return -v;
    return v;
}

}  // namespace detail

/// Closed-form eigen-decomposition of the mean-centered 2x2 covariance of
/// `points`. lambda1 >= lambda2; eigenvectors are unit and sign-normalized.
/// Throws DegenerateSampleError when all points coincide.
inline PcaResult pca2(std::span<const Vec2> points) {
    if (points.size() < 2) {
        throw std::invalid_argument("pca2: need at least 2 points");
    }
    const double n = static_cast<double>(points.size());
    Vec2 mean;
    for (const Vec2& p : points) mean += p;
    mean = mean * (1.0 / n);
    double a = 0, b = 0, c = 0;
    for (const Vec2& p : points) {
        const Vec2 d = p - mean;
        a += d.x * d.x;
        b += d.x * d.y;
        c += d.y * d.y;
    }
    a /= n;
    b /= n;
    c /= n;
    if (a == 0 && b == 0 && c == 0) {
        throw DegenerateSampleError("pca2: all points identical");
    }
    const double tr = a + c;
    const double disc = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4 * b * b));
    PcaResult r;
    r.mean = mean;
    r.lambda1 = (tr + disc) / 2;
    r.lambda2 = (tr - disc) / 2;
    Vec2 v1;
    if (b == 0) {
        v1 = (a >= c) ? Vec2{1, 0} : Vec2{0, 1};
    } else {
        // Two algebraically equivalent eigenvector forms; pick the better
        // conditioned one.
        const Vec2 cand1{r.lambda1 - c, b};
        const Vec2 cand2{b, r.lambda1 - a};
        v1 = (cand1.norm_sq() >= cand2.norm_sq()) ? cand1 : cand2;
    }
    const double n1 = v1.norm();
    r.pc1 = detail::sign_normalize(Vec2{v1.x / n1, v1.y / n1});
    r.pc2 = detail::sign_normalize(Vec2{-r.pc1.y, r.pc1.x});
    return r;
}

struct AnalyzerConfig {
    int max_iters = 100;
    std::uint64_t seed = 1;
    bool line_through_origin = false;  // measure axis distance to a line
                                       // through the origin instead of the
                                       // cluster mean
    int hist_buckets = 100;
    std::size_t hist_window = 100000;
};

/// A velocity cluster with its fitted axis.
struct DvaPartition {
    std::vector<std::uint32_t> members;  // indices into the analyzed sample
    std::vector<Vec2> points;
    Vec2 mean;
    Vec2 pc1;
    Vec2 pc2;
    double lambda1 = 0;
    double lambda2 = 0;
};

struct FindDvasResult {
    std::vector<DvaPartition> partitions;
    std::vector<int> assignment;  // per sample point
    int iterations = 0;
};

namespace detail {

inline void fit_partition(DvaPartition& p) {
    if (p.points.size() >= 2) {
        try {
            const PcaResult r = pca2(p.points);
            p.mean = r.mean;
            p.pc1 = r.pc1;
            p.pc2 = r.pc2;
            p.lambda1 = r.lambda1;
            p.lambda2 = r.lambda2;
            return;
        } catch (const DegenerateSampleError&) {
            // fall through to the point-mass fit
        }
    }
    // Single point or a point mass: any line through it fits exactly. Use
    // the direction toward the velocity-space origin so the axis stays
    // meaningful, falling back to the x-axis.
    p.mean = p.points.empty() ? Vec2{} : p.points.front();
    p.pc1 = (p.mean.norm() > 0) ? sign_normalize(p.mean * (1.0 / p.mean.norm()))
                                : Vec2{1, 0};
    p.pc2 = sign_normalize(Vec2{-p.pc1.y, p.pc1.x});
    p.lambda1 = p.lambda2 = 0;
}

inline double line_distance(const DvaPartition& p, Vec2 v, const AnalyzerConfig& cfg) {
    return perp_distance(v, cfg.line_through_origin ? Vec2{} : p.mean, p.pc1);
}

}  // namespace detail

/// Axis-seeking k-means: each partition is refit with PCA and every point is
/// reassigned to the partition whose first-PC line it is closest to, until no
/// point moves or max_iters is reached. Partitions that run empty are
/// reseeded with the point currently farthest from its own axis.
///
/// When given, `objective_trace` records the summed squared axis distance
/// after each reassignment pass.
inline FindDvasResult find_dvas(std::span<const Vec2> sample, int k,
                                const AnalyzerConfig& cfg = {},
                                std::vector<double>* objective_trace = nullptr) {
    if (k < 1) throw std::invalid_argument("find_dvas: k must be >= 1");
    if (sample.size() < static_cast<std::size_t>(2 * k)) {
        throw std::invalid_argument("find_dvas: sample smaller than 2k");
    }
    const std::size_t n = sample.size();
    std::vector<int> assignment(n);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (std::size_t i = 0; i < n; ++i) assignment[i] = pick(rng);

    std::vector<DvaPartition> parts(static_cast<std::size_t>(k));
    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        for (auto& p : parts) {
            p.members.clear();
            p.points.clear();
        }
        for (std::size_t i = 0; i < n; ++i) {
            parts[assignment[i]].members.push_back(static_cast<std::uint32_t>(i));
            parts[assignment[i]].points.push_back(sample[i]);
        }
        for (auto& p : parts) detail::fit_partition(p);

        // Reseed empty partitions with the worst-fitting point.
        for (int pi = 0; pi < k; ++pi) {
            if (!parts[pi].points.empty()) continue;
            double worst = -1;
            std::size_t worst_idx = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (parts[assignment[i]].points.size() <= 1) continue;
                const double d =
                    detail::line_distance(parts[assignment[i]], sample[i], cfg);
                if (d > worst) {
                    worst = d;
                    worst_idx = i;
                }
            }
            auto& src = parts[assignment[worst_idx]];
            const auto pos = std::find(src.members.begin(), src.members.end(),
                                       static_cast<std::uint32_t>(worst_idx));
            src.points.erase(src.points.begin() + (pos - src.members.begin()));
            src.members.erase(pos);
            assignment[worst_idx] = pi;
            parts[pi].members.push_back(static_cast<std::uint32_t>(worst_idx));
            parts[pi].points.push_back(sample[worst_idx]);
            detail::fit_partition(parts[pi]);
        }

        std::size_t moved = 0;
        double objective = 0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = detail::line_distance(parts[0], sample[i], cfg);
            for (int pi = 1; pi < k; ++pi) {
                const double d = detail::line_distance(parts[pi], sample[i], cfg);
                if (d < best_d) {
                    best_d = d;
                    best = pi;
                }
            }
            objective += best_d * best_d;
            if (best != assignment[i]) {
                assignment[i] = best;
                ++moved;
            }
        }
        if (objective_trace) objective_trace->push_back(objective);
        if (moved == 0) break;
    }

    // Refit on the final membership so the returned axes match it.
    for (auto& p : parts) {
        p.members.clear();
        p.points.clear();
    }
    for (std::size_t i = 0; i < n; ++i) {
        parts[assignment[i]].members.push_back(static_cast<std::uint32_t>(i));
        parts[assignment[i]].points.push_back(sample[i]);
    }
    for (auto& p : parts) detail::fit_partition(p);
    return {std::move(parts), std::move(assignment), iter + 1};
}

struct TauResult {
    double tau = 0;
    std::size_t n_d = 0;
    double v_perp_max = 0;                   // max perpendicular speed seen
    std::vector<double> edges;               // histogram bucket upper edges
    std::vector<std::size_t> cumulative;     // count of speeds <= edge
};

namespace detail {

// Minimizes n_d(b) * (b - v_ymax) over the bucket upper edges; ties go to
// the larger kept count.
inline TauResult minimize_tau(std::vector<double> edges,
                              std::vector<std::size_t> cumulative, double v_ymax) {
    TauResult r;
    r.v_perp_max = v_ymax;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < edges.size(); ++j) {
        const double obj =
            static_cast<double>(cumulative[j]) * (edges[j] - v_ymax);
        if (obj < best || (obj == best && cumulative[j] > r.n_d)) {
            best = obj;
            r.tau = edges[j];
            r.n_d = cumulative[j];
        }
    }
    r.edges = std::move(edges);
    r.cumulative = std::move(cumulative);
    return r;
}

inline TauResult tau_from_values(std::span<const double> speeds, int buckets,
                                 double degenerate_eps = 0.0) {
    TauResult r;
    if (speeds.empty()) {
        r.tau = std::numeric_limits<double>::infinity();
        return r;
    }
    const double vmax = *std::max_element(speeds.begin(), speeds.end());
    if (vmax <= degenerate_eps) {
        // Every point sits on the axis (up to rounding noise): keep all,
        // with the threshold at the noise ceiling so equally-noisy future
        // arrivals stay accepted.
        r.tau = (vmax == 0) ? 0.0 : degenerate_eps;
        r.n_d = speeds.size();
        r.v_perp_max = vmax;
        r.edges.assign(static_cast<std::size_t>(buckets), r.tau);
        r.cumulative.assign(static_cast<std::size_t>(buckets), speeds.size());
        return r;
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(buckets), 0);
    for (const double s : speeds) {
        const auto j = std::min<std::size_t>(
            counts.size() - 1, static_cast<std::size_t>(s / vmax * buckets));
        ++counts[j];
    }
    std::vector<double> edges(counts.size());
    std::vector<std::size_t> cum(counts.size());
    std::size_t running = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        edges[j] = vmax * static_cast<double>(j + 1) / buckets;
        running += counts[j];
        cum[j] = running;
    }
    return minimize_tau(std::move(edges), std::move(cum), vmax);
}

}  // namespace detail

/// Outlier threshold for a DVA partition: the perpendicular speeds of all
/// members feed a B-bucket equal-width cumulative histogram over [0, max];
/// the bucket edge minimizing n_d * (edge - v_ymax) becomes tau. v_ymax is
/// the partition's pre-removal maximum perpendicular speed.
inline TauResult compute_tau(const DvaPartition& p, const AnalyzerConfig& cfg = {}) {
    std::vector<double> speeds;
    speeds.reserve(p.points.size());
    double scale = 0;
    for (const Vec2& v : p.points) {
        speeds.push_back(detail::line_distance(p, v, cfg));
        scale = std::max(scale, v.norm());
    }
    // Perpendicular spreads at rounding-noise scale are collinear data, not
    // a distribution worth thresholding.
    return detail::tau_from_values(speeds, cfg.hist_buckets, 1e-12 * scale);
}

/// Running perpendicular-speed histogram over a sliding window of the most
/// recent observations. The bucket range doubles (with an exact rebuild from
/// the window) whenever an observation exceeds it, so the histogram tracks
/// drifting speed distributions.
class PerpSpeedHistogram {
public:
    explicit PerpSpeedHistogram(int buckets = 100, std::size_t window = 100000)
        : buckets_(buckets), window_(window), counts_(static_cast<std::size_t>(buckets), 0) {
        if (buckets < 1) throw std::invalid_argument("PerpSpeedHistogram: buckets < 1");
        if (window < 1) throw std::invalid_argument("PerpSpeedHistogram: window < 1");
    }

    void push(double speed) {
        if (speed < 0) throw std::invalid_argument("PerpSpeedHistogram: negative speed");
        if (speed > range_) {
            // Grow the range by doubling and re-bucket the window once.
            range_ = (range_ == 0) ? speed : range_;
            while (range_ < speed) range_ *= 2;
            std::fill(counts_.begin(), counts_.end(), 0);
            for (const double s : values_) ++counts_[bucket_of(s)];
        }
        values_.push_back(speed);
        ++counts_[bucket_of(speed)];
        if (values_.size() > window_) {
            --counts_[bucket_of(values_.front())];
            values_.pop_front();
        }
    }

    std::size_t total() const { return values_.size(); }
    double range_max() const { return range_; }
    int buckets() const { return buckets_; }
    double edge(int j) const {
        return range_ * static_cast<double>(j + 1) / buckets_;
    }

    /// tau over the current window, against the window's exact max speed.
    /// Spreads at or below `degenerate_eps` count as collinear (kept whole).
    TauResult compute_tau(double degenerate_eps = 0.0) const {
        TauResult r;
        if (values_.empty()) {
            r.tau = std::numeric_limits<double>::infinity();
            return r;
        }
        const double vmax = *std::max_element(values_.begin(), values_.end());
        if (vmax <= degenerate_eps) {
            r.tau = (vmax == 0) ? 0.0 : degenerate_eps;
            r.n_d = values_.size();
            r.v_perp_max = vmax;
            return r;
        }
        std::vector<double> edges(counts_.size());
        std::vector<std::size_t> cum(counts_.size());
        std::size_t running = 0;
        for (std::size_t j = 0; j < counts_.size(); ++j) {
            edges[j] = edge(static_cast<int>(j));
            running += counts_[j];
            cum[j] = running;
        }
        return detail::minimize_tau(std::move(edges), std::move(cum), vmax);
    }

private:
    std::size_t bucket_of(double s) const {
        if (range_ <= 0) return 0;
        return std::min<std::size_t>(counts_.size() - 1,
                                     static_cast<std::size_t>(s / range_ * buckets_));
    }

    int buckets_;
    std::size_t window_;
    double range_ = 0;
    std::deque<double> values_;
    std::vector<std::size_t> counts_;
};

/// A dominant velocity axis with its routing data.
struct DvaDescriptor {
    Rotation rot;  // axis() is the DVA direction
    Vec2 mean;
    double tau = 0;
    PerpSpeedHistogram perp_hist;
    bool line_through_origin = false;
    double noise_floor = 0;  // perpendicular spreads below this are collinear

    Vec2 axis() const { return rot.axis(); }
    Vec2 line_point() const { return line_through_origin ? Vec2{} : mean; }
    double perp_speed(Vec2 vel) const {
        return perp_distance(vel, line_point(), rot.axis());
    }
};

struct PartitionResult {
    std::vector<DvaDescriptor> dvas;
    std::vector<Vec2> outliers;
    std::vector<int> assignment;  // per sample point: dva index, or -1 outlier
    FindDvasResult clustering;    // pre-outlier-removal clustering
};

/// Full velocity-analyzer pipeline: cluster the sample into k axis
/// partitions, derive each partition's outlier threshold, move points beyond
/// it to the outlier set, and refit each axis on the survivors. Descriptor
/// histograms are seeded with the partition's perpendicular speeds against
/// the final axis so later threshold refreshes continue the same series.
inline PartitionResult velocity_partitioning(std::span<const Vec2> sample, int k,
                                             const AnalyzerConfig& cfg = {}) {
    PartitionResult result;
    result.clustering = find_dvas(sample, k, cfg);
    result.assignment = result.clustering.assignment;

    for (auto& p : result.clustering.partitions) {
        const TauResult tr = compute_tau(p, cfg);

        DvaPartition kept;
        for (std::size_t i = 0; i < p.points.size(); ++i) {
            if (detail::line_distance(p, p.points[i], cfg) > tr.tau) {
                result.outliers.push_back(p.points[i]);
                result.assignment[p.members[i]] = -1;
            } else {
                kept.members.push_back(p.members[i]);
                kept.points.push_back(p.points[i]);
            }
        }
        if (kept.points.size() >= 2) {
            detail::fit_partition(kept);
        } else {
            // Nothing (or one point) survived; keep the pre-removal axis.
            kept.mean = p.mean;
            kept.pc1 = p.pc1;
            kept.pc2 = p.pc2;
        }

        double scale = 0;
        for (const Vec2& v : p.points) scale = std::max(scale, v.norm());
        DvaDescriptor d{Rotation(kept.pc1), kept.mean, tr.tau,
                        PerpSpeedHistogram(cfg.hist_buckets, cfg.hist_window),
                        cfg.line_through_origin, 1e-12 * scale};
        for (const Vec2& v : p.points) d.perp_hist.push(d.perp_speed(v));
        result.dvas.push_back(std::move(d));
    }
    return result;
}

/// Scatter export of an analyzed sample: `vx,vy,partition_id` per point,
/// -1 marking outliers.
inline void export_partitions_csv(std::ostream& os, std::span<const Vec2> sample,
                                  std::span<const int> assignment) {
    os << "vx,vy,partition_id\n";
    char buf[96];
    for (std::size_t i = 0; i < sample.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%d\n", sample[i].x, sample[i].y,
                      assignment[i]);
        os << buf;
    }
}

}  // namespace vpmoti
