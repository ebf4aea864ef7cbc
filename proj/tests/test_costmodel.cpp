#include "vpmoti/costmodel.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "test_util.hpp"
#include "vpmoti/bxtree.hpp"

using namespace vpmoti;
using namespace vpmoti::costmodel;

namespace {

MovingRect random_rect(std::mt19937_64& rng, double pos_scale, double vel_scale) {
    std::uniform_real_distribution<double> up(-pos_scale, pos_scale);
    std::uniform_real_distribution<double> uv(-vel_scale, vel_scale);
    MovingRect r;
    for (int i = 0; i < 2; ++i) {
        double a = up(rng), b = up(rng);
        if (a > b) std::swap(a, b);
        r.r_lo[i] = a;
        r.r_hi[i] = b;
        double c = uv(rng), d = uv(rng);
        if (c > d) std::swap(c, d);
        r.v_lo[i] = c;
        r.v_hi[i] = d;
    }
    return r;
}

bool rects_overlap_at(const MovingRect& n, const MovingRect& q, double t) {
    for (int i = 0; i < 2; ++i) {
        const double n_lo = n.r_lo[i] + n.v_lo[i] * t;
        const double n_hi = n.r_hi[i] + n.v_hi[i] * t;
        const double q_lo = q.r_lo[i] + q.v_lo[i] * t;
        const double q_hi = q.r_hi[i] + q.v_hi[i] * t;
        if (n_lo > q_hi || q_lo > n_hi) return false;
    }
    return true;
}

bool point_in_rect_at(const MovingRect& r, double cx, double cy, double t) {
    return r.r_lo[0] + r.v_lo[0] * t <= cx && cx <= r.r_hi[0] + r.v_hi[0] * t &&
           r.r_lo[1] + r.v_lo[1] * t <= cy && cy <= r.r_hi[1] + r.v_hi[1] * t;
}

}  // namespace

TEST(TransformNode, PointQueryIsIdentity) {
    std::mt19937_64 rng(71);
    const MovingRect n = random_rect(rng, 100, 10);
    MovingRect q;  // stationary point at the origin
    const MovingRect t = transform_node(n, q);
    for (int i = 0; i < 2; ++i) {
        EXPECT_DOUBLE_EQ(t.r_lo[i], n.r_lo[i]);
        EXPECT_DOUBLE_EQ(t.r_hi[i], n.r_hi[i]);
        EXPECT_DOUBLE_EQ(t.v_lo[i], n.v_lo[i]);
        EXPECT_DOUBLE_EQ(t.v_hi[i], n.v_hi[i]);
    }
}

TEST(TransformNode, HandEvaluatedCase) {
    MovingRect n;  // stationary point at origin
    MovingRect q;
    q.r_lo[0] = -1;
    q.r_hi[0] = 1;
    q.r_lo[1] = -1;
    q.r_hi[1] = 1;
    q.v_lo[0] = 1;
    q.v_hi[0] = 1;  // rigid drift (1, 0)
    const MovingRect t = transform_node(n, q);
    EXPECT_DOUBLE_EQ(t.r_lo[0], -1);
    EXPECT_DOUBLE_EQ(t.r_hi[0], 1);
    EXPECT_DOUBLE_EQ(t.r_lo[1], -1);
    EXPECT_DOUBLE_EQ(t.r_hi[1], 1);
    EXPECT_DOUBLE_EQ(t.v_lo[0], -1);
    EXPECT_DOUBLE_EQ(t.v_hi[0], -1);
    EXPECT_DOUBLE_EQ(t.v_lo[1], 0);
    EXPECT_DOUBLE_EQ(t.v_hi[1], 0);
}

// N intersects Q at time t exactly when N' covers Q's initial center at t.
TEST(TransformNode, IntersectionEquivalenceBySampling) {
    std::mt19937_64 rng(72);
    for (int trial = 0; trial < 1000; ++trial) {
        const MovingRect n = random_rect(rng, 50, 20);
        const MovingRect q = random_rect(rng, 50, 20);
        const MovingRect np = transform_node(n, q);
        const double cx = (q.r_lo[0] + q.r_hi[0]) / 2;
        const double cy = (q.r_lo[1] + q.r_hi[1]) / 2;
        bool any_overlap = false, any_sweep = false;
        for (int s = 0; s <= 500; ++s) {
            const double t = s / 500.0;
            const bool overlap = rects_overlap_at(n, q, t);
            const bool sweep = point_in_rect_at(np, cx, cy, t);
            EXPECT_EQ(overlap, sweep) << "t=" << t;
            any_overlap |= overlap;
            any_sweep |= sweep;
        }
        EXPECT_EQ(any_overlap, any_sweep);
    }
}

TEST(SweepVolume, StaticUnitSquare) {
    MovingRect r;
    r.r_lo[0] = 0;
    r.r_hi[0] = 1;
    r.r_lo[1] = 0;
    r.r_hi[1] = 1;
    EXPECT_DOUBLE_EQ(sweep_volume(r, 1.0), 1.0);
}

TEST(SweepVolume, ExpandingUnitSquare) {
    MovingRect r;
    for (int i = 0; i < 2; ++i) {
        r.r_lo[i] = 0;
        r.r_hi[i] = 1;
        r.v_lo[i] = -1;
        r.v_hi[i] = 1;
    }
    // integral of (1+2t)^2 over [0,1] = 13/3
    EXPECT_NEAR(sweep_volume(r, 1.0), 13.0 / 3.0, 1e-12);
}

TEST(SweepVolume, MatchesTrapezoidQuadrature) {
    std::mt19937_64 rng(73);
    std::uniform_real_distribution<double> ut(0.1, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        const MovingRect r = random_rect(rng, 20, 5);
        const double T = ut(rng);
        const int steps = 10000;
        double quad = 0;
        for (int s = 0; s < steps; ++s) {
            const double t0 = T * s / steps, t1 = T * (s + 1) / steps;
            quad += (r.area_at(t0) + r.area_at(t1)) / 2 * (t1 - t0);
        }
        const double closed = sweep_volume(r, T);
        EXPECT_NEAR(closed, quad, 1e-6 * std::max(1.0, quad)) << "trial " << trial;
    }
}

TEST(ExpansionAlgebra, DeltaVZeroAtZeroHorizon) {
    EXPECT_DOUBLE_EQ(delta_v(ExpansionParams(10, 3, 0)), 0.0);
}

TEST(ExpansionAlgebra, CrossoverIdentity) {
    EXPECT_NEAR(crossover_time(2, 1), std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(delta_v(ExpansionParams(2, 1, std::sqrt(3.0))), 0.0, 1e-12);

    std::mt19937_64 rng(74);
    std::uniform_real_distribution<double> ud(0.1, 100.0);
    for (int i = 0; i < 100; ++i) {
        const double d = ud(rng), v = ud(rng);
        const double tc = crossover_time(d, v);
        EXPECT_NEAR(delta_v(ExpansionParams(d, v, tc)), 0.0,
                    1e-12 * d * d * std::max(1.0, tc));
    }
}

TEST(ExpansionAlgebra, VolumesMatchQuadratureOfAreas) {
    std::mt19937_64 rng(75);
    std::uniform_real_distribution<double> ud(0.5, 50.0);
    std::uniform_real_distribution<double> ut(0.0, 20.0);
    for (int i = 0; i < 100; ++i) {
        const ExpansionParams p(ud(rng), ud(rng), ut(rng));
        // Simpson integrates the quadratic/linear areas exactly.
        const auto simpson = [&](auto f) {
            const int n = 64;
            double sum = 0;
            for (int s = 0; s < n; ++s) {
                const double a = p.t_h * s / n, b = p.t_h * (s + 1) / n;
                sum += (b - a) / 6 * (f(a) + 4 * f((a + b) / 2) + f(b));
            }
            return sum;
        };
        const double vu = simpson([&](double t) { return area_unpart(p, t); });
        const double vp = simpson([&](double t) { return area_part(p, t); });
        EXPECT_NEAR(vol_unpart(p), vu, 1e-9 * std::max(1.0, vu));
        EXPECT_NEAR(vol_part(p), vp, 1e-9 * std::max(1.0, vp));
    }
}

TEST(ExpansionAlgebra, SignPattern) {
    std::mt19937_64 rng(76);
    std::uniform_real_distribution<double> ud(0.5, 50.0);
    for (int i = 0; i < 100; ++i) {
        const double d = ud(rng), v = ud(rng);
        const double tc = crossover_time(d, v);
        for (double frac : {0.1, 0.5, 0.9}) {
            EXPECT_GT(delta_v(ExpansionParams(d, v, frac * tc)), 0.0);
            EXPECT_LT(delta_v(ExpansionParams(d, v, (1.0 + frac) * tc)), 0.0);
        }
    }
}

TEST(ExpansionAlgebra, RateMatchesFiniteDifference) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ud(0.5, 50.0);
    for (int i = 0; i < 100; ++i) {
        const double d = ud(rng), v = ud(rng);
        for (int g = 0; g <= 20; ++g) {
            const double t_h = 1e-2 * std::pow(10.0, 4.0 * g / 20.0);  // log grid
            const double h = 1e-6 * std::max(1.0, t_h);
            const double fd = (delta_v(ExpansionParams(d, v, t_h + h)) -
                               delta_v(ExpansionParams(d, v, t_h - h))) /
                              (2 * h);
            const double an = delta_v_rate(ExpansionParams(d, v, t_h));
            EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an)));
        }
    }
}

TEST(TauCost, TrivialZeroes) {
    EXPECT_DOUBLE_EQ(tau_objective(0, 5, 10), 0.0);
    EXPECT_DOUBLE_EQ(tau_objective(123, 10, 10), 0.0);
}

TEST(TauCost, RateMatchesFiniteDifferenceOfTotal) {
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> up(0.5, 100.0);
    std::uniform_real_distribution<double> ut(0.0, 60.0);
    for (int i = 0; i < 1000; ++i) {
        const double v_ymax = up(rng);
        const TauCostParams p(up(rng), up(rng), v_ymax, 1000 + up(rng) * 100, up(rng));
        std::uniform_real_distribution<double> und(0.0, p.n);
        std::uniform_real_distribution<double> uvy(0.0, v_ymax);
        const double n_d = und(rng);
        const double v_yd = uvy(rng);
        const double t = ut(rng);
        const double h = 1e-4 * std::max(1.0, t);
        const double fd =
            (ta_total(t + h, n_d, p, v_yd) - ta_total(t - h, n_d, p, v_yd)) / (2 * h);
        const double an = ta_rate(t, n_d, p, v_yd);
        EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an))) << "case " << i;
    }
}

// For fixed params and t, ranking (n_d, v_yd) pairs by the rate equals
// ranking them by the reduced objective.
TEST(TauCost, ArgminEquivalence) {
    std::mt19937_64 rng(79);
    std::uniform_real_distribution<double> up(0.5, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double v_ymax = 50 + up(rng);
        const TauCostParams p(up(rng), up(rng), v_ymax, 10000, up(rng));
        const double t = up(rng) / 2;
        double best_rate = std::numeric_limits<double>::infinity();
        double best_obj = std::numeric_limits<double>::infinity();
        std::pair<int, int> argmin_rate{-1, -1}, argmin_obj{-1, -1};
        for (int i = 0; i <= 20; ++i) {
            for (int j = 0; j <= 20; ++j) {
                const double n_d = p.n * i / 20.0;
                const double v_yd = v_ymax * j / 20.0;
                const double rate = ta_rate(t, n_d, p, v_yd);
                const double obj = tau_objective(n_d, v_yd, v_ymax);
                if (rate < best_rate) {
                    best_rate = rate;
                    argmin_rate = {i, j};
                }
                if (obj < best_obj) {
                    best_obj = obj;
                    argmin_obj = {i, j};
                }
            }
        }
        EXPECT_EQ(argmin_rate, argmin_obj);
    }
}

// The node-access estimator ranks queries like the measured page accesses.
TEST(CostModelEstimator, CorrelatesWithMeasuredIo) {
    BxTreeConfig cfg;
    cfg.domain = Domain(Rect({0, 0}, {10000, 10000}));
    cfg.grid.levels = 6;
    cfg.hist_cells = 16;
    PageStore store(512);
    Pager pager(store, 64);
    BxTree<> tree(pager, cfg);

    std::mt19937_64 rng(82);
    std::uniform_real_distribution<double> ux(0.0, 10000.0);
    std::uniform_real_distribution<double> uv(-15.0, 15.0);
    for (ObjectId id = 1; id <= 20000; ++id) {
        tree.insert(MovingPoint{id, {ux(rng), ux(rng)}, {uv(rng), uv(rng)}, 0.0}, 0.0);
    }
    const double label = 60.0;
    const double scale = cfg.domain.extent.width();

    // Leaf MBR/VBR snapshot in domain-normalized coordinates.
    std::vector<MovingRect> leaves;
    tree.for_each_leaf_rect([&](std::size_t, const Rect& mbr, const Rect& vbr) {
        MovingRect r;
        r.r_lo[0] = mbr.lo.x / scale;
        r.r_hi[0] = mbr.hi.x / scale;
        r.r_lo[1] = mbr.lo.y / scale;
        r.r_hi[1] = mbr.hi.y / scale;
        r.v_lo[0] = vbr.lo.x / scale;
        r.v_hi[0] = vbr.hi.x / scale;
        r.v_lo[1] = vbr.lo.y / scale;
        r.v_hi[1] = vbr.hi.y / scale;
        leaves.push_back(r);
    });
    ASSERT_GT(leaves.size(), 10u);

    std::vector<double> predicted, measured;
    std::uniform_real_distribution<double> urad(500.0, 4000.0);
    std::uniform_real_distribution<double> uoff(0.0, 60.0);
    for (int i = 0; i < 200; ++i) {
        const double radius = urad(rng);
        const double t_q = label + uoff(rng);
        const Vec2 center{ux(rng), ux(rng)};
        const RangeQuery q = RangeQuery::interval(Circle(center, radius), label, t_q);

        MovingRect qr;
        qr.r_lo[0] = (center.x - radius) / scale;
        qr.r_hi[0] = (center.x + radius) / scale;
        qr.r_lo[1] = (center.y - radius) / scale;
        qr.r_hi[1] = (center.y + radius) / scale;
        // The model works on a horizon normalized to a unit interval: leaf
        // velocities absorb the horizon, the sweep runs over [0, 1].
        double estimate = 0;
        for (MovingRect leaf : leaves) {
            for (int a = 0; a < 2; ++a) {
                leaf.v_lo[a] *= t_q - label;
                leaf.v_hi[a] *= t_q - label;
            }
            estimate += sweep_volume(transform_node(leaf, qr), 1.0);
        }
        predicted.push_back(estimate);

        const IoStats before = pager.stats();
        tree.range_query_ids(q, label);
        measured.push_back(
            static_cast<double>((pager.stats() - before).logical_accesses));
    }
    const double rho = testutil::spearman(predicted, measured);
    EXPECT_GT(rho, 0.8) << "Spearman rho = " << rho;
}
