#include "vpmoti/workload.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <sstream>

#include "test_util.hpp"
#include "vpmoti/analyzer.hpp"

using namespace vpmoti;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

WorkloadConfig desk_config(std::size_t n, std::uint64_t seed) {
    WorkloadConfig cfg;
    cfg.n_objects = n;
    cfg.seed = seed;
    return cfg;
}

std::vector<AxisSpec> two_axes(double jitter) {
    return {{0.0, 0.5, jitter}, {90 * kDeg, 0.5, jitter}};
}

}  // namespace

TEST(GenObjects, ZeroJitterIsExactlyAxisAligned) {
    const auto w = gen_objects(desk_config(5000, 1), two_axes(0.0), 0.0);
    for (const MovingPoint& o : w.objects) {
        const double mini = std::min(std::abs(o.vel.x), std::abs(o.vel.y));
        EXPECT_LT(mini, 1e-9 * o.vel.norm());
    }
}

TEST(GenObjects, UniformDirectionsPassChiSquared) {
    const auto w = gen_objects(desk_config(100000, 2), {}, 1.0);
    std::array<int, 16> sectors{};
    for (const MovingPoint& o : w.objects) {
        const double a = std::atan2(o.vel.y, o.vel.x) + std::numbers::pi;
        int s = static_cast<int>(a / (2 * std::numbers::pi) * 16);
        s = std::clamp(s, 0, 15);
        ++sectors[static_cast<std::size_t>(s)];
    }
    const double expected = 100000.0 / 16.0;
    double chi2 = 0;
    for (const int obs : sectors) {
        chi2 += (obs - expected) * (obs - expected) / expected;
    }
    // chi-squared critical value, 15 degrees of freedom, alpha = 0.01
    EXPECT_LT(chi2, 30.578);
}

TEST(GenObjects, RespectsBounds) {
    const WorkloadConfig cfg = desk_config(20000, 3);
    const auto w = gen_objects(cfg, two_axes(2 * kDeg), 0.1);
    ASSERT_EQ(w.objects.size(), cfg.n_objects);
    for (const MovingPoint& o : w.objects) {
        EXPECT_TRUE(cfg.domain.extent.contains(o.pos));
        EXPECT_LE(o.vel.norm(), cfg.v_max + 1e-9);
        EXPECT_GT(o.vel.norm(), 0.0);
    }
}

TEST(GenUpdates, GapsBoundedAndOrdered) {
    const WorkloadConfig cfg = desk_config(2000, 4);
    auto w = gen_objects(cfg, two_axes(2 * kDeg), 0.1);
    const auto updates = gen_update_stream(cfg, w, two_axes(2 * kDeg), 0.1);
    std::map<ObjectId, double> last;
    double prev_t = 0;
    for (const UpdateEvent& u : updates) {
        EXPECT_GE(u.t, prev_t);
        prev_t = u.t;
        const auto it = last.find(u.object.id);
        const double gap = u.t - (it == last.end() ? 0.0 : it->second);
        EXPECT_GT(gap, 0.0);
        EXPECT_LE(gap, cfg.max_update_interval + 1e-9);
        last[u.object.id] = u.t;
        EXPECT_TRUE(cfg.domain.extent.contains(u.object.pos));
        EXPECT_DOUBLE_EQ(u.object.t_ref, u.t);
    }
}

TEST(GenUpdates, ExpectedCountMatchesRenewalRate) {
    const WorkloadConfig cfg = desk_config(10000, 5);
    auto w = gen_objects(cfg, two_axes(2 * kDeg), 0.1);
    const auto updates = gen_update_stream(cfg, w, two_axes(2 * kDeg), 0.1);
    const double expected =
        static_cast<double>(cfg.n_objects) * cfg.duration / (cfg.max_update_interval / 2);
    EXPECT_NEAR(static_cast<double>(updates.size()), expected, 0.05 * expected);
}

TEST(GenQueries, ZeroPredictiveMeansIssueTime) {
    WorkloadConfig cfg = desk_config(100, 6);
    cfg.predictive_time = 0;
    const auto qs = gen_queries(cfg, 1000, QueryShapeKind::circle, QueryTimeKind::slice);
    for (const QueryEvent& qe : qs) {
        EXPECT_DOUBLE_EQ(qe.query.t_begin(), qe.issue_time);
    }
}

TEST(GenQueries, DefaultRadiusAndRectSides) {
    const WorkloadConfig cfg = desk_config(100, 7);
    for (const QueryEvent& qe :
         gen_queries(cfg, 500, QueryShapeKind::circle, QueryTimeKind::slice)) {
        EXPECT_DOUBLE_EQ(std::get<Circle>(qe.query.shape).radius, 500.0);
    }
    for (const QueryEvent& qe :
         gen_queries(cfg, 500, QueryShapeKind::rect, QueryTimeKind::interval)) {
        const Rect& r = std::get<Rect>(qe.query.shape);
        EXPECT_NEAR(r.width(), 1000.0, 1e-8);
        EXPECT_NEAR(r.height(), 1000.0, 1e-8);
    }
}

TEST(GenQueries, MovingQueriesCarryVelocity) {
    const WorkloadConfig cfg = desk_config(100, 8);
    std::size_t nonzero = 0;
    for (const QueryEvent& qe :
         gen_queries(cfg, 200, QueryShapeKind::circle, QueryTimeKind::moving)) {
        EXPECT_TRUE(qe.query.is_interval());
        if (qe.query.qvel.norm() > 0) ++nonzero;
        EXPECT_LE(qe.query.t_end() - qe.issue_time, cfg.predictive_time + 1e-9);
    }
    EXPECT_EQ(nonzero, 200u);
}

TEST(Workload, DeterministicSerialization) {
    const auto make = [] {
        const WorkloadConfig cfg = desk_config(1500, 42);
        auto w = gen_objects(cfg, two_axes(2 * kDeg), 0.1);
        w.updates = gen_update_stream(cfg, w, two_axes(2 * kDeg), 0.1);
        w.queries = gen_queries(cfg, 200, QueryShapeKind::circle, QueryTimeKind::moving);
        std::ostringstream os;
        save_workload(os, w);
        return os.str();
    };
    const std::string a = make();
    const std::string b = make();
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("#vpmoti-workload v1"), std::string::npos);
}

TEST(Workload, FileRoundTrip) {
    const WorkloadConfig cfg = desk_config(300, 9);
    auto w = gen_objects(cfg, two_axes(2 * kDeg), 0.1);
    w.updates = gen_update_stream(cfg, w, two_axes(2 * kDeg), 0.1);
    w.queries = gen_queries(cfg, 50, QueryShapeKind::circle, QueryTimeKind::slice);
    auto more = gen_queries(cfg, 50, QueryShapeKind::rect, QueryTimeKind::moving);
    w.queries.insert(w.queries.end(), more.begin(), more.end());

    std::ostringstream os;
    save_workload(os, w);
    std::istringstream is(os.str());
    const Workload loaded = load_workload(is);
    EXPECT_EQ(loaded.objects.size(), w.objects.size());
    EXPECT_EQ(loaded.updates.size(), w.updates.size());
    EXPECT_EQ(loaded.queries.size(), w.queries.size());

    // Saving the loaded copy reproduces the file byte-for-byte.
    std::ostringstream os2;
    save_workload(os2, loaded);
    EXPECT_EQ(os.str(), os2.str());

    std::istringstream bad("not a workload\n");
    EXPECT_THROW(load_workload(bad), std::runtime_error);
}

TEST(Workload, SampleFeedsAxisRecovery) {
    const WorkloadConfig cfg = desk_config(20000, 10);
    const auto w = gen_objects(cfg, two_axes(4 * kDeg), 0.08);
    const auto sample = sample_velocities(w.objects, 10000, cfg.seed);
    ASSERT_EQ(sample.size(), 10000u);
    const FindDvasResult r = find_dvas(sample, 2);
    double best0 = 90, best90 = 90;
    for (const auto& p : r.partitions) {
        best0 = std::min(best0, testutil::axis_angle_deg(p.pc1, 0.0));
        best90 = std::min(best90, testutil::axis_angle_deg(p.pc1, 90 * kDeg));
    }
    EXPECT_LT(best0, 5.0);
    EXPECT_LT(best90, 5.0);
}
