#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "vpmoti/geometry.hpp"

namespace testutil {

inline vpmoti::Vec2 random_unit(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
    const double a = u(rng);
    return {std::cos(a), std::sin(a)};
}

inline vpmoti::Vec2 random_vec(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng)};
}

/// Acute angle between a direction and an axis (axes are undirected), degrees.
inline double axis_angle_deg(vpmoti::Vec2 u, double axis_rad) {
    const double ang = std::atan2(u.y, u.x);
    double diff = std::fmod(std::abs(ang - axis_rad), std::numbers::pi);
    diff = std::min(diff, std::numbers::pi - diff);
    return diff * 180.0 / std::numbers::pi;
}

/// Spearman rank correlation (average ranks on ties).
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return v[a] < v[b];
        });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2 + 1;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(xs), ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double num = 0, dx = 0, dy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    return num / std::sqrt(dx * dy);
}

}  // namespace testutil
