#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "vpmoti/bplustree.hpp"
#include "vpmoti/geometry.hpp"
#include "vpmoti/storage.hpp"
#include "vpmoti/zorder.hpp"

namespace vpmoti {

struct GridConfig {
    int levels = 10;   // 2^levels x 2^levels cells over the domain
    int levels_x = 0;  // per-axis overrides when nonzero (anisotropic cells)
    int levels_y = 0;

    int lx() const { return levels_x > 0 ? levels_x : levels; }
    int ly() const { return levels_y > 0 ? levels_y : levels; }
};

struct BxTreeConfig {
    Domain domain;
    GridConfig grid;
    double max_update_interval = 120.0;
    int hist_cells = 64;
    std::size_t max_curve_runs = 1024;
};

struct TimeBucket {
    std::int64_t index = 0;
    Timestamp label_time = 0.0;
};

/// Per-axis velocity extremes of a set of objects.
struct VelocityBounds {
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    bool any = false;

    void include(Vec2 v) {
        if (!any) {
            min_x = max_x = v.x;
            min_y = max_y = v.y;
            any = true;
            return;
        }
        min_x = std::min(min_x, v.x);
        max_x = std::max(max_x, v.x);
        min_y = std::min(min_y, v.y);
        max_y = std::max(max_y, v.y);
    }

    void merge(const VelocityBounds& o) {
        if (!o.any) return;
        include(Vec2{o.min_x, o.min_y});
        include(Vec2{o.max_x, o.max_y});
    }
};

/// Grid histogram of per-cell min/max velocity per axis, recorded at the
/// object's position when it enters the index. Extremes never decay while
/// the owning time bucket lives; the histogram is discarded with its bucket.
class VelocityHistogram {
public:
    VelocityHistogram(Rect extent, int cells)
        : extent_(extent), cells_(cells), grid_(static_cast<std::size_t>(cells) * cells) {
        if (cells < 1) throw std::invalid_argument("VelocityHistogram: cells < 1");
    }

    int cells() const { return cells_; }

    void record(Vec2 pos, Vec2 vel) {
        cell_at(pos).include(vel);
        global_.include(vel);
    }

    /// Min/max velocity over every cell intersecting `region`.
    VelocityBounds bounds_over(const Rect& region) const {
        const auto [x0, y0] = cell_index(region.lo);
        const auto [x1, y1] = cell_index(region.hi);
        VelocityBounds b;
        for (int cy = y0; cy <= y1; ++cy) {
            for (int cx = x0; cx <= x1; ++cx) {
                b.merge(grid_[static_cast<std::size_t>(cy) * cells_ + cx]);
            }
        }
        return b;
    }

    const VelocityBounds& global() const { return global_; }

private:
    std::pair<int, int> cell_index(Vec2 p) const {
        const Vec2 c = extent_.clamp(p);
        const int cx = std::min(cells_ - 1, static_cast<int>((c.x - extent_.lo.x) /
                                                             extent_.width() * cells_));
        const int cy = std::min(cells_ - 1, static_cast<int>((c.y - extent_.lo.y) /
                                                             extent_.height() * cells_));
        return {cx, cy};
    }

    VelocityBounds& cell_at(Vec2 p) {
        const auto [cx, cy] = cell_index(p);
        return grid_[static_cast<std::size_t>(cy) * cells_ + cx];
    }

    Rect extent_;
    int cells_;
    std::vector<VelocityBounds> grid_;
    VelocityBounds global_;
};

/// Moving-object index over a B+-tree: object positions, projected to their
/// time bucket's label time, are mapped through a grid and a space-filling
/// curve into the (bucket, curve value) key space. Queries are answered by
/// enlarging the query window to each live bucket's label time using the
/// bucket's velocity histogram, decomposing the window into curve runs,
/// scanning them, and verifying every candidate exactly.
///
/// One writer or any number of readers at a time per instance; queries touch
/// the shared buffer, so concurrent use requires external serialization.
template <typename Curve = ZOrderCurve>
class BxTree {
public:
    BxTree(Pager& pager, BxTreeConfig config)
        : config_(config),
          curve_(config.grid.lx(), config.grid.ly()),
          tree_(pager),
          bucket_width_(config.max_update_interval / 2.0) {
        if (config.max_update_interval <= 0) {
            throw std::invalid_argument("BxTree: max_update_interval must be positive");
        }
    }

    const BxTreeConfig& config() const { return config_; }
    std::size_t size() const { return locator_.size(); }
    double bucket_width() const { return bucket_width_; }

    /// The time bucket whose half-open span [i*w, (i+1)*w) contains t; its
    /// label time is the span's upper boundary.
    TimeBucket bucket_for(Timestamp t) const {
        const auto idx = static_cast<std::int64_t>(std::floor(t / bucket_width_));
        return {idx, static_cast<double>(idx + 1) * bucket_width_};
    }

    void insert(const MovingPoint& o, Timestamp now) {
        if (locator_.contains(o.id)) {
            throw std::logic_error("BxTree: duplicate object id");
        }
        const TimeBucket bucket = bucket_for(now);
        const Vec2 pos_label = position_at(o, bucket.label_time);
        const std::uint64_t key = pack_key(bucket.index, curve_value(pos_label));
        tree_.insert({key, o.id, pos_label.x, pos_label.y, o.vel.x, o.vel.y});
        locator_.emplace(o.id, key);
        BucketInfo& info = bucket_info(bucket.index);
        info.count += 1;
        info.hist.record(position_at(o, now), o.vel);
    }

    void erase(ObjectId id) {
        const auto it = locator_.find(id);
        if (it == locator_.end()) {
            throw std::out_of_range("BxTree: unknown id (locator desynchronized)");
        }
        const std::uint64_t key = it->second;
        if (!tree_.erase(key, id)) {
            throw std::logic_error("BxTree: entry missing (locator desynchronized)");
        }
        locator_.erase(it);
        const std::int64_t bidx = static_cast<std::int64_t>(key >> kCurveBits);
        const auto bit = buckets_.find(bidx);
        if (--bit->second.count == 0) {
            buckets_.erase(bit);  // histogram dies with its bucket
        }
    }

    void update(const MovingPoint& o, Timestamp now) {
        erase(o.id);
        insert(o, now);
    }

    bool contains_id(ObjectId id) const { return locator_.contains(id); }

    /// Query window expanded from query time to `label_time`.
    ///
    /// Starts from the bucket's global velocity extremes (which always cover
    /// every stored object) and then tightens twice using the histogram cells
    /// the current window covers, inflated by the worst-case offset between
    /// an object's recorded position and its stored label-time position.
    /// Tightening from a covering window keeps the no-false-negative
    /// guarantee: any matching object's stored position lies in the window,
    /// so its velocity record lies in the inflated window and stays counted.
    Rect enlarge_query(const RangeQuery& q, Timestamp label_time,
                       const VelocityHistogram& hist) const {
        const Rect window = q.swept_bounds();
        const double d1 = q.t_begin() - label_time;
        const double d2 = q.t_end() - label_time;
        const VelocityBounds& global = hist.global();
        if (!global.any) return window;
        Rect enlarged = expand(window, global, d1, d2);
        const double drift_x =
            bucket_width_ * std::max(std::abs(global.min_x), std::abs(global.max_x));
        const double drift_y =
            bucket_width_ * std::max(std::abs(global.min_y), std::abs(global.max_y));
        for (int pass = 0; pass < 2; ++pass) {
            const Rect probe(enlarged.lo - Vec2{drift_x, drift_y},
                             enlarged.hi + Vec2{drift_x, drift_y});
            const VelocityBounds b = hist.bounds_over(probe);
            if (!b.any) return window;
            enlarged = expand(window, b, d1, d2);
        }
        return enlarged;
    }

    /// Exact query answer: pre-filter candidates verified with contains().
    /// Returned states carry the stored label-time position (t_ref = label).
    std::vector<MovingPoint> range_query(const RangeQuery& q, Timestamp now) {
        std::vector<MovingPoint> out;
        visit_candidates(q, now, [&](const MovingPoint& mp) {
            if (contains(q, mp)) out.push_back(mp);
        });
        return out;
    }

    std::set<ObjectId> range_query_ids(const RangeQuery& q, Timestamp now) {
        std::set<ObjectId> out;
        visit_candidates(q, now, [&](const MovingPoint& mp) {
            if (contains(q, mp)) out.insert(mp.id);
        });
        return out;
    }

    /// Pre-filter candidate set (enlarged window hits before verification).
    std::vector<MovingPoint> range_candidates(const RangeQuery& q, Timestamp now) {
        std::vector<MovingPoint> out;
        visit_candidates(q, now, [&](const MovingPoint& mp) { out.push_back(mp); });
        return out;
    }

    std::vector<std::int64_t> active_buckets() const {
        std::vector<std::int64_t> out;
        for (const auto& [idx, info] : buckets_) out.push_back(idx);
        return out;
    }

    const VelocityHistogram* bucket_histogram(std::int64_t bucket_index) const {
        const auto it = buckets_.find(bucket_index);
        return it == buckets_.end() ? nullptr : &it->second.hist;
    }

    /// Visits every stored object state (t_ref = its bucket label time).
    template <typename F>
    void for_each_entry(F&& f) const {
        tree_.for_each_leaf([&](const std::vector<LeafEntry>& entries) {
            for (const LeafEntry& e : entries) {
                f(MovingPoint{e.id, Vec2{e.px, e.py}, Vec2{e.vx, e.vy},
                              label_of(static_cast<std::int64_t>(e.key >> kCurveBits))});
            }
        });
    }

    /// Visits (entry count, position MBR, velocity VBR) of each non-empty leaf.
    template <typename F>
    void for_each_leaf_rect(F&& f) const {
        tree_.for_each_leaf([&](const std::vector<LeafEntry>& entries) {
            if (entries.empty()) return;
            Vec2 plo{entries[0].px, entries[0].py}, phi = plo;
            Vec2 vlo{entries[0].vx, entries[0].vy}, vhi = vlo;
            for (const LeafEntry& e : entries) {
                plo = Vec2{std::min(plo.x, e.px), std::min(plo.y, e.py)};
                phi = Vec2{std::max(phi.x, e.px), std::max(phi.y, e.py)};
                vlo = Vec2{std::min(vlo.x, e.vx), std::min(vlo.y, e.vy)};
                vhi = Vec2{std::max(vhi.x, e.vx), std::max(vhi.y, e.vy)};
            }
            f(entries.size(), Rect(plo, phi), Rect(vlo, vhi));
        });
    }

    BPlusTree::TreeStats tree_stats() const { return tree_.stats(); }

    /// Structural audit: B+-tree invariants plus locator/tree consistency.
    void validate() const {
        tree_.validate();
        if (tree_.size() != locator_.size()) {
            throw std::logic_error("BxTree: tree/locator size mismatch");
        }
        std::size_t bucket_total = 0;
        for (const auto& [idx, info] : buckets_) bucket_total += info.count;
        if (bucket_total != locator_.size()) {
            throw std::logic_error("BxTree: bucket count mismatch");
        }
        std::size_t found = 0;
        tree_.for_each_leaf([&](const std::vector<LeafEntry>& entries) {
            for (const LeafEntry& e : entries) {
                const auto it = locator_.find(e.id);
                if (it == locator_.end() || it->second != e.key) {
                    throw std::logic_error("BxTree: locator desynchronized");
                }
                ++found;
            }
        });
        if (found != locator_.size()) {
            throw std::logic_error("BxTree: unreachable locator entries");
        }
    }

private:
    static constexpr int kCurveBits = 40;

    struct BucketInfo {
        std::size_t count = 0;
        VelocityHistogram hist;
    };

    BucketInfo& bucket_info(std::int64_t idx) {
        auto it = buckets_.find(idx);
        if (it == buckets_.end()) {
            it = buckets_
                     .emplace(idx, BucketInfo{0, VelocityHistogram(config_.domain.extent,
                                                                   config_.hist_cells)})
                     .first;
        }
        return it->second;
    }

    Timestamp label_of(std::int64_t bucket_index) const {
        return static_cast<double>(bucket_index + 1) * bucket_width_;
    }

    std::uint64_t pack_key(std::int64_t bucket_index, std::uint64_t curve) const {
        if (bucket_index < 0 || bucket_index >= (std::int64_t{1} << 23)) {
            throw std::out_of_range("BxTree: bucket index out of key range");
        }
        return (static_cast<std::uint64_t>(bucket_index) << kCurveBits) | curve;
    }

    std::pair<std::uint32_t, std::uint32_t> cell_of(Vec2 p) const {
        const Rect& d = config_.domain.extent;
        const Vec2 c = d.clamp(p);
        const std::uint32_t nx = curve_.cells_x();
        const std::uint32_t ny = curve_.cells_y();
        const auto cx = std::min<std::uint32_t>(
            nx - 1, static_cast<std::uint32_t>((c.x - d.lo.x) / d.width() * nx));
        const auto cy = std::min<std::uint32_t>(
            ny - 1, static_cast<std::uint32_t>((c.y - d.lo.y) / d.height() * ny));
        return {cx, cy};
    }

    std::uint64_t curve_value(Vec2 p) const {
        const auto [cx, cy] = cell_of(p);
        return curve_.encode(cx, cy);
    }

    // Reading through a run gap costs the gap's expected leaf pages; a fresh
    // probe costs a root-to-leaf descent. Merging whenever the gap is the
    // cheaper side keeps fragmented curve covers from being descent-bound.
    std::vector<CurveRun> plan_runs(std::vector<CurveRun> runs,
                                    std::size_t bucket_count) const {
        if (runs.size() <= 1) return runs;
        const double total_cells =
            std::pow(2.0, config_.grid.lx() + config_.grid.ly());
        const double entries_per_cell = static_cast<double>(bucket_count) / total_cells;
        const double gap_budget = static_cast<double>(tree_.height()) *
                                  static_cast<double>(tree_.leaf_capacity()) /
                                  std::max(entries_per_cell, 1e-300);
        std::vector<CurveRun> planned;
        planned.push_back(runs.front());
        for (std::size_t i = 1; i < runs.size(); ++i) {
            const double gap = static_cast<double>(runs[i].lo - planned.back().hi - 1);
            if (gap <= gap_budget) {
                planned.back().hi = runs[i].hi;
            } else {
                planned.push_back(runs[i]);
            }
        }
        return planned;
    }

    template <typename F>
    void visit_candidates(const RangeQuery& q, Timestamp /*now*/, F&& f) {
        for (const auto& [bidx, info] : buckets_) {
            const Timestamp label = label_of(bidx);
            const Rect window = enlarge_query(q, label, info.hist);
            const auto [x0, y0] = cell_of(window.lo);
            const auto [x1, y1] = cell_of(window.hi);
            const auto runs = plan_runs(
                curve_.cover(CellRect{x0, y0, x1, y1}, config_.max_curve_runs),
                info.count);
            for (const CurveRun& run : runs) {
                tree_.scan(pack_key(bidx, run.lo), 0, pack_key(bidx, run.hi),
                           ~std::uint64_t{0}, [&](const LeafEntry& e) {
                               f(MovingPoint{e.id, Vec2{e.px, e.py},
                                             Vec2{e.vx, e.vy}, label});
                           });
            }
        }
    }

    static Rect expand(const Rect& w, const VelocityBounds& b, double d1, double d2) {
        const auto lo_shift = [](double vmin, double vmax, double a, double c) {
            return std::max(std::max(vmin * a, vmin * c), std::max(vmax * a, vmax * c));
        };
        const auto hi_shift = [](double vmin, double vmax, double a, double c) {
            return std::min(std::min(vmin * a, vmin * c), std::min(vmax * a, vmax * c));
        };
        return Rect(
            Vec2{w.lo.x - lo_shift(b.min_x, b.max_x, d1, d2),
                 w.lo.y - lo_shift(b.min_y, b.max_y, d1, d2)},
            Vec2{w.hi.x - hi_shift(b.min_x, b.max_x, d1, d2),
                 w.hi.y - hi_shift(b.min_y, b.max_y, d1, d2)});
    }

    BxTreeConfig config_;
    Curve curve_;
    BPlusTree tree_;
    double bucket_width_;
    std::map<std::int64_t, BucketInfo> buckets_;
    std::unordered_map<ObjectId, std::uint64_t> locator_;
};

}  // namespace vpmoti
