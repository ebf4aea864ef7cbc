#pragma once

#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "vpmoti/analyzer.hpp"
#include "vpmoti/bxtree.hpp"
#include "vpmoti/geometry.hpp"
#include "vpmoti/storage.hpp"

namespace vpmoti {

struct VpIndexConfig {
    Domain domain;
    GridConfig grid;
    double max_update_interval = 120.0;
    int hist_cells = 64;
    std::size_t max_curve_runs = 1024;
    std::size_t page_size = 4096;
    std::size_t buffer_pages = 50;
    int k = 2;
    std::size_t refresh_period = 10000;  // updates between tau refreshes; 0 disables
    std::optional<double> fixed_tau;     // overrides computed thresholds (sweeps)
    // Axis trees keep the full cross-axis resolution but use cells this many
    // levels coarser along the motion axis, so enlarged windows (long and
    // thin in the rotated frame) decompose into few curve runs over leaf
    // blocks of matching shape.
    int dva_axis_coarsening = 3;
    AnalyzerConfig analyzer;

    BxTreeConfig tree_config(Domain d) const {
        return BxTreeConfig{d, grid, max_update_interval, hist_cells, max_curve_runs};
    }

    BxTreeConfig dva_tree_config(Domain d) const {
        BxTreeConfig cfg = tree_config(d);
        cfg.grid.levels_x = std::max(1, cfg.grid.lx() - dva_axis_coarsening);
        cfg.grid.levels_y = cfg.grid.ly();
        return cfg;
    }
};

/// A plain single-tree index with its own store and buffer; the baseline the
/// partitioned index is measured against.
class UnpartitionedIndex {
public:
    explicit UnpartitionedIndex(const VpIndexConfig& cfg)
        : store_(cfg.page_size),
          pager_(store_, cfg.buffer_pages),
          tree_(pager_, cfg.tree_config(cfg.domain)) {}

    void insert(const MovingPoint& o, Timestamp now) { tree_.insert(o, now); }
    void erase(ObjectId id) { tree_.erase(id); }
    void update(const MovingPoint& o, Timestamp now) { tree_.update(o, now); }
    std::set<ObjectId> range_query(const RangeQuery& q, Timestamp now) {
        return tree_.range_query_ids(q, now);
    }

    std::size_t size() const { return tree_.size(); }
    const IoStats& stats() const { return pager_.stats(); }
    void reset_stats() { pager_.reset_stats(); }
    void validate() const { tree_.validate(); }
    BxTree<>& tree() { return tree_; }

private:
    PageStore store_;
    Pager pager_;
    BxTree<> tree_;
};

/// Velocity-partitioned moving-object index: one rotated tree per dominant
/// velocity axis plus an outlier tree in the world frame, behind a locator
/// that maps each object to the tree holding it. All trees share one store
/// and one buffer so I/O comparisons against a single tree are like-for-like.
///
/// Thread contract: one writer or any number of readers; every public
/// operation is atomic, so a concurrent query sees an update either entirely
/// applied or not at all (never a half-moved object).
class VpIndex {
public:
    /// Analyzes the velocity sample and builds the (empty) partition trees.
    VpIndex(std::span<const Vec2> sample, const VpIndexConfig& cfg)
        : cfg_(cfg), store_(cfg.page_size), pager_(store_, cfg.buffer_pages) {
        PartitionResult analysis = velocity_partitioning(sample, cfg.k, cfg.analyzer);
        analysis_assignment_ = std::move(analysis.assignment);
        dvas_ = std::move(analysis.dvas);
        if (cfg.fixed_tau) {
            for (auto& d : dvas_) d.tau = *cfg.fixed_tau;
        }
        for (const DvaDescriptor& d : dvas_) {
            trees_.push_back(std::make_unique<BxTree<>>(
                pager_, cfg.dva_tree_config(Domain(rotated_domain(cfg.domain, d.rot)))));
        }
        outlier_tree_ = std::make_unique<BxTree<>>(pager_, cfg.tree_config(cfg.domain));
    }

    int dva_count() const { return static_cast<int>(dvas_.size()); }
    int outlier_partition() const { return dva_count(); }
    const std::vector<DvaDescriptor>& dvas() const { return dvas_; }
    const std::vector<int>& analysis_assignment() const { return analysis_assignment_; }

    std::size_t size() const { return locator_.size(); }
    const IoStats& stats() const { return pager_.stats(); }
    void reset_stats() { pager_.reset_stats(); }

    /// Nearest axis by perpendicular velocity distance, and that distance.
    std::pair<int, double> nearest_dva(Vec2 vel) const {
        int best = 0;
        double best_d = dvas_[0].perp_speed(vel);
        for (int i = 1; i < dva_count(); ++i) {
            const double d = dvas_[static_cast<std::size_t>(i)].perp_speed(vel);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return {best, best_d};
    }

    void insert(const MovingPoint& o, Timestamp now) {
        const std::scoped_lock lock(mu_);
        insert_impl(o, now);
    }

    void erase(ObjectId id) {
        const std::scoped_lock lock(mu_);
        erase_impl(id);
    }

    /// Delete-then-insert; the object may land in a different partition.
    /// Every refresh_period updates the thresholds are recomputed from the
    /// running histograms.
    void update(const MovingPoint& o, Timestamp now) {
        const std::scoped_lock lock(mu_);
        erase_impl(o.id);
        insert_impl(o, now);
        if (cfg_.refresh_period > 0 && ++updates_since_refresh_ >= cfg_.refresh_period) {
            refresh_tau_impl();
            updates_since_refresh_ = 0;
        }
    }

    /// Queries every partition: the query is rotated into each axis frame and
    /// run as the axis-aligned MBR of the rotated shape, candidates are
    /// rotated back and filtered against the original query; the outlier tree
    /// is queried unchanged.
    std::set<ObjectId> range_query(const RangeQuery& q, Timestamp now) {
        const std::scoped_lock lock(mu_);
        std::set<ObjectId> out;
        for (int i = 0; i < dva_count(); ++i) {
            const Rotation& rot = dvas_[static_cast<std::size_t>(i)].rot;
            const RangeQuery q_frame = rotate_query(q, rot);
            for (const MovingPoint& hit :
                 trees_[static_cast<std::size_t>(i)]->range_query(q_frame, now)) {
                if (contains(q, rotate_from_frame(hit, rot))) out.insert(hit.id);
            }
        }
        for (ObjectId id : outlier_tree_->range_query_ids(q, now)) out.insert(id);
        return out;
    }

    /// Per-tree pre-filter candidates in world coordinates (diagnostics).
    std::vector<MovingPoint> range_candidates(const RangeQuery& q, Timestamp now) {
        const std::scoped_lock lock(mu_);
        std::vector<MovingPoint> out;
        for (int i = 0; i < dva_count(); ++i) {
            const Rotation& rot = dvas_[static_cast<std::size_t>(i)].rot;
            for (const MovingPoint& hit : trees_[static_cast<std::size_t>(i)]
                                              ->range_candidates(rotate_query(q, rot), now)) {
                out.push_back(rotate_from_frame(hit, rot));
            }
        }
        for (const MovingPoint& hit : outlier_tree_->range_candidates(q, now)) {
            out.push_back(hit);
        }
        return out;
    }

    /// Recomputes each axis's threshold from its running histogram. New
    /// thresholds govern future insertions only; resident objects migrate
    /// lazily on their next update.
    void refresh_tau() {
        const std::scoped_lock lock(mu_);
        refresh_tau_impl();
    }

    std::optional<int> partition_of(ObjectId id) const {
        const auto it = locator_.find(id);
        if (it == locator_.end()) return std::nullopt;
        return it->second;
    }

    /// Snapshot of every indexed object in world coordinates:
    /// id,partition_id,x,y,vx,vy,t_ref with -1 marking the outlier tree.
    void export_snapshot_csv(std::ostream& os) {
        const std::scoped_lock lock(mu_);
        os << "id,partition_id,x,y,vx,vy,t_ref\n";
        char buf[160];
        const auto emit = [&](const MovingPoint& mp, int part) {
            std::snprintf(buf, sizeof buf, "%llu,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          static_cast<unsigned long long>(mp.id), part, mp.pos.x,
                          mp.pos.y, mp.vel.x, mp.vel.y, mp.t_ref);
            os << buf;
        };
        for (int i = 0; i < dva_count(); ++i) {
            const Rotation& rot = dvas_[static_cast<std::size_t>(i)].rot;
            trees_[static_cast<std::size_t>(i)]->for_each_entry(
                [&](const MovingPoint& mp) { emit(rotate_from_frame(mp, rot), i); });
        }
        outlier_tree_->for_each_entry([&](const MovingPoint& mp) { emit(mp, -1); });
    }

    /// Consistency audit: every tree's invariants, plus each object indexed
    /// in exactly the tree its locator entry names.
    void validate() const {
        std::size_t total = 0;
        for (int i = 0; i <= dva_count(); ++i) {
            const BxTree<>& t = tree_at(i);
            t.validate();
            total += t.size();
        }
        if (total != locator_.size()) {
            throw std::logic_error("VpIndex: tree cardinalities != locator size");
        }
        for (const auto& [id, part] : locator_) {
            for (int i = 0; i <= dva_count(); ++i) {
                if (tree_at(i).contains_id(id) != (i == part)) {
                    throw std::logic_error("VpIndex: object in wrong partition");
                }
            }
        }
    }

    BxTree<>& dva_tree(int i) { return *trees_[static_cast<std::size_t>(i)]; }
    BxTree<>& outlier_tree() { return *outlier_tree_; }

    static Rect rotated_domain(const Domain& domain, const Rotation& rot) {
        const Rect& e = domain.extent;
        const Vec2 corners[4] = {e.lo, {e.hi.x, e.lo.y}, {e.lo.x, e.hi.y}, e.hi};
        Vec2 lo = rot.to_frame(corners[0]);
        Vec2 hi = lo;
        for (const Vec2& c : corners) {
            const Vec2 f = rot.to_frame(c);
            lo = Vec2{std::min(lo.x, f.x), std::min(lo.y, f.y)};
            hi = Vec2{std::max(hi.x, f.x), std::max(hi.y, f.y)};
        }
        return Rect(lo, hi);
    }

    static RangeQuery rotate_query(const RangeQuery& q, const Rotation& rot) {
        QueryShape shape;
        if (const auto* c = std::get_if<Circle>(&q.shape)) {
            const Vec2 center = rot.to_frame(c->center);
            shape = Rect(center - Vec2{c->radius, c->radius},
                         center + Vec2{c->radius, c->radius});
        } else {
            const Rect& r = std::get<Rect>(q.shape);
            const Vec2 corners[4] = {
                r.lo, {r.hi.x, r.lo.y}, {r.lo.x, r.hi.y}, r.hi};
            Vec2 lo = rot.to_frame(corners[0]);
            Vec2 hi = lo;
            for (const Vec2& c : corners) {
                const Vec2 f = rot.to_frame(c);
                lo = Vec2{std::min(lo.x, f.x), std::min(lo.y, f.y)};
                hi = Vec2{std::max(hi.x, f.x), std::max(hi.y, f.y)};
            }
            shape = Rect(lo, hi);
        }
        RangeQuery out;
        out.shape = shape;
        out.time = q.time;
        out.qvel = rot.to_frame(q.qvel);
        return out;
    }

private:
    const BxTree<>& tree_at(int i) const {
        return (i == dva_count()) ? *outlier_tree_ : *trees_[static_cast<std::size_t>(i)];
    }
    BxTree<>& tree_at(int i) {
        return (i == dva_count()) ? *outlier_tree_ : *trees_[static_cast<std::size_t>(i)];
    }

    void insert_impl(const MovingPoint& o, Timestamp now) {
        if (locator_.contains(o.id)) {
            throw std::logic_error("VpIndex: duplicate object id");
        }
        const auto [i_min, dist] = nearest_dva(o.vel);
        DvaDescriptor& d = dvas_[static_cast<std::size_t>(i_min)];
        d.perp_hist.push(dist);
        if (dist > d.tau) {
            outlier_tree_->insert(o, now);
            locator_.emplace(o.id, outlier_partition());
        } else {
            trees_[static_cast<std::size_t>(i_min)]->insert(rotate_to_frame(o, d.rot), now);
            locator_.emplace(o.id, i_min);
        }
    }

    void erase_impl(ObjectId id) {
        const auto it = locator_.find(id);
        if (it == locator_.end()) {
            throw std::out_of_range("VpIndex: unknown id");
        }
        tree_at(it->second).erase(id);
        locator_.erase(it);
    }

    void refresh_tau_impl() {
        for (DvaDescriptor& d : dvas_) {
            if (cfg_.fixed_tau) continue;
            d.tau = d.perp_hist.compute_tau(d.noise_floor).tau;
        }
    }

    VpIndexConfig cfg_;
    PageStore store_;
    Pager pager_;
    std::vector<DvaDescriptor> dvas_;
    std::vector<int> analysis_assignment_;
    std::vector<std::unique_ptr<BxTree<>>> trees_;
    std::unique_ptr<BxTree<>> outlier_tree_;
    std::unordered_map<ObjectId, int> locator_;
    std::size_t updates_since_refresh_ = 0;
    mutable std::mutex mu_;
};

}  // namespace vpmoti
