#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace vpmoti {

/// Inclusive range of curve values.
struct CurveRun {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    bool operator==(const CurveRun&) const = default;
};

/// Inclusive cell rectangle, in grid coordinates.
struct CellRect {
    std::uint32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Z-order (Morton) space-filling curve over a 2^levels_x by 2^levels_y
/// grid. The common low bits interleave with x least significant; when the
/// axes have different resolutions the surplus high bits of the finer axis
/// sit above the interleaved part, so the curve remains a bijection onto
/// [0, 2^(levels_x + levels_y)).
///
/// Any curve type with this interface (levels, encode/decode, cover) can be
/// plugged into the index in its place.
class ZOrderCurve {
public:
    explicit ZOrderCurve(int levels) : ZOrderCurve(levels, levels) {}

    ZOrderCurve(int levels_x, int levels_y)
        : levels_x_(levels_x), levels_y_(levels_y) {
        if (levels_x < 1 || levels_y < 1 || levels_x + levels_y > 40) {
            throw std::invalid_argument("ZOrderCurve: bad level pair");
        }
        // Bit layout from least significant upward: x0 y0 x1 y1 ... then the
        // remaining bits of the deeper axis.
        const int common = std::min(levels_x_, levels_y_);
        for (int i = 0; i < common; ++i) {
            layout_.push_back(Bit{0, i});
            layout_.push_back(Bit{1, i});
        }
        for (int i = common; i < levels_x_; ++i) layout_.push_back(Bit{0, i});
        for (int i = common; i < levels_y_; ++i) layout_.push_back(Bit{1, i});
    }

    int levels_x() const { return levels_x_; }
    int levels_y() const { return levels_y_; }
    std::uint32_t cells_x() const { return 1u << levels_x_; }
    std::uint32_t cells_y() const { return 1u << levels_y_; }
    std::uint64_t max_value() const {
        return (std::uint64_t{1} << layout_.size()) - 1;
    }

    std::uint64_t encode(std::uint32_t cx, std::uint32_t cy) const {
        if (cx >= cells_x() || cy >= cells_y()) {
            throw std::out_of_range("ZOrderCurve: cell out of range");
        }
        std::uint64_t v = 0;
        for (std::size_t pos = 0; pos < layout_.size(); ++pos) {
            const Bit b = layout_[pos];
            const std::uint32_t src = b.axis == 0 ? cx : cy;
            v |= static_cast<std::uint64_t>((src >> b.index) & 1u) << pos;
        }
        return v;
    }

    std::pair<std::uint32_t, std::uint32_t> decode(std::uint64_t v) const {
        if (v > max_value()) throw std::out_of_range("ZOrderCurve: value out of range");
        std::uint32_t cx = 0, cy = 0;
        for (std::size_t pos = 0; pos < layout_.size(); ++pos) {
            const Bit b = layout_[pos];
            const auto bit = static_cast<std::uint32_t>((v >> pos) & 1u);
            if (b.axis == 0) {
                cx |= bit << b.index;
            } else {
                cy |= bit << b.index;
            }
        }
        return {cx, cy};
    }

    /// Decomposes a cell rectangle into maximal contiguous curve runs,
    /// ascending and disjoint. Splitting along the bit layout from the top
    /// visits layout-aligned blocks, which map to contiguous ranges, in
    /// curve order; a final pass merges runs that touch.
    ///
    /// At most `max_runs` runs are returned: beyond that, runs separated by
    /// the smallest gaps are merged, trading extra scanned keys for fewer
    /// probes. The merged set still covers every cell of the rectangle.
    std::vector<CurveRun> cover(const CellRect& r, std::size_t max_runs = 0) const {
        if (r.x0 > r.x1 || r.y0 > r.y1) {
            throw std::invalid_argument("ZOrderCurve: malformed cell rect");
        }
        if (r.x1 >= cells_x() || r.y1 >= cells_y()) {
            throw std::out_of_range("ZOrderCurve: cell rect out of range");
        }
        std::vector<CurveRun> runs;
        descend(static_cast<int>(layout_.size()) - 1, 0, 0, r, runs);
        std::vector<CurveRun> merged;
        for (const CurveRun& run : runs) {
            if (!merged.empty() && merged.back().hi + 1 == run.lo) {
                merged.back().hi = run.hi;
            } else {
                merged.push_back(run);
            }
        }
        if (max_runs > 0 && merged.size() > max_runs) {
            cap_runs(merged, max_runs);
        }
        return merged;
    }

private:
    struct Bit {
        int axis;   // 0 = x, 1 = y
        int index;  // bit index within the axis coordinate
    };

    // Visits the layout-aligned block rooted at (qx, qy) whose free bits are
    // layout positions [0, top]; emits it when fully inside `r`, recurses on
    // the top bit otherwise. Children are visited low half then high half,
    // which is curve order.
    void descend(int top, std::uint32_t qx, std::uint32_t qy, const CellRect& r,
                 std::vector<CurveRun>& out) const {
        std::uint32_t w = 1, h = 1;
        for (int pos = 0; pos <= top; ++pos) {
            if (layout_[static_cast<std::size_t>(pos)].axis == 0) {
                w <<= 1;
            } else {
                h <<= 1;
            }
        }
        const std::uint32_t x_hi = qx + w - 1;
        const std::uint32_t y_hi = qy + h - 1;
        if (qx > r.x1 || x_hi < r.x0 || qy > r.y1 || y_hi < r.y0) return;
        if (qx >= r.x0 && x_hi <= r.x1 && qy >= r.y0 && y_hi <= r.y1) {
            const std::uint64_t base = encode(qx, qy);
            out.push_back({base, base + (std::uint64_t{1} << (top + 1)) - 1});
            return;
        }
        const Bit b = layout_[static_cast<std::size_t>(top)];
        if (b.axis == 0) {
            descend(top - 1, qx, qy, r, out);
            descend(top - 1, qx + w / 2, qy, r, out);
        } else {
            descend(top - 1, qx, qy, r, out);
            descend(top - 1, qx, qy + h / 2, r, out);
        }
    }

    static void cap_runs(std::vector<CurveRun>& runs, std::size_t max_runs) {
        while (runs.size() > max_runs) {
            std::size_t excess = runs.size() - max_runs;
            std::vector<std::uint64_t> gaps;
            gaps.reserve(runs.size() - 1);
            for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
                gaps.push_back(runs[i + 1].lo - runs[i].hi);
            }
            std::nth_element(gaps.begin(), gaps.begin() + (excess - 1), gaps.end());
            const std::uint64_t threshold = gaps[excess - 1];
            std::vector<CurveRun> next;
            next.push_back(runs.front());
            for (std::size_t i = 1; i < runs.size(); ++i) {
                if (excess > 0 && runs[i].lo - next.back().hi <= threshold) {
                    next.back().hi = runs[i].hi;
                    --excess;
                } else {
                    next.push_back(runs[i]);
                }
            }
            runs = std::move(next);
        }
    }

    int levels_x_;
    int levels_y_;
    std::vector<Bit> layout_;
};

}  // namespace vpmoti
