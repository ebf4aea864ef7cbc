#pragma once

#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "vpmoti/storage.hpp"

namespace vpmoti {

/// Leaf payload: composite key (curve key, object id) plus the object's
/// indexed kinematic state (position at the bucket label time, velocity).
struct LeafEntry {
    std::uint64_t key = 0;
    std::uint64_t id = 0;
    double px = 0, py = 0, vx = 0, vy = 0;
};

inline std::strong_ordering entry_order(std::uint64_t key_a, std::uint64_t id_a,
                                         std::uint64_t key_b, std::uint64_t id_b) {
    if (auto c = key_a <=> key_b; c != 0) return c;
    return id_a <=> id_b;
}

/// Disk-resident B+-tree over (key, id) pairs, nodes serialized into
/// fixed-size pages and accessed only through a Pager. Fanout is derived
/// from the page size. Keys are made unique by the id component, so deletes
/// are exact and duplicates in curve-value space are unproblematic.
class BPlusTree {
public:
    explicit BPlusTree(Pager& pager)
        : pager_(pager),
          leaf_cap_((pager.page_size() - kHeaderSize) / kLeafEntrySize),
          int_cap_((pager.page_size() - kHeaderSize - 4) / kInternalEntrySize),
          buf_(pager.page_size()) {
        if (leaf_cap_ < 4 || int_cap_ < 4) {
            throw std::invalid_argument("BPlusTree: page size gives unusable fanout");
        }
        root_ = pager_.alloc();
        Node n;
        n.leaf = true;
        write_node(root_, n);
    }

    BPlusTree(const BPlusTree&) = delete;
    BPlusTree& operator=(const BPlusTree&) = delete;

    std::size_t size() const { return size_; }
    std::size_t leaf_capacity() const { return leaf_cap_; }
    std::size_t internal_capacity() const { return int_cap_; }
    std::size_t height() const { return height_; }

    void insert(const LeafEntry& e) {
        std::vector<PathStep> path;
        Node leaf = descend(e.key, e.id, path);
        auto pos = lower_bound_leaf(leaf, e.key, e.id);
        if (pos < leaf.entries.size() && leaf.entries[pos].key == e.key &&
            leaf.entries[pos].id == e.id) {
            throw std::logic_error("BPlusTree: duplicate (key, id)");
        }
        leaf.entries.insert(leaf.entries.begin() + static_cast<long>(pos), e);
        ++size_;
        if (leaf.entries.size() <= leaf_cap_) {
            write_node(path.back().page, leaf);
            return;
        }
        split_leaf(leaf, path);
    }

    /// Removes the entry with exactly this (key, id). Returns false when absent.
    bool erase(std::uint64_t key, std::uint64_t id) {
        std::vector<PathStep> path;
        Node leaf = descend(key, id, path);
        auto pos = lower_bound_leaf(leaf, key, id);
        if (pos >= leaf.entries.size() || leaf.entries[pos].key != key ||
            leaf.entries[pos].id != id) {
            return false;
        }
        leaf.entries.erase(leaf.entries.begin() + static_cast<long>(pos));
        --size_;
        rebalance_after_erase(std::move(leaf), path);
        return true;
    }

    /// Visits every entry with (lo_key,lo_id) <= (key,id) <= (hi_key,hi_id)
    /// in ascending order. The visitor may return void, or bool to stop early.
    template <typename F>
    void scan(std::uint64_t lo_key, std::uint64_t lo_id, std::uint64_t hi_key,
              std::uint64_t hi_id, F&& f) const {
        std::vector<PathStep> path;
        Node node = descend(lo_key, lo_id, path);
        while (true) {
            auto pos = lower_bound_leaf(node, lo_key, lo_id);
            for (; pos < node.entries.size(); ++pos) {
                const LeafEntry& e = node.entries[pos];
                if (entry_order(e.key, e.id, hi_key, hi_id) > 0) return;
                if constexpr (std::is_void_v<decltype(f(e))>) {
                    f(e);
                } else {
                    if (!f(e)) return;
                }
            }
            if (node.next == kInvalidPage) return;
            node = read_node(node.next);
            lo_key = 0;
            lo_id = 0;
        }
    }

    /// Leaf-chain walk; the visitor receives each leaf's entries.
    template <typename F>
    void for_each_leaf(F&& f) const {
        PageId page = root_;
        Node node = read_node(page);
        while (!node.leaf) {
            page = node.children.front();
            node = read_node(page);
        }
        while (true) {
            f(static_cast<const std::vector<LeafEntry>&>(node.entries));
            if (node.next == kInvalidPage) return;
            node = read_node(node.next);
        }
    }

    struct TreeStats {
        std::size_t depth = 0;
        std::size_t leaf_pages = 0;
        std::size_t internal_pages = 0;
        std::size_t entries = 0;
        std::size_t live_pages() const { return leaf_pages + internal_pages; }
    };

    TreeStats stats() const {
        TreeStats s;
        collect_stats(root_, 1, s);
        return s;
    }

    /// Full structural audit: key order, separator bounds, uniform depth,
    /// occupancy in [min, cap] (root exempt), leaf-chain order, and the
    /// entry count. Throws std::logic_error on the first violation.
    void validate() const {
        ValidationCtx ctx;
        auto [depth, count] = validate_node(root_, true, nullptr, nullptr, ctx);
        (void)depth;
        if (count != size_) throw std::logic_error("validate: size mismatch");
        if (ctx.last_leaf_next != kInvalidPage) {
            throw std::logic_error("validate: dangling leaf chain");
        }
    }

private:
    static constexpr std::size_t kHeaderSize = 8;
    static constexpr std::size_t kLeafEntrySize = 48;
    static constexpr std::size_t kInternalEntrySize = 20;

    struct Separator {
        std::uint64_t key = 0;
        std::uint64_t id = 0;
    };

    struct Node {
        bool leaf = false;
        PageId next = kInvalidPage;           // leaf chain
        std::vector<LeafEntry> entries;       // leaf payload
        std::vector<Separator> seps;          // internal: children.size() - 1
        std::vector<PageId> children;
    };

    struct PathStep {
        PageId page = kInvalidPage;
        std::size_t child_idx = 0;  // index taken while descending from this node
    };

    // --- page (de)serialization -------------------------------------------

    Node read_node(PageId id) const {
        pager_.read(id, buf_);
        Node n;
        std::uint8_t kind;
        std::uint16_t count;
        std::memcpy(&kind, buf_.data(), 1);
        std::memcpy(&count, buf_.data() + 2, 2);
        std::memcpy(&n.next, buf_.data() + 4, 4);
        n.leaf = (kind == 0);
        const std::byte* p = buf_.data() + kHeaderSize;
        if (n.leaf) {
            n.entries.resize(count);
            for (std::uint16_t i = 0; i < count; ++i) {
                LeafEntry& e = n.entries[i];
                std::memcpy(&e.key, p, 8);
                std::memcpy(&e.id, p + 8, 8);
                std::memcpy(&e.px, p + 16, 8);
                std::memcpy(&e.py, p + 24, 8);
                std::memcpy(&e.vx, p + 32, 8);
                std::memcpy(&e.vy, p + 40, 8);
                p += kLeafEntrySize;
            }
        } else {
            n.seps.resize(count);
            n.children.resize(count + 1);
            std::memcpy(&n.children[0], p, 4);
            p += 4;
            for (std::uint16_t i = 0; i < count; ++i) {
                std::memcpy(&n.seps[i].key, p, 8);
                std::memcpy(&n.seps[i].id, p + 8, 8);
                std::memcpy(&n.children[i + 1], p + 16, 4);
                p += kInternalEntrySize;
            }
        }
        return n;
    }

    void write_node(PageId id, const Node& n) {
        std::fill(buf_.begin(), buf_.end(), std::byte{0});
        const std::uint8_t kind = n.leaf ? 0 : 1;
        const std::uint16_t count =
            static_cast<std::uint16_t>(n.leaf ? n.entries.size() : n.seps.size());
        std::memcpy(buf_.data(), &kind, 1);
        std::memcpy(buf_.data() + 2, &count, 2);
        std::memcpy(buf_.data() + 4, &n.next, 4);
        std::byte* p = buf_.data() + kHeaderSize;
        if (n.leaf) {
            for (const LeafEntry& e : n.entries) {
                std::memcpy(p, &e.key, 8);
                std::memcpy(p + 8, &e.id, 8);
                std::memcpy(p + 16, &e.px, 8);
                std::memcpy(p + 24, &e.py, 8);
                std::memcpy(p + 32, &e.vx, 8);
                std::memcpy(p + 40, &e.vy, 8);
                p += kLeafEntrySize;
            }
        } else {
            std::memcpy(p, &n.children[0], 4);
            p += 4;
            for (std::size_t i = 0; i < n.seps.size(); ++i) {
                std::memcpy(p, &n.seps[i].key, 8);
                std::memcpy(p + 8, &n.seps[i].id, 8);
                std::memcpy(p + 16, &n.children[i + 1], 4);
                p += kInternalEntrySize;
            }
        }
        pager_.write(id, buf_);
    }

    PageId alloc_page() {
        if (!free_pages_.empty()) {
            PageId id = free_pages_.back();
            free_pages_.pop_back();
            return id;
        }
        return pager_.alloc();
    }

    void free_page(PageId id) { free_pages_.push_back(id); }

    // --- navigation ---------------------------------------------------------

    static std::size_t lower_bound_leaf(const Node& n, std::uint64_t key, std::uint64_t id) {
        std::size_t lo = 0, hi = n.entries.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (entry_order(n.entries[mid].key, n.entries[mid].id, key, id) < 0) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

    // Child index = number of separators <= (key, id); subtree i holds keys
    // in [sep[i-1], sep[i]).
    static std::size_t child_index(const Node& n, std::uint64_t key, std::uint64_t id) {
        std::size_t lo = 0, hi = n.seps.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (entry_order(n.seps[mid].key, n.seps[mid].id, key, id) <= 0) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

    Node descend(std::uint64_t key, std::uint64_t id, std::vector<PathStep>& path) const {
        PageId page = root_;
        Node node = read_node(page);
        while (!node.leaf) {
            const std::size_t idx = child_index(node, key, id);
            path.push_back({page, idx});
            page = node.children[idx];
            node = read_node(page);
        }
        path.push_back({page, 0});
        return node;
    }

    // --- insert -------------------------------------------------------------

    void split_leaf(Node& leaf, std::vector<PathStep>& path) {
        const PageId leaf_page = path.back().page;
        path.pop_back();
        Node right;
        right.leaf = true;
        const std::size_t n = leaf.entries.size();
        const std::size_t keep = n - n / 2;
        right.entries.assign(leaf.entries.begin() + static_cast<long>(keep),
                             leaf.entries.end());
        leaf.entries.resize(keep);
        const PageId right_page = alloc_page();
        right.next = leaf.next;
        leaf.next = right_page;
        write_node(right_page, right);
        write_node(leaf_page, leaf);
        insert_into_parent(path, leaf_page,
                           {right.entries.front().key, right.entries.front().id},
                           right_page);
    }

    void insert_into_parent(std::vector<PathStep>& path, PageId left_page, Separator sep,
                            PageId right_page) {
        if (path.empty()) {
            Node root;
            root.leaf = false;
            root.seps = {sep};
            root.children = {left_page, right_page};
            root_ = alloc_page();
            write_node(root_, root);
            ++height_;
            return;
        }
        const PathStep step = path.back();
        path.pop_back();
        Node parent = read_node(step.page);
        parent.seps.insert(parent.seps.begin() + static_cast<long>(step.child_idx), sep);
        parent.children.insert(
            parent.children.begin() + static_cast<long>(step.child_idx) + 1, right_page);
        if (parent.seps.size() <= int_cap_) {
            write_node(step.page, parent);
            return;
        }
        // Internal split: the middle separator moves up.
        const std::size_t mid = parent.seps.size() / 2;
        const Separator up = parent.seps[mid];
        Node right;
        right.leaf = false;
        right.seps.assign(parent.seps.begin() + static_cast<long>(mid) + 1,
                          parent.seps.end());
        right.children.assign(parent.children.begin() + static_cast<long>(mid) + 1,
                              parent.children.end());
        parent.seps.resize(mid);
        parent.children.resize(mid + 1);
        const PageId right_page2 = alloc_page();
        write_node(right_page2, right);
        write_node(step.page, parent);
        insert_into_parent(path, step.page, up, right_page2);
    }

    // --- erase --------------------------------------------------------------

    std::size_t min_leaf() const { return (leaf_cap_ + 1) / 2; }
    std::size_t min_seps() const { return int_cap_ / 2; }

    void rebalance_after_erase(Node node, std::vector<PathStep> path) {
        PageId page = path.back().page;
        path.pop_back();
        while (true) {
            const std::size_t fill = node.leaf ? node.entries.size() : node.seps.size();
            const std::size_t need = node.leaf ? min_leaf() : min_seps();
            if (path.empty()) {
                // Root: collapse an internal root with a single child.
                if (!node.leaf && node.seps.empty()) {
                    free_page(page);
                    root_ = node.children.front();
                    --height_;
                } else {
                    write_node(page, node);
                }
                return;
            }
            if (fill >= need) {
                write_node(page, node);
                return;
            }
            const PathStep pstep = path.back();
            Node parent = read_node(pstep.page);
            const std::size_t ci = pstep.child_idx;
            const bool fixed = node.leaf
                                   ? fix_leaf_underflow(parent, ci, node, page)
                                   : fix_internal_underflow(parent, ci, node, page);
            write_node(pstep.page, parent);
            if (fixed) return;  // borrowed; parent unchanged in shape
            // Merged: parent lost a separator and may itself underflow.
            node = std::move(parent);
            page = pstep.page;
            path.pop_back();
        }
    }

    // Returns true if resolved by borrowing; false if a merge removed a
    // separator from the parent (caller continues rebalancing upward).
    bool fix_leaf_underflow(Node& parent, std::size_t ci, Node& cur, PageId cur_page) {
        if (ci > 0) {
            const PageId left_page = parent.children[ci - 1];
            Node left = read_node(left_page);
            if (left.entries.size() > min_leaf()) {
                cur.entries.insert(cur.entries.begin(), left.entries.back());
                left.entries.pop_back();
                parent.seps[ci - 1] = {cur.entries.front().key, cur.entries.front().id};
                write_node(left_page, left);
                write_node(cur_page, cur);
                return true;
            }
        }
        if (ci + 1 < parent.children.size()) {
            const PageId right_page = parent.children[ci + 1];
            Node right = read_node(right_page);
            if (right.entries.size() > min_leaf()) {
                cur.entries.push_back(right.entries.front());
                right.entries.erase(right.entries.begin());
                parent.seps[ci] = {right.entries.front().key, right.entries.front().id};
                write_node(right_page, right);
                write_node(cur_page, cur);
                return true;
            }
            // Merge right sibling into cur.
            cur.entries.insert(cur.entries.end(), right.entries.begin(), right.entries.end());
            cur.next = right.next;
            free_page(right_page);
            parent.seps.erase(parent.seps.begin() + static_cast<long>(ci));
            parent.children.erase(parent.children.begin() + static_cast<long>(ci) + 1);
            write_node(cur_page, cur);
            return false;
        }
        // Merge cur into the left sibling.
        const PageId left_page = parent.children[ci - 1];
        Node left = read_node(left_page);
        left.entries.insert(left.entries.end(), cur.entries.begin(), cur.entries.end());
        left.next = cur.next;
        free_page(cur_page);
        parent.seps.erase(parent.seps.begin() + static_cast<long>(ci) - 1);
        parent.children.erase(parent.children.begin() + static_cast<long>(ci));
        write_node(left_page, left);
        return false;
    }

    bool fix_internal_underflow(Node& parent, std::size_t ci, Node& cur, PageId cur_page) {
        if (ci > 0) {
            const PageId left_page = parent.children[ci - 1];
            Node left = read_node(left_page);
            if (left.seps.size() > min_seps()) {
                cur.seps.insert(cur.seps.begin(), parent.seps[ci - 1]);
                parent.seps[ci - 1] = left.seps.back();
                left.seps.pop_back();
                cur.children.insert(cur.children.begin(), left.children.back());
                left.children.pop_back();
                write_node(left_page, left);
                write_node(cur_page, cur);
                return true;
            }
        }
        if (ci + 1 < parent.children.size()) {
            const PageId right_page = parent.children[ci + 1];
            Node right = read_node(right_page);
            if (right.seps.size() > min_seps()) {
                cur.seps.push_back(parent.seps[ci]);
                parent.seps[ci] = right.seps.front();
                right.seps.erase(right.seps.begin());
                cur.children.push_back(right.children.front());
                right.children.erase(right.children.begin());
                write_node(right_page, right);
                write_node(cur_page, cur);
                return true;
            }
            // Merge right sibling into cur through the separating key.
            cur.seps.push_back(parent.seps[ci]);
            cur.seps.insert(cur.seps.end(), right.seps.begin(), right.seps.end());
            cur.children.insert(cur.children.end(), right.children.begin(),
                                right.children.end());
            free_page(right_page);
            parent.seps.erase(parent.seps.begin() + static_cast<long>(ci));
            parent.children.erase(parent.children.begin() + static_cast<long>(ci) + 1);
            write_node(cur_page, cur);
            return false;
        }
        const PageId left_page = parent.children[ci - 1];
        Node left = read_node(left_page);
        left.seps.push_back(parent.seps[ci - 1]);
        left.seps.insert(left.seps.end(), cur.seps.begin(), cur.seps.end());
        left.children.insert(left.children.end(), cur.children.begin(), cur.children.end());
        free_page(cur_page);
        parent.seps.erase(parent.seps.begin() + static_cast<long>(ci) - 1);
        parent.children.erase(parent.children.begin() + static_cast<long>(ci));
        write_node(left_page, left);
        return false;
    }

    // --- diagnostics ----------------------------------------------------------

    void collect_stats(PageId page, std::size_t depth, TreeStats& s) const {
        Node node = read_node(page);
        if (node.leaf) {
            ++s.leaf_pages;
            s.entries += node.entries.size();
            s.depth = std::max(s.depth, depth);
            return;
        }
        ++s.internal_pages;
        for (PageId c : node.children) collect_stats(c, depth + 1, s);
    }

    struct ValidationCtx {
        bool saw_leaf = false;
        std::uint64_t prev_key = 0, prev_id = 0;
        PageId last_leaf_next = kInvalidPage;
        bool first_leaf = true;
    };

    std::pair<std::size_t, std::size_t> validate_node(PageId page, bool is_root,
                                                      const Separator* lo,
                                                      const Separator* hi,
                                                      ValidationCtx& ctx) const {
        Node node = read_node(page);
        auto within = [&](std::uint64_t k, std::uint64_t i) {
            if (lo && entry_order(k, i, lo->key, lo->id) < 0) return false;
            if (hi && entry_order(k, i, hi->key, hi->id) >= 0) return false;
            return true;
        };
        if (node.leaf) {
            if (!is_root && node.entries.size() < min_leaf()) {
                throw std::logic_error("validate: leaf underflow");
            }
            if (node.entries.size() > leaf_cap_) {
                throw std::logic_error("validate: leaf overflow");
            }
            for (const auto& e : node.entries) {
                if (!within(e.key, e.id)) throw std::logic_error("validate: leaf key bounds");
                if (ctx.saw_leaf &&
                    entry_order(ctx.prev_key, ctx.prev_id, e.key, e.id) >= 0) {
                    throw std::logic_error("validate: leaf order");
                }
                ctx.prev_key = e.key;
                ctx.prev_id = e.id;
                ctx.saw_leaf = true;
            }
            if (!ctx.first_leaf && ctx.last_leaf_next != page) {
                throw std::logic_error("validate: broken leaf chain");
            }
            ctx.first_leaf = false;
            ctx.last_leaf_next = node.next;
            return {1, node.entries.size()};
        }
        if (!is_root && node.seps.size() < min_seps()) {
            throw std::logic_error("validate: internal underflow");
        }
        if (node.seps.size() > int_cap_ || node.children.size() != node.seps.size() + 1) {
            throw std::logic_error("validate: internal shape");
        }
        if (is_root && node.seps.empty()) {
            throw std::logic_error("validate: internal root without separator");
        }
        std::size_t depth = 0, count = 0;
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            const Separator* clo = (i == 0) ? lo : &node.seps[i - 1];
            const Separator* chi = (i == node.seps.size()) ? hi : &node.seps[i];
            if (i > 0 && i < node.seps.size() &&
                entry_order(node.seps[i - 1].key, node.seps[i - 1].id, node.seps[i].key,
                            node.seps[i].id) >= 0) {
                throw std::logic_error("validate: separator order");
            }
            auto [d, c] = validate_node(node.children[i], false, clo, chi, ctx);
            if (i == 0) {
                depth = d;
            } else if (d != depth) {
                throw std::logic_error("validate: uneven depth");
            }
            count += c;
        }
        return {depth + 1, count};
    }

    Pager& pager_;
    std::size_t leaf_cap_;
    std::size_t int_cap_;
    mutable std::vector<std::byte> buf_;
    PageId root_ = kInvalidPage;
    std::vector<PageId> free_pages_;
    std::size_t size_ = 0;
    std::size_t height_ = 1;
};

}  // namespace vpmoti
