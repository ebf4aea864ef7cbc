#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <list>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace vpmoti {

using PageId = std::uint32_t;
inline constexpr PageId kInvalidPage = 0xffffffffu;

/// Counters for the simulated disk. `logical_accesses` counts every page
/// touch; `physical_reads`/`physical_writes` count transfers past the buffer.
struct IoStats {
    std::uint64_t physical_reads = 0;
    std::uint64_t physical_writes = 0;
    std::uint64_t logical_accesses = 0;

    IoStats operator-(const IoStats& o) const {
        return {physical_reads - o.physical_reads, physical_writes - o.physical_writes,
                logical_accesses - o.logical_accesses};
    }
    bool operator==(const IoStats&) const = default;
};

/// Simulated disk of fixed-size pages with bump allocation.
class PageStore {
public:
    explicit PageStore(std::size_t page_size = 4096) : page_size_(page_size) {
        if (page_size_ < 64) throw std::invalid_argument("PageStore: page size too small");
    }

    std::size_t page_size() const { return page_size_; }
    std::size_t page_count() const { return pages_.size(); }

    PageId alloc() {
        pages_.emplace_back(page_size_, std::byte{0});
        return static_cast<PageId>(pages_.size() - 1);
    }

    const std::vector<std::byte>& raw_read(PageId id) const {
        check(id);
        return pages_[id];
    }

    void raw_write(PageId id, std::span<const std::byte> block) {
        check(id);
        if (block.size() != page_size_) {
            throw std::invalid_argument("PageStore: block length != page size");
        }
        std::memcpy(pages_[id].data(), block.data(), page_size_);
    }

private:
    void check(PageId id) const {
        if (id >= pages_.size()) {
            throw std::out_of_range("PageStore: unknown page id (index corruption?)");
        }
    }

    std::size_t page_size_;
    std::vector<std::vector<std::byte>> pages_;
};

/// Write-back LRU buffer in front of a PageStore. Every read/write goes
/// through here so that the resulting IoStats are the experiment metric.
///
/// A miss (read or write of a non-resident page) costs one physical read;
/// evicting a dirty page costs one physical write. Resident accesses only
/// bump logical_accesses.
class Pager {
public:
    Pager(PageStore& store, std::size_t capacity_pages = 50)
        : store_(store), capacity_(capacity_pages) {
        if (capacity_ == 0) throw std::invalid_argument("Pager: zero capacity");
    }

    std::size_t page_size() const { return store_.page_size(); }
    PageId alloc() { return store_.alloc(); }

    void read(PageId id, std::span<std::byte> out) {
        if (out.size() != page_size()) {
            throw std::invalid_argument("Pager: block length != page size");
        }
        Frame& f = touch(id);
        std::memcpy(out.data(), f.data.data(), page_size());
    }

    void write(PageId id, std::span<const std::byte> block) {
        if (block.size() != page_size()) {
            throw std::invalid_argument("Pager: block length != page size");
        }
        Frame& f = touch(id);
        std::memcpy(f.data.data(), block.data(), page_size());
        f.dirty = true;
    }

    /// Writes all dirty frames back to the store (counted as physical writes).
    void flush() {
        for (auto& [id, frame] : frames_) {
            if (frame.dirty) {
                store_.raw_write(id, frame.data);
                frame.dirty = false;
                ++stats_.physical_writes;
            }
        }
    }

    const IoStats& stats() const { return stats_; }
    void reset_stats() { stats_ = IoStats{}; }
    std::size_t resident_pages() const { return frames_.size(); }

private:
    struct Frame {
        std::vector<std::byte> data;
        bool dirty = false;
        std::list<PageId>::iterator lru_pos;
    };

    Frame& touch(PageId id) {
        ++stats_.logical_accesses;
        auto it = frames_.find(id);
        if (it != frames_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.lru_pos);
            return it->second;
        }
        // Miss: fetch from the store, evicting the least recently used page.
        const std::vector<std::byte>& src = store_.raw_read(id);
        ++stats_.physical_reads;
        if (frames_.size() >= capacity_) {
            const PageId victim = lru_.back();
            lru_.pop_back();
            auto vit = frames_.find(victim);
            if (vit->second.dirty) {
                store_.raw_write(victim, vit->second.data);
                ++stats_.physical_writes;
            }
            frames_.erase(vit);
        }
        lru_.push_front(id);
        Frame frame{src, false, lru_.begin()};
        return frames_.emplace(id, std::move(frame)).first->second;
    }

    PageStore& store_;
    std::size_t capacity_;
    std::unordered_map<PageId, Frame> frames_;
    std::list<PageId> lru_;  // front = most recently used
    IoStats stats_;
};

}  // namespace vpmoti
