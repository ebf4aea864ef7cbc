#pragma once

#include <set>
#include <stdexcept>
#include <unordered_map>

#include "vpmoti/geometry.hpp"

namespace vpmoti {

/// Plain table of the live object states; ground truth for every index path.
class ObjectTable {
public:
    void insert(const MovingPoint& o) {
        if (!objects_.emplace(o.id, o).second) {
            throw std::logic_error("ObjectTable: duplicate id");
        }
    }

    void upsert(const MovingPoint& o) { objects_[o.id] = o; }

    void erase(ObjectId id) {
        if (objects_.erase(id) == 0) {
            throw std::out_of_range("ObjectTable: unknown id");
        }
    }

    std::size_t size() const { return objects_.size(); }

    const MovingPoint* find(ObjectId id) const {
        const auto it = objects_.find(id);
        return it == objects_.end() ? nullptr : &it->second;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (const auto& [id, o] : objects_) f(o);
    }

    /// Exact answer by linear scan.
    std::set<ObjectId> range(const RangeQuery& q) const {
        std::set<ObjectId> out;
        for (const auto& [id, o] : objects_) {
            if (contains(q, o)) out.insert(id);
        }
        return out;
    }

private:
    std::unordered_map<ObjectId, MovingPoint> objects_;
};

}  // namespace vpmoti
