#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vitality/geometry.hpp"

namespace vitality {

using FeatureId = std::int64_t;

struct IndexEntry {
  FeatureId id = 0;
  Box box;
};

struct Nearest {
  FeatureId id = 0;
  double distance = 0.0;
};

/// Sort-tile-recursive packed R-tree. Immutable after construction.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(std::vector<IndexEntry> entries, int node_capacity = 16);

  /// Convenience for point features (e.g. centroids).
  static SpatialIndex from_points(std::span<const FeatureId> ids, std::span<const Point> points);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Entry minimizing the distance from `from` to its box; ties go to the
  /// smallest id. Throws EmptySetError on an empty index.
  Nearest nearest(const Point& from) const;

  /// Ids of all entries whose box intersects `query`, ascending.
  std::vector<FeatureId> query(const Box& query) const;

 private:
  struct Node {
    Box box;
    // Children are nodes_[first, first+count) for inner nodes and
    // entries_[first, first+count) for leaves.
    std::size_t first = 0;
    std::size_t count = 0;
    bool leaf = true;
  };

  std::vector<IndexEntry> entries_;
  std::vector<Node> nodes_;
  std::size_t root_ = 0;
};

}  // namespace vitality
