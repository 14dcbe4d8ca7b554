#include "vitality/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace vitality {

namespace {

double box_distance(const Box& b, const Point& p) {
  const double dx = std::max({b.min().x() - p.x(), 0.0, p.x() - b.max().x()});
  const double dy = std::max({b.min().y() - p.y(), 0.0, p.y() - b.max().y()});
  return std::hypot(dx, dy);
}

// Orders items by center x, slices into vertical strips, orders each strip by
// center y. Returns nothing; `items` is permuted in place.
template <typename T, typename BoxOf>
void str_sort(std::vector<T>& items, std::size_t capacity, BoxOf box_of) {
  const std::size_t n = items.size();
  if (n <= capacity) return;
  const std::size_t leaves = (n + capacity - 1) / capacity;
  const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(leaves))));
  const std::size_t per_slice = slices * capacity;
  auto cx = [&](const T& t) { return box_of(t).center().x(); };
  auto cy = [&](const T& t) { return box_of(t).center().y(); };
  std::stable_sort(items.begin(), items.end(), [&](const T& a, const T& b) { return cx(a) < cx(b); });
  for (std::size_t s = 0; s < n; s += per_slice) {
    auto first = items.begin() + static_cast<std::ptrdiff_t>(s);
    auto last = items.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + per_slice));
    std::stable_sort(first, last, [&](const T& a, const T& b) { return cy(a) < cy(b); });
  }
}

}  // namespace

SpatialIndex::SpatialIndex(std::vector<IndexEntry> entries, int node_capacity)
    : entries_(std::move(entries)) {
  if (entries_.empty()) return;
  const auto cap = static_cast<std::size_t>(std::max(2, node_capacity));
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
  str_sort(entries_, cap, [](const IndexEntry& e) -> const Box& { return e.box; });

  std::vector<Node> level;
  for (std::size_t i = 0; i < entries_.size(); i += cap) {
    Node n;
    n.first = i;
    n.count = std::min(cap, entries_.size() - i);
    for (std::size_t k = 0; k < n.count; ++k) n.box.extend(entries_[i + k].box);
    level.push_back(n);
  }
  while (level.size() > 1) {
    str_sort(level, cap, [](const Node& n) -> const Box& { return n.box; });
    const std::size_t base = nodes_.size();
    nodes_.insert(nodes_.end(), level.begin(), level.end());
    std::vector<Node> parents;
    for (std::size_t i = 0; i < level.size(); i += cap) {
      Node p;
      p.leaf = false;
      p.first = base + i;
      p.count = std::min(cap, level.size() - i);
      for (std::size_t k = 0; k < p.count; ++k) p.box.extend(level[i + k].box);
      parents.push_back(p);
    }
    level = std::move(parents);
  }
  root_ = nodes_.size();
  nodes_.push_back(level.front());
}

SpatialIndex SpatialIndex::from_points(std::span<const FeatureId> ids, std::span<const Point> points) {
  std::vector<IndexEntry> entries;
  entries.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) entries.push_back({ids[i], Box(points[i], points[i])});
  return SpatialIndex(std::move(entries));
}

Nearest SpatialIndex::nearest(const Point& from) const {
  if (entries_.empty()) throw EmptySetError("nearest-feature query on an empty index");

  struct Item {
    double dist;
    bool is_entry;
    std::size_t index;
  };
  auto worse = [&](const Item& a, const Item& b) {
    if (a.dist != b.dist) return a.dist > b.dist;
    // Entries before nodes at equal distance, then by id.
    if (a.is_entry != b.is_entry) return !a.is_entry;
    if (a.is_entry) return entries_[a.index].id > entries_[b.index].id;
    return a.index > b.index;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(worse)> heap(worse);
  heap.push({box_distance(nodes_[root_].box, from), false, root_});

  bool found = false;
  Nearest best;
  while (!heap.empty()) {
    const Item it = heap.top();
    heap.pop();
    if (found && it.dist > best.distance) break;
    if (it.is_entry) {
      const IndexEntry& e = entries_[it.index];
      if (!found || it.dist < best.distance || (it.dist == best.distance && e.id < best.id)) {
        best = {e.id, it.dist};
        found = true;
      }
      continue;
    }
    const Node& n = nodes_[it.index];
    for (std::size_t k = 0; k < n.count; ++k) {
      const std::size_t child = n.first + k;
      if (n.leaf)
        heap.push({box_distance(entries_[child].box, from), true, child});
      else
        heap.push({box_distance(nodes_[child].box, from), false, child});
    }
  }
  return best;
}

std::vector<FeatureId> SpatialIndex::query(const Box& q) const {
  std::vector<FeatureId> out;
  if (entries_.empty()) return out;
  std::vector<std::size_t> stack{root_};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (!n.box.intersects(q)) continue;
    for (std::size_t k = 0; k < n.count; ++k) {
      const std::size_t child = n.first + k;
      if (n.leaf) {
        if (entries_[child].box.intersects(q)) out.push_back(entries_[child].id);
      } else {
        stack.push_back(child);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace vitality
