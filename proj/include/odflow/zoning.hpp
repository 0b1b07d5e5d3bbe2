#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "odflow/geometry.hpp"

namespace odflow {

struct ZoningUnit {
  std::string id;
  bool residential = true;
  std::vector<Polygon> polygons;  // a unit may be several disjoint polygons
};

class Zoning {
 public:
  Zoning(std::string level_name, std::vector<ZoningUnit> units)
      : level_name_(std::move(level_name)), units_(std::move(units)) {
    if (units_.empty()) throw std::runtime_error("zoning '" + level_name_ + "' has no units");
    for (std::size_t i = 0; i < units_.size(); ++i) {
      const ZoningUnit& u = units_[i];
      if (u.id.empty()) throw std::runtime_error("zoning unit with empty id");
      if (u.polygons.empty()) throw std::runtime_error("zoning unit '" + u.id + "' has no polygons");
      if (!index_of_.emplace(u.id, i).second)
        throw std::runtime_error("duplicate zoning unit id '" + u.id + "'");
    }
  }

  const std::string& level_name() const { return level_name_; }
  std::size_t size() const { return units_.size(); }
  const std::vector<ZoningUnit>& units() const { return units_; }
  const ZoningUnit& unit(std::size_t i) const { return units_[i]; }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_of_.find(id);
    if (it == index_of_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::string level_name_;
  std::vector<ZoningUnit> units_;
  std::unordered_map<std::string, std::size_t> index_of_;
};

// Packed STR bounding-box tree over every polygon of a zoning. Queries return
// a superset of the polygons containing the point; queries are pure and safe
// to run from any number of threads.
class SpatialIndex {
 public:
  struct Entry {
    BoundingBox box;
    std::uint32_t unit = 0;
    std::uint32_t polygon = 0;
  };

  explicit SpatialIndex(const Zoning& zoning) {
    for (std::size_t u = 0; u < zoning.size(); ++u)
      for (std::size_t p = 0; p < zoning.unit(u).polygons.size(); ++p)
        entries_.push_back(Entry{zoning.unit(u).polygons[p].bbox,
                                 static_cast<std::uint32_t>(u),
                                 static_cast<std::uint32_t>(p)});
    build();
  }

  // Candidate (unit, polygon) pairs whose bounding box contains p.
  void query(const Point& p, std::vector<Entry>& out) const {
    static thread_local std::vector<std::size_t> stack;
    out.clear();
    if (nodes_.empty()) return;
    stack.clear();
    stack.push_back(0);
    while (!stack.empty()) {
      std::size_t idx = stack.back();
      stack.pop_back();
      const Node& node = nodes_[idx];
      if (!node.box.contains(p)) continue;
      if (node.leaf) {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
          if (entries_[i].box.contains(p)) out.push_back(entries_[i]);
      } else {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
          stack.push_back(i);
      }
    }
  }

  std::vector<Entry> query(const Point& p) const {
    std::vector<Entry> out;
    query(p, out);
    return out;
  }

 private:
  struct Node {
    BoundingBox box;
    std::uint32_t first = 0;  // entry index (leaf) or first child node index
    std::uint32_t count = 0;
    bool leaf = true;
  };

  static constexpr std::size_t kNodeCapacity = 8;

  void build() {
    if (entries_.empty()) return;
    // Sort-tile-recursive packing of the entry list into leaf nodes.
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      double ax = a.box.min_x + a.box.max_x, bx = b.box.min_x + b.box.max_x;
      if (ax != bx) return ax < bx;
      double ay = a.box.min_y + a.box.max_y, by = b.box.min_y + b.box.max_y;
      return ay < by;
    });
    const std::size_t n = entries_.size();
    const std::size_t leaf_count = (n + kNodeCapacity - 1) / kNodeCapacity;
    const std::size_t slice_count =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(leaf_count))));
    const std::size_t slice_size = (n + slice_count - 1) / slice_count;
    for (std::size_t s = 0; s * slice_size < n; ++s) {
      auto first = entries_.begin() + static_cast<std::ptrdiff_t>(s * slice_size);
      auto last = entries_.begin() +
                  static_cast<std::ptrdiff_t>(std::min(n, (s + 1) * slice_size));
      std::sort(first, last, [](const Entry& a, const Entry& b) {
        double ay = a.box.min_y + a.box.max_y, by = b.box.min_y + b.box.max_y;
        if (ay != by) return ay < by;
        double ax = a.box.min_x + a.box.max_x, bx = b.box.min_x + b.box.max_x;
        return ax < bx;
      });
    }
    std::vector<Node> level;
    for (std::size_t start = 0; start < n; start += kNodeCapacity) {
      Node node;
      node.leaf = true;
      node.first = static_cast<std::uint32_t>(start);
      node.count = static_cast<std::uint32_t>(std::min(kNodeCapacity, n - start));
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
        node.box.expand(entries_[i].box);
      level.push_back(node);
    }
    // Pack upper levels until a single root remains; root ends at index 0.
    std::vector<std::vector<Node>> levels{std::move(level)};
    while (levels.back().size() > 1) {
      const std::vector<Node>& below = levels.back();
      std::vector<Node> parents;
      for (std::size_t start = 0; start < below.size(); start += kNodeCapacity) {
        Node node;
        node.leaf = false;
        node.first = static_cast<std::uint32_t>(start);
        node.count = static_cast<std::uint32_t>(std::min(kNodeCapacity, below.size() - start));
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
          node.box.expand(below[i].box);
        parents.push_back(node);
      }
      levels.push_back(std::move(parents));
    }
    // Flatten top-down so child indices can be rebased into one array.
    std::vector<std::uint32_t> level_offset(levels.size(), 0);
    std::uint32_t offset = 0;
    for (std::size_t l = levels.size(); l-- > 0;) {
      level_offset[l] = offset;
      offset += static_cast<std::uint32_t>(levels[l].size());
    }
    nodes_.resize(offset);
    for (std::size_t l = levels.size(); l-- > 0;) {
      for (std::size_t i = 0; i < levels[l].size(); ++i) {
        Node node = levels[l][i];
        if (!node.leaf) node.first += level_offset[l - 1];
        nodes_[level_offset[l] + i] = node;
      }
    }
  }

  std::vector<Entry> entries_;
  std::vector<Node> nodes_;
};

namespace zoning_detail {

inline bool unit_contains(const ZoningUnit& unit, const Point& p) {
  for (const Polygon& poly : unit.polygons)
    if (point_in_polygon(p, poly)) return true;
  return false;
}

}  // namespace zoning_detail

// Linear-scan reference: first unit in catalog order containing p.
inline std::optional<std::size_t> assign_unit_scan(const Zoning& zoning, const Point& p) {
  for (std::size_t u = 0; u < zoning.size(); ++u)
    if (zoning_detail::unit_contains(zoning.unit(u), p)) return u;
  return std::nullopt;
}

// Indexed assignment; agrees with assign_unit_scan for every point because
// candidates are tested in ascending catalog order.
inline std::optional<std::size_t> assign_unit(const SpatialIndex& index, const Zoning& zoning,
                                              const Point& p,
                                              std::vector<SpatialIndex::Entry>& scratch) {
  index.query(p, scratch);
  if (scratch.empty()) return std::nullopt;
  std::sort(scratch.begin(), scratch.end(),
            [](const SpatialIndex::Entry& a, const SpatialIndex::Entry& b) {
              if (a.unit != b.unit) return a.unit < b.unit;
              return a.polygon < b.polygon;
            });
  for (const SpatialIndex::Entry& e : scratch) {
    const Polygon& poly = zoning.unit(e.unit).polygons[e.polygon];
    if (point_in_polygon(p, poly)) return e.unit;
  }
  return std::nullopt;
}

inline std::optional<std::size_t> assign_unit(const SpatialIndex& index, const Zoning& zoning,
                                              const Point& p) {
  std::vector<SpatialIndex::Entry> scratch;
  return assign_unit(index, zoning, p, scratch);
}

}  // namespace odflow
