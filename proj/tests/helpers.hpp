#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "odflow/geometry.hpp"
#include "odflow/zoning.hpp"

namespace test_helpers {

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("odflow_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Independent containment oracle: counts proper crossings of the horizontal
// ray from p toward +x against every ring edge, via explicit segment-ray
// intersection. Boundary incidence is reported separately.
struct RayCountResult {
  int crossings = 0;
  bool on_boundary = false;
};

inline RayCountResult ray_count(const odflow::Point& p, const odflow::Ring& ring) {
  RayCountResult result;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const odflow::Point& a = ring[i];
    const odflow::Point& b = ring[(i + 1) % n];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross == 0.0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
        p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y))
      result.on_boundary = true;
    const bool spans = (a.y > p.y) != (b.y > p.y);
    if (!spans) continue;
    const double t = (p.y - a.y) / (b.y - a.y);
    const double hit_x = a.x + t * (b.x - a.x);
    if (hit_x > p.x) ++result.crossings;
  }
  return result;
}

inline bool oracle_contains(const odflow::Point& p, const odflow::Polygon& poly) {
  RayCountResult ext = ray_count(p, poly.exterior);
  if (ext.on_boundary) return true;
  int crossings = ext.crossings;
  for (const odflow::Ring& hole : poly.holes) {
    RayCountResult h = ray_count(p, hole);
    if (h.on_boundary) return true;
    crossings += h.crossings;
  }
  return crossings % 2 == 1;
}

// Random zoning of up to max_units axis-aligned rectangles (overlaps allowed;
// catalog-order tie-break resolves them).
inline odflow::Zoning random_zoning(std::mt19937_64& rng, int max_units) {
  std::uniform_int_distribution<int> count_dist(1, max_units);
  std::uniform_real_distribution<double> pos(0.0, 10.0);
  std::uniform_real_distribution<double> side(0.3, 3.0);
  const int count = count_dist(rng);
  std::vector<odflow::ZoningUnit> units;
  for (int i = 0; i < count; ++i) {
    const double x0 = pos(rng), y0 = pos(rng);
    const double w = side(rng), h = side(rng);
    odflow::ZoningUnit unit;
    unit.id = "U" + std::to_string(i);
    unit.polygons.push_back(odflow::make_polygon(
        odflow::Ring{{x0, y0}, {x0 + w, y0}, {x0 + w, y0 + h}, {x0, y0 + h}}, {}, unit.id));
    units.push_back(std::move(unit));
  }
  return odflow::Zoning("random", std::move(units));
}

}  // namespace test_helpers
