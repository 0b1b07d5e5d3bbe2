#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "odflow/catalog.hpp"
#include "odflow/features.hpp"
#include "odflow/flows.hpp"
#include "odflow/geometry.hpp"
#include "odflow/text.hpp"
#include "odflow/zoning.hpp"

namespace odflow {

// Deterministic synthetic world: a coarse grid zoning, a nested fine
// subdivision, feature tables at both levels, ground-truth fine flows and a
// trip stream that re-aggregates to them exactly.
//
// All randomness comes from mt19937_64 generators seeded per named stream via
// mix_seed(seed, stream). Draw order within a stream is documented at each
// site; uniform reals use the top-53-bit mapping and integers the modulo
// mapping below, so another implementation of the same generator family can
// reproduce every value.

enum class FlowRule { affine, gravity, noisy_gravity };

inline const char* flow_rule_name(FlowRule rule) {
  switch (rule) {
    case FlowRule::affine: return "affine";
    case FlowRule::gravity: return "gravity";
    case FlowRule::noisy_gravity: return "noisy_gravity";
  }
  return "unknown";
}

inline FlowRule parse_flow_rule(const std::string& s) {
  if (s == "affine") return FlowRule::affine;
  if (s == "gravity") return FlowRule::gravity;
  if (s == "noisy_gravity") return FlowRule::noisy_gravity;
  throw std::runtime_error("unknown flow rule '" + s + "'");
}

struct SynthSpec {
  int coarse_nx = 4;
  int coarse_ny = 4;
  int subdivision = 2;  // fine cells per coarse cell side
  std::uint64_t seed = 0;
  FlowRule rule = FlowRule::affine;
  double noise = 0.0;   // relative noise, noisy_gravity only
  double scale = 1.0;   // trips-per-pair scale
  int nonresidential_fine = 0;
};

struct AffineRule {
  long long base = 0;
  std::array<long long, VariableCatalog::size> origin_coef{};
  std::array<long long, VariableCatalog::size> dest_coef{};
};

struct SynthWorld {
  SynthSpec spec;
  Zoning coarse;
  Zoning fine;
  FeatureTable coarse_features;
  FeatureTable fine_features;
  ODFlowTable fine_flows;
  ODFlowTable coarse_flows;
  std::vector<std::string> fine_parent;  // fine unit index -> coarse unit id
  AffineRule affine;                     // affine rule only
  double gravity_k = 0.0;
  double gravity_soften = 0.0;

  // Emits one pickup/dropoff pair per counted trip, jittered strictly inside
  // the fine cells. Iteration follows the sorted fine flow table; the jitter
  // stream draws four reals per trip (px, py, dx, dy).
  void for_each_trip(const std::function<void(const TripRecord&)>& fn) const;
  void write_trips_csv(std::ostream& out, char delim = ',') const;
  std::vector<TripRecord> make_trips() const;
};

namespace synth_detail {

inline double next_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline long long next_int(std::mt19937_64& rng, long long lo, long long hi) {
  return lo + static_cast<long long>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double next_normal(std::mt19937_64& rng) {
  // Box-Muller; two uniform draws per normal.
  double u1 = next_real(rng);
  double u2 = next_real(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline std::string pad_id(const char* prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04llu", prefix,
                static_cast<unsigned long long>(index));
  return buf;
}

inline Ring cell_ring(double x0, double y0, double side) {
  return Ring{{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}};
}

}  // namespace synth_detail

inline SynthWorld generate(const SynthSpec& spec) {
  if (spec.coarse_nx < 1 || spec.coarse_ny < 1 || spec.subdivision < 1)
    throw std::runtime_error("synth grid dimensions must be positive");
  if (spec.scale <= 0.0) throw std::runtime_error("synth scale must be positive");
  using namespace synth_detail;

  const int nx = spec.coarse_nx, ny = spec.coarse_ny, sub = spec.subdivision;
  const std::size_t coarse_count = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  const int fx = nx * sub, fy = ny * sub;
  const std::size_t fine_count = static_cast<std::size_t>(fx) * static_cast<std::size_t>(fy);
  const double fine_side = 1.0 / sub;
  const std::size_t per_cell = static_cast<std::size_t>(sub) * static_cast<std::size_t>(sub);

  // Zonings: row-major unit ids over each lattice, unit squares of side 1
  // for the coarse grid and 1/sub for the fine grid.
  std::vector<ZoningUnit> coarse_units;
  for (int row = 0; row < ny; ++row)
    for (int col = 0; col < nx; ++col) {
      ZoningUnit unit;
      unit.id = pad_id("Z", static_cast<std::size_t>(row) * nx + col);
      unit.polygons.push_back(make_polygon(cell_ring(col, row, 1.0), {}, unit.id));
      coarse_units.push_back(std::move(unit));
    }
  std::vector<ZoningUnit> fine_units;
  std::vector<std::string> fine_parent;
  std::vector<Point> fine_center;
  for (int row = 0; row < fy; ++row)
    for (int col = 0; col < fx; ++col) {
      ZoningUnit unit;
      const std::size_t index = static_cast<std::size_t>(row) * fx + col;
      unit.id = pad_id("T", index);
      unit.polygons.push_back(
          make_polygon(cell_ring(col * fine_side, row * fine_side, fine_side), {}, unit.id));
      if (spec.nonresidential_fine > 0 &&
          index < static_cast<std::size_t>(spec.nonresidential_fine))
        unit.residential = false;
      fine_parent.push_back(pad_id("Z", static_cast<std::size_t>(row / sub) * nx + col / sub));
      fine_center.push_back(Point{(col + 0.5) * fine_side, (row + 0.5) * fine_side});
      fine_units.push_back(std::move(unit));
    }

  SynthWorld world{spec, Zoning("zone", std::move(coarse_units)),
                   Zoning("tract", std::move(fine_units)),
                   FeatureTable{}, FeatureTable{}, ODFlowTable{}, ODFlowTable{},
                   std::move(fine_parent), AffineRule{}, 0.0, 0.0};
  world.fine_flows.level_name = "tract";
  world.coarse_flows.level_name = "zone";

  auto& fine_table = world.fine_features;
  auto& coarse_table = world.coarse_features;
  for (std::size_t u = 0; u < fine_count; ++u) {
    fine_table.unit_ids.push_back(world.fine.unit(u).id);
    fine_table.residential.push_back(world.fine.unit(u).residential);
  }
  for (std::size_t u = 0; u < coarse_count; ++u) {
    coarse_table.unit_ids.push_back(world.coarse.unit(u).id);
    coarse_table.residential.push_back(true);
  }
  fine_table.values.setZero(static_cast<Eigen::Index>(fine_count), VariableCatalog::size);
  coarse_table.values.setZero(static_cast<Eigen::Index>(coarse_count), VariableCatalog::size);

  std::mt19937_64 feature_rng(mix_seed(spec.seed, 1));  // stream 1: features

  if (spec.rule == FlowRule::affine) {
    // Integer cell patterns, constant across each cell's fine units; coarse
    // features are within-cell sums. Draw order: variable-major, one value
    // per coarse cell, redrawing any all-constant variable row.
    Eigen::MatrixXd cell(static_cast<Eigen::Index>(coarse_count), VariableCatalog::size);
    for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
      while (true) {
        for (std::size_t c = 0; c < coarse_count; ++c)
          cell(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
              static_cast<double>(next_int(feature_rng, 0, 9));
        const auto col = cell.col(static_cast<Eigen::Index>(j));
        if (coarse_count < 2 || col.maxCoeff() > col.minCoeff()) break;
      }
    }
    for (std::size_t u = 0; u < fine_count; ++u) {
      const std::size_t parent = *world.coarse.find(world.fine_parent[u]);
      fine_table.values.row(static_cast<Eigen::Index>(u)) =
          cell.row(static_cast<Eigen::Index>(parent));
    }
    coarse_table.values = static_cast<double>(per_cell) * cell;

    // Stream 2: integer rule coefficients; base keeps every count >= 1.
    std::mt19937_64 rule_rng(mix_seed(spec.seed, 2));
    long long penalty = 0;
    for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
      world.affine.origin_coef[j] = next_int(rule_rng, -3, 3);
      world.affine.dest_coef[j] = next_int(rule_rng, -3, 3);
      penalty += 9 * std::max(0LL, -world.affine.origin_coef[j]);
      penalty += 9 * std::max(0LL, -world.affine.dest_coef[j]);
    }
    world.affine.base = 1 + penalty;
    const long long multiplier = std::max(1LL, std::llround(spec.scale));

    for (std::size_t o = 0; o < fine_count; ++o)
      for (std::size_t d = 0; d < fine_count; ++d) {
        long long count = world.affine.base;
        for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
          count += world.affine.origin_coef[j] *
                   static_cast<long long>(fine_table.values(static_cast<Eigen::Index>(o),
                                                            static_cast<Eigen::Index>(j)));
          count += world.affine.dest_coef[j] *
                   static_cast<long long>(fine_table.values(static_cast<Eigen::Index>(d),
                                                            static_cast<Eigen::Index>(j)));
        }
        world.fine_flows.add(fine_table.unit_ids[o], fine_table.unit_ids[d],
                             static_cast<std::uint64_t>(count * multiplier));
      }
  } else {
    // Cell-level base patterns with bounded within-cell heterogeneity, so the
    // standardized feature distributions at the two levels stay close (the
    // downscaling transfer target) while fine units remain individually
    // informative. Draw order: per-cell bases (cell-major, catalog order),
    // then per-fine-unit jitters (unit-major, catalog order).
    const double extent_x = static_cast<double>(nx);
    const double extent_y = static_cast<double>(ny);
    Eigen::MatrixXd base(static_cast<Eigen::Index>(coarse_count), VariableCatalog::size);
    for (std::size_t c = 0; c < coarse_count; ++c)
      for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
        const std::string_view name = VariableCatalog::name(j);
        double v;
        if (name == "total_population") {
          v = std::exp(std::log(200.0) +
                       next_real(feature_rng) * (std::log(5000.0) - std::log(200.0)));
        } else if (name == "total_commuters") {
          v = base(static_cast<Eigen::Index>(c), 0) * (0.3 + 0.2 * next_real(feature_rng));
        } else {
          v = 0.05 + 0.9 * next_real(feature_rng);
        }
        base(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = v;
      }
    for (std::size_t u = 0; u < fine_count; ++u) {
      auto row = fine_table.values.row(static_cast<Eigen::Index>(u));
      const std::size_t parent = *world.coarse.find(world.fine_parent[u]);
      const Point c = fine_center[u];
      for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
        const std::string_view name = VariableCatalog::name(j);
        const double cell = base(static_cast<Eigen::Index>(parent), static_cast<Eigen::Index>(j));
        double v;
        if (name == "total_population" || name == "total_commuters") {
          v = std::round(cell * (0.75 + 0.5 * next_real(feature_rng)));
        } else if (name == "median_household_income") {
          v = std::round(20000.0 + 60000.0 * (c.x / extent_x) +
                         5000.0 * next_real(feature_rng));
        } else if (name == "pct_commute_transit") {
          v = 0.1 + 0.6 * (c.y / extent_y) + 0.1 * next_real(feature_rng);
        } else {
          v = std::clamp(cell + 0.1 * (next_real(feature_rng) - 0.5), 0.0, 1.0);
        }
        row(static_cast<Eigen::Index>(j)) = v;
      }
    }
    for (std::size_t u = 0; u < fine_count; ++u) {
      const std::size_t parent = *world.coarse.find(world.fine_parent[u]);
      coarse_table.values.row(static_cast<Eigen::Index>(parent)) +=
          fine_table.values.row(static_cast<Eigen::Index>(u));
    }

    // Gravity with a softened denominator (the bare inverse square is
    // undefined for self pairs): w = P_o P_d / (soften^2 + dist^2), k chosen
    // so the mean pair count lands at 40 * scale.
    world.gravity_soften = 4.0;
    const double soften_sq = world.gravity_soften * world.gravity_soften;
    const Eigen::Index pop_col = 0;
    double weight_sum = 0.0;
    for (std::size_t o = 0; o < fine_count; ++o)
      for (std::size_t d = 0; d < fine_count; ++d) {
        const double ddx = fine_center[o].x - fine_center[d].x;
        const double ddy = fine_center[o].y - fine_center[d].y;
        weight_sum += fine_table.values(static_cast<Eigen::Index>(o), pop_col) *
                      fine_table.values(static_cast<Eigen::Index>(d), pop_col) /
                      (soften_sq + ddx * ddx + ddy * ddy);
      }
    const double mean_weight = weight_sum / static_cast<double>(fine_count * fine_count);
    world.gravity_k = 40.0 * spec.scale / mean_weight;

    // Stream 3: one normal draw per ordered pair (noisy rule only).
    std::mt19937_64 noise_rng(mix_seed(spec.seed, 3));
    for (std::size_t o = 0; o < fine_count; ++o)
      for (std::size_t d = 0; d < fine_count; ++d) {
        const double ddx = fine_center[o].x - fine_center[d].x;
        const double ddy = fine_center[o].y - fine_center[d].y;
        double w = fine_table.values(static_cast<Eigen::Index>(o), pop_col) *
                   fine_table.values(static_cast<Eigen::Index>(d), pop_col) /
                   (soften_sq + ddx * ddx + ddy * ddy);
        double factor = 1.0;
        if (spec.rule == FlowRule::noisy_gravity)
          factor = std::max(0.0, 1.0 + spec.noise * next_normal(noise_rng));
        const long long count = std::llround(world.gravity_k * w * factor);
        if (count > 0)
          world.fine_flows.add(fine_table.unit_ids[o], fine_table.unit_ids[d],
                               static_cast<std::uint64_t>(count));
      }
  }

  fine_table.rebuild_index();
  coarse_table.rebuild_index();

  // Coarse flows are the containment-aggregation of the fine flows.
  for (const auto& [pair, count] : world.fine_flows.entries) {
    const std::size_t o = *world.fine.find(pair.first);
    const std::size_t d = *world.fine.find(pair.second);
    world.coarse_flows.add(world.fine_parent[o], world.fine_parent[d], count);
  }
  return world;
}

inline void SynthWorld::for_each_trip(const std::function<void(const TripRecord&)>& fn) const {
  using namespace synth_detail;
  std::mt19937_64 jitter_rng(mix_seed(spec.seed, 4));  // stream 4: trip jitter
  const double fine_side = 1.0 / spec.subdivision;
  auto cell_point = [&](std::size_t unit_index) {
    const Polygon& poly = fine.unit(unit_index).polygons.front();
    const Point base{poly.bbox.min_x, poly.bbox.min_y};
    return Point{base.x + fine_side * (0.1 + 0.8 * next_real(jitter_rng)),
                 base.y + fine_side * (0.1 + 0.8 * next_real(jitter_rng))};
  };
  for (const auto& [pair, count] : fine_flows.entries) {
    const std::size_t o = *fine.find(pair.first);
    const std::size_t d = *fine.find(pair.second);
    for (std::uint64_t t = 0; t < count; ++t) {
      TripRecord trip;
      trip.pickup = cell_point(o);
      trip.dropoff = cell_point(d);
      fn(trip);
    }
  }
}

inline void SynthWorld::write_trips_csv(std::ostream& out, char delim) const {
  out << "pickup_x" << delim << "pickup_y" << delim << "dropoff_x" << delim << "dropoff_y\n";
  for_each_trip([&](const TripRecord& trip) {
    out << format_double(trip.pickup.x) << delim << format_double(trip.pickup.y) << delim
        << format_double(trip.dropoff.x) << delim << format_double(trip.dropoff.y) << "\n";
  });
}

inline std::vector<TripRecord> SynthWorld::make_trips() const {
  std::vector<TripRecord> trips;
  trips.reserve(fine_flows.total_trips);
  for_each_trip([&](const TripRecord& trip) { trips.push_back(trip); });
  return trips;
}

}  // namespace odflow
