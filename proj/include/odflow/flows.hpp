#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "odflow/text.hpp"
#include "odflow/zoning.hpp"

namespace odflow {

struct TripRecord {
  Point pickup;
  Point dropoff;
};

struct ODFlowTable {
  std::string level_name;
  // Sorted by (origin, destination) so emission order is deterministic.
  std::map<std::pair<std::string, std::string>, std::uint64_t> entries;
  std::uint64_t total_trips = 0;

  void add(const std::string& origin, const std::string& destination, std::uint64_t count) {
    if (count == 0) return;
    entries[{origin, destination}] += count;
    total_trips += count;
  }

  std::uint64_t count(const std::string& origin, const std::string& destination) const {
    auto it = entries.find({origin, destination});
    return it == entries.end() ? 0 : it->second;
  }
};

struct TripColumns {
  std::string pickup_x = "pickup_x";
  std::string pickup_y = "pickup_y";
  std::string dropoff_x = "dropoff_x";
  std::string dropoff_y = "dropoff_y";
};

struct AggregateResult {
  ODFlowTable table;
  std::uint64_t rows = 0;       // non-empty data rows seen
  std::uint64_t dropped = 0;    // spatially unresolved trips
  std::uint64_t malformed = 0;  // unreadable rows, tallied separately
};

namespace flows_detail {

inline std::uint64_t pair_key(std::uint32_t o, std::uint32_t d) {
  return (static_cast<std::uint64_t>(o) << 32) | d;
}

}  // namespace flows_detail

// Streaming point-in-polygon aggregation. Trips are never materialized; only
// the per-pair count table is held in memory.
class TripAggregator {
 public:
  TripAggregator(const Zoning& zoning, const SpatialIndex& index)
      : zoning_(zoning), index_(index) {}

  void add(const TripRecord& trip) {
    ++rows_;
    if (!trip.pickup.finite() || !trip.dropoff.finite()) {
      ++malformed_;
      return;
    }
    auto origin = assign_unit(index_, zoning_, trip.pickup, scratch_);
    if (!origin) {
      ++dropped_;
      return;
    }
    auto destination = assign_unit(index_, zoning_, trip.dropoff, scratch_);
    if (!destination) {
      ++dropped_;
      return;
    }
    ++counts_[flows_detail::pair_key(static_cast<std::uint32_t>(*origin),
                                     static_cast<std::uint32_t>(*destination))];
  }

  void add_malformed() {
    ++rows_;
    ++malformed_;
  }

  // Partial tables merge by addition; merge order is irrelevant.
  void merge(const TripAggregator& other) {
    rows_ += other.rows_;
    dropped_ += other.dropped_;
    malformed_ += other.malformed_;
    for (const auto& [key, count] : other.counts_) counts_[key] += count;
  }

  AggregateResult finish() const {
    AggregateResult result;
    result.table.level_name = zoning_.level_name();
    result.rows = rows_;
    result.dropped = dropped_;
    result.malformed = malformed_;
    for (const auto& [key, count] : counts_) {
      const std::string& origin = zoning_.unit(key >> 32).id;
      const std::string& destination = zoning_.unit(key & 0xFFFFFFFFULL).id;
      result.table.add(origin, destination, count);
    }
    return result;
  }

 private:
  const Zoning& zoning_;
  const SpatialIndex& index_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
  std::vector<SpatialIndex::Entry> scratch_;
  std::uint64_t rows_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t malformed_ = 0;
};

template <typename TripRange>
AggregateResult aggregate_trips(const TripRange& trips, const Zoning& zoning,
                                const SpatialIndex& index) {
  TripAggregator agg(zoning, index);
  for (const TripRecord& trip : trips) agg.add(trip);
  return agg.finish();
}

// Delimited trip ingestion. Header row is required and must contain the four
// configured coordinate columns; unreadable rows are tallied, not fatal.
inline AggregateResult filter_and_aggregate(std::istream& in, const Zoning& zoning,
                                            const SpatialIndex& index,
                                            const TripColumns& columns = {}, char delim = ',') {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trip input is empty (header required)");
  auto header = split(trim(line), delim);
  long px = -1, py = -1, dx = -1, dy = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string_view name = trim(header[i]);
    long idx = static_cast<long>(i);
    if (name == columns.pickup_x) px = idx;
    else if (name == columns.pickup_y) py = idx;
    else if (name == columns.dropoff_x) dx = idx;
    else if (name == columns.dropoff_y) dy = idx;
  }
  if (px < 0 || py < 0 || dx < 0 || dy < 0)
    throw std::runtime_error("trip header missing required columns (" + columns.pickup_x + ", " +
                             columns.pickup_y + ", " + columns.dropoff_x + ", " +
                             columns.dropoff_y + ")");
  const std::size_t needed = static_cast<std::size_t>(std::max(std::max(px, py), std::max(dx, dy))) + 1;

  TripAggregator agg(zoning, index);
  while (std::getline(in, line)) {
    std::string_view row = trim(line);
    if (row.empty()) continue;
    auto fields = split(row, delim);
    if (fields.size() < needed) {
      agg.add_malformed();
      continue;
    }
    auto fpx = parse_double(fields[static_cast<std::size_t>(px)]);
    auto fpy = parse_double(fields[static_cast<std::size_t>(py)]);
    auto fdx = parse_double(fields[static_cast<std::size_t>(dx)]);
    auto fdy = parse_double(fields[static_cast<std::size_t>(dy)]);
    if (!fpx || !fpy || !fdx || !fdy) {
      agg.add_malformed();
      continue;
    }
    agg.add(TripRecord{Point{*fpx, *fpy}, Point{*fdx, *fdy}});
  }
  return agg.finish();
}

inline void write_flows_csv(std::ostream& out, const ODFlowTable& table, char delim = ',') {
  out << "origin_id" << delim << "destination_id" << delim << "count\n";
  for (const auto& [pair, count] : table.entries)
    out << pair.first << delim << pair.second << delim << count << "\n";
}

inline ODFlowTable read_flows_csv(std::istream& in, const std::string& level_name = "",
                                  char delim = ',') {
  ODFlowTable table;
  table.level_name = level_name;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("flow input is empty (header required)");
  auto header = split(trim(line), delim);
  long oc = -1, dc = -1, cc = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string_view name = trim(header[i]);
    if (name == "origin_id") oc = static_cast<long>(i);
    else if (name == "destination_id") dc = static_cast<long>(i);
    else if (name == "count") cc = static_cast<long>(i);
  }
  if (oc < 0 || dc < 0 || cc < 0)
    throw std::runtime_error("flow header must contain origin_id, destination_id, count");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    auto fields = split(row, delim);
    std::size_t needed = static_cast<std::size_t>(std::max(std::max(oc, dc), cc)) + 1;
    if (fields.size() < needed)
      throw std::runtime_error("flow row " + std::to_string(line_no) + ": too few fields");
    auto count = parse_int(fields[static_cast<std::size_t>(cc)]);
    if (!count || *count < 0)
      throw std::runtime_error("flow row " + std::to_string(line_no) + ": bad count");
    table.add(std::string(trim(fields[static_cast<std::size_t>(oc)])),
              std::string(trim(fields[static_cast<std::size_t>(dc)])),
              static_cast<std::uint64_t>(*count));
  }
  return table;
}

}  // namespace odflow
