#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "odflow/zoning.hpp"

namespace odflow {

namespace geojson_detail {

inline Ring parse_ring(const nlohmann::json& coords, const std::string& context) {
  if (!coords.is_array()) throw std::runtime_error(context + ": ring is not an array");
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2)
      throw std::runtime_error(context + ": ring position needs at least two coordinates");
    ring.push_back(Point{pos[0].get<double>(), pos[1].get<double>()});
  }
  return ring;
}

inline Polygon parse_polygon(const nlohmann::json& coords, const std::string& context) {
  if (!coords.is_array() || coords.empty())
    throw std::runtime_error(context + ": polygon has no rings");
  Ring exterior = parse_ring(coords[0], context);
  std::vector<Ring> holes;
  for (std::size_t i = 1; i < coords.size(); ++i)
    holes.push_back(parse_ring(coords[i], context));
  return make_polygon(std::move(exterior), std::move(holes), context);
}

inline nlohmann::ordered_json ring_json(const Ring& ring) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const Point& p : ring) out.push_back({p.x, p.y});
  out.push_back({ring.front().x, ring.front().y});  // GeoJSON rings close explicitly
  return out;
}

inline nlohmann::ordered_json geometry_json(const ZoningUnit& unit) {
  nlohmann::ordered_json geom;
  auto polygon_coords = [](const Polygon& poly) {
    nlohmann::ordered_json coords = nlohmann::ordered_json::array();
    coords.push_back(ring_json(poly.exterior));
    for (const Ring& hole : poly.holes) coords.push_back(ring_json(hole));
    return coords;
  };
  if (unit.polygons.size() == 1) {
    geom["type"] = "Polygon";
    geom["coordinates"] = polygon_coords(unit.polygons.front());
  } else {
    geom["type"] = "MultiPolygon";
    nlohmann::ordered_json multi = nlohmann::ordered_json::array();
    for (const Polygon& poly : unit.polygons) multi.push_back(polygon_coords(poly));
    geom["coordinates"] = multi;
  }
  return geom;
}

}  // namespace geojson_detail

// Reads a GeoJSON FeatureCollection into a Zoning. Each feature must carry a
// string property named id_property; an optional boolean property
// `residential` marks units with permanent residents (default true).
inline Zoning load_zoning_geojson(std::istream& in, const std::string& id_property,
                                  const std::string& level_name) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("invalid GeoJSON: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection")
    throw std::runtime_error("zoning GeoJSON must be a FeatureCollection");
  if (!doc.contains("features") || !doc["features"].is_array())
    throw std::runtime_error("zoning GeoJSON has no features array");

  std::vector<ZoningUnit> units;
  for (const auto& feature : doc["features"]) {
    const auto& props = feature.value("properties", nlohmann::json::object());
    if (!props.contains(id_property) || !props[id_property].is_string())
      throw std::runtime_error("feature missing string property '" + id_property + "'");
    ZoningUnit unit;
    unit.id = props[id_property].get<std::string>();
    if (props.contains("residential")) {
      if (!props["residential"].is_boolean())
        throw std::runtime_error("unit '" + unit.id + "': residential property must be boolean");
      unit.residential = props["residential"].get<bool>();
    }
    if (!feature.contains("geometry") || feature["geometry"].is_null())
      throw std::runtime_error("unit '" + unit.id + "' has no geometry");
    const auto& geom = feature["geometry"];
    std::string type = geom.value("type", "");
    const std::string context = "unit '" + unit.id + "'";
    if (type == "Polygon") {
      unit.polygons.push_back(geojson_detail::parse_polygon(geom["coordinates"], context));
    } else if (type == "MultiPolygon") {
      for (const auto& coords : geom["coordinates"])
        unit.polygons.push_back(geojson_detail::parse_polygon(coords, context));
    } else {
      throw std::runtime_error(context + ": unsupported geometry type '" + type + "'");
    }
    units.push_back(std::move(unit));
  }
  return Zoning(level_name, std::move(units));
}

inline Zoning load_zoning_geojson_file(const std::string& path, const std::string& id_property,
                                       const std::string& level_name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open zoning file '" + path + "'");
  return load_zoning_geojson(in, id_property, level_name);
}

inline nlohmann::ordered_json zoning_to_geojson(const Zoning& zoning,
                                                const std::string& id_property = "id") {
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = nlohmann::ordered_json::array();
  for (const ZoningUnit& unit : zoning.units()) {
    nlohmann::ordered_json feature;
    feature["type"] = "Feature";
    feature["properties"][id_property] = unit.id;
    feature["properties"]["residential"] = unit.residential;
    feature["geometry"] = geojson_detail::geometry_json(unit);
    doc["features"].push_back(std::move(feature));
  }
  return doc;
}

}  // namespace odflow
