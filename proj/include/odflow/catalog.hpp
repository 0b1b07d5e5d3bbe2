#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace odflow {

// The fixed catalog of the 30 per-unit demographic, socioeconomic and
// commuting variables. Order is fixed for the life of a run; design-matrix
// columns 0..29 are the origin unit's values and 30..59 the destination's.
struct VariableCatalog {
  static constexpr std::size_t size = 30;

  struct Entry {
    const char* name;
    const char* category;
  };

  static const std::array<Entry, size>& entries() {
    static const std::array<Entry, size> table = {{
        {"total_population", "population"},
        {"total_commuters", "population"},
        {"pct_age_18_or_younger", "age"},
        {"pct_age_60_or_older", "age"},
        {"pct_male", "gender"},
        {"pct_white", "race_ethnicity"},
        {"pct_black", "race_ethnicity"},
        {"pct_asian", "race_ethnicity"},
        {"pct_hispanic", "race_ethnicity"},
        {"pct_college_degree", "education"},
        {"pct_below_poverty", "economic"},
        {"pct_unemployed", "economic"},
        {"median_household_income", "economic"},
        {"pct_housing_vacant", "housing"},
        {"pct_housing_renter_occupied", "housing"},
        {"pct_same_house_1yr", "stability"},
        {"pct_foreign_born", "stability"},
        {"pct_no_vehicle", "mobility"},
        {"pct_commute_drive_alone", "commuting_methods"},
        {"pct_commute_carpool", "commuting_methods"},
        {"pct_commute_bicycle", "commuting_methods"},
        {"pct_commute_motorcycle", "commuting_methods"},
        {"pct_commute_transit", "commuting_methods"},
        {"pct_commute_walk", "commuting_methods"},
        {"pct_commute_taxi", "commuting_methods"},
        {"pct_work_from_home", "commuting_methods"},
        {"pct_commute_under_30", "commuting_time"},
        {"pct_commute_30_60", "commuting_time"},
        {"pct_commute_60_90", "commuting_time"},
        {"pct_commute_over_90", "commuting_time"},
    }};
    return table;
  }

  static std::string_view name(std::size_t i) { return entries()[i].name; }
  static std::string_view category(std::size_t i) { return entries()[i].category; }

  static std::size_t index_of(std::string_view name) {
    for (std::size_t i = 0; i < size; ++i)
      if (entries()[i].name == name) return i;
    throw std::runtime_error("unknown variable '" + std::string(name) + "'");
  }

  static bool contains(std::string_view name) {
    for (std::size_t i = 0; i < size; ++i)
      if (entries()[i].name == name) return true;
    return false;
  }
};

}  // namespace odflow
