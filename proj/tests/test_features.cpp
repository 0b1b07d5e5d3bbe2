#include <catch2/catch.hpp>

#include <random>
#include <sstream>

#include "odflow/features.hpp"

using namespace odflow;

namespace {

FeatureTable make_table(const std::vector<std::pair<std::string, bool>>& units,
                        std::uint64_t seed = 1) {
  FeatureTable table;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(0.0, 100.0);
  table.values.resize(static_cast<Eigen::Index>(units.size()), VariableCatalog::size);
  for (const auto& [id, residential] : units) {
    table.unit_ids.push_back(id);
    table.residential.push_back(residential);
  }
  for (Eigen::Index i = 0; i < table.values.rows(); ++i)
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) table.values(i, j) = value(rng);
  table.rebuild_index();
  return table;
}

}  // namespace

TEST_CASE("catalog has exactly 30 unique variables", "[features]") {
  REQUIRE(VariableCatalog::size == 30);
  for (std::size_t i = 0; i < VariableCatalog::size; ++i)
    for (std::size_t j = i + 1; j < VariableCatalog::size; ++j)
      CHECK(VariableCatalog::name(i) != VariableCatalog::name(j));
  CHECK(VariableCatalog::index_of("total_population") == 0);
  CHECK_THROWS(VariableCatalog::index_of("no_such_variable"));
}

TEST_CASE("mean imputation fills non-residential units with residential means", "[features]") {
  FeatureTable table = make_table({{"R1", true}, {"R2", true}, {"N", false}});
  table.values(0, 0) = 100.0;
  table.values(1, 0) = 300.0;
  table.values(2, 0) = -1.0;
  const FeatureTable imputed = mean_impute(table);
  CHECK(imputed.values(2, 0) == Approx(200.0));
  CHECK(imputed.values(0, 0) == 100.0);
  CHECK(imputed.values(1, 0) == 300.0);
}

TEST_CASE("imputation is the identity when every unit is residential", "[features]") {
  const FeatureTable table = make_table({{"R1", true}, {"R2", true}});
  const FeatureTable imputed = mean_impute(table);
  CHECK((imputed.values - table.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("imputation is idempotent", "[features]") {
  const FeatureTable table =
      make_table({{"R1", true}, {"R2", true}, {"N1", false}, {"N2", false}});
  const FeatureTable once = mean_impute(table);
  const FeatureTable twice = mean_impute(once);
  CHECK((once.values - twice.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("imputation without residential units is an error", "[features]") {
  const FeatureTable table = make_table({{"N1", false}, {"N2", false}});
  CHECK_THROWS(mean_impute(table));
}

TEST_CASE("zscore_fit matches the hand-computed population values", "[features]") {
  Eigen::Vector3d v{1.0, 2.0, 3.0};
  const MuSigma p = zscore_fit(v);
  CHECK(p.mu == Approx(2.0));
  CHECK(p.sigma == Approx(0.816496580927726).epsilon(1e-12));
  const Eigen::VectorXd z = zscore_apply(v, p);
  CHECK(z(0) == Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(z(1) == Approx(0.0).margin(1e-15));
  CHECK(z(2) == Approx(1.224744871391589).epsilon(1e-12));
  CHECK(zscore_apply(2.0, p) == Approx(0.0).margin(1e-15));
}

TEST_CASE("constant columns are a degenerate-variable error", "[features]") {
  Eigen::Vector3d v{5.0, 5.0, 5.0};
  CHECK_THROWS_WITH(zscore_fit(v, true, "pct_male"),
                    Catch::Matchers::Contains("pct_male"));
  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK_THROWS(zscore_fit(one));
}

TEST_CASE("standardization is exact on the fitting sample", "[features]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> value(-10.0, 50.0);
  for (int round = 0; round < 100; ++round) {
    const int n = 2 + static_cast<int>(rng() % 200);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = value(rng);
    const MuSigma p = zscore_fit(v);
    const Eigen::VectorXd z = zscore_apply(v, p);
    CHECK(std::abs(z.mean()) < 1e-9);
    const double sigma = std::sqrt(z.array().square().sum() / n - z.mean() * z.mean());
    CHECK(std::abs(sigma - 1.0) < 1e-9);
    // invert . apply is the identity to 1e-9 relative
    const Eigen::VectorXd back = zscore_invert(z, p);
    for (int i = 0; i < n; ++i)
      CHECK(back(i) == Approx(v(i)).epsilon(1e-9).margin(1e-9));
    // refitting an already-standardized column is idempotent
    const MuSigma p2 = zscore_fit(z);
    CHECK(std::abs(p2.mu) < 1e-12);
    CHECK(p2.sigma == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sample standard deviation is selectable", "[features]") {
  Eigen::Vector3d v{1.0, 2.0, 3.0};
  const MuSigma p = zscore_fit(v, false);
  CHECK(p.sigma == Approx(1.0));
}

TEST_CASE("feature table round-trips through csv with residential flags", "[features]") {
  const FeatureTable table = make_table({{"A", true}, {"B", false}, {"C", true}});
  std::ostringstream out;
  write_features_csv(out, table);
  std::istringstream in(out.str());
  const FeatureTable back = read_features_csv(in);
  REQUIRE(back.units() == 3);
  CHECK(back.unit_ids == table.unit_ids);
  CHECK(back.residential == table.residential);
  CHECK((back.values - table.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("feature csv rejects unknown and missing columns", "[features]") {
  std::istringstream unknown("unit_id,bogus_column\nA,1\n");
  CHECK_THROWS(read_features_csv(unknown));
  std::ostringstream partial;
  partial << "unit_id";
  for (std::size_t j = 0; j + 1 < VariableCatalog::size; ++j)
    partial << "," << VariableCatalog::name(j);
  partial << "\n";
  std::istringstream missing(partial.str());
  CHECK_THROWS(read_features_csv(missing));
}

TEST_CASE("normalization params round-trip through the sidecar", "[features]") {
  NormalizationParams params;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> value(0.1, 9.0);
  for (auto& v : params.vars) v = MuSigma{value(rng), value(rng)};
  params.target = MuSigma{123.456, 78.9};
  std::ostringstream out;
  write_params_csv(out, params);
  std::istringstream in(out.str());
  const NormalizationParams back = read_params_csv(in);
  for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
    CHECK(back.vars[j].mu == params.vars[j].mu);
    CHECK(back.vars[j].sigma == params.vars[j].sigma);
  }
  CHECK(back.target.mu == params.target.mu);
  CHECK(back.target.sigma == params.target.sigma);
  CHECK(back.population_std == params.population_std);
}
