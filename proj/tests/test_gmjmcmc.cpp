#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <set>

#include "bgnlm/experiments.hpp"
#include "bgnlm/gmjmcmc.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bgnlm;

namespace {

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index n,
                                Eigen::Index m) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd X(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) X(i, j) = gauss(rng);
  return X;
}

}  // namespace

TEST_SUITE("gmjmcmc") {

TEST_CASE("schedule validation names the broken field") {
  ScheduleConfig cfg;
  CHECK_NOTHROW(cfg.validate(20, 20));

  ScheduleConfig bad = cfg;
  bad.p_projection = 0.5;  // sums to 1.4
  CHECK_THROWS_WITH_AS(bad.validate(20, 20), "kind probabilities must sum to 1",
                       ConfigError);

  bad = cfg;
  bad.p_input = 0.0;
  bad.p_multiplication = 0.6;
  bad.protected_count = 0;
  CHECK_THROWS_WITH_AS(
      bad.validate(20, 20),
      "input probability 0 with an empty protected set breaks irreducibility",
      ConfigError);

  bad = cfg;
  bad.population_size = 4;
  CHECK_THROWS_WITH_AS(bad.validate(20, 5),
                       doctest::Contains("population size must be at least"),
                       ConfigError);
  CHECK_NOTHROW(bad.validate(4, 20));  // min(Q, L) = 4 is satisfied

  bad = cfg;
  bad.generations = 0;
  CHECK_THROWS_AS(bad.validate(20, 20), ConfigError);
  bad = cfg;
  bad.keep_threshold = 1.2;
  CHECK_THROWS_AS(bad.validate(20, 20), ConfigError);
  bad = cfg;
  bad.p_modification = -0.1;
  bad.p_multiplication = 0.8;
  CHECK_THROWS_AS(bad.validate(20, 20), ConfigError);
}

TEST_CASE("run settings validate nested blocks") {
  RunSettings s;
  CHECK_NOTHROW(s.validate());
  s.prior_a = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.prior_a = 0.1;
  s.model_size_cap = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("initial populations rank covariates by marginal evidence") {
  std::mt19937_64 rng(31);
  Eigen::MatrixXd X = gaussian_matrix(rng, 80, 5);
  std::normal_distribution<double> noise(0.0, 0.3);
  Eigen::VectorXd y(80);
  for (Eigen::Index i = 0; i < 80; ++i) y[i] = 2.0 * X(i, 2) + noise(rng);

  ScheduleConfig cfg;
  cfg.population_size = 5;
  FamilySpec spec;
  std::mt19937_64 r1(7);
  const Population pop = init_population(X, y, spec, cfg, r1);

  REQUIRE(pop.features.size() == 5);
  CHECK(pop.features[0]->key() == "x3");  // the generating covariate
  std::set<std::string> keys;
  for (const auto& f : pop.features) keys.insert(f->key());
  CHECK(keys == std::set<std::string>({"x1", "x2", "x3", "x4", "x5"}));

  REQUIRE(pop.protected_features.size() == 3);  // default protected_count
  CHECK(pop.protected_features[0]->key() == "x3");

  // deterministic given the same generator state
  std::mt19937_64 r2(7);
  const Population again = init_population(X, y, spec, cfg, r2);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(pop.features[i]->key() == again.features[i]->key());
}

TEST_CASE("evolution keeps everything when inclusions clear the threshold") {
  std::mt19937_64 rng(32);
  Eigen::MatrixXd X = gaussian_matrix(rng, 40, 6);
  Eigen::VectorXd y = X.col(0);
  ColumnCache cache(X);

  Population pop;
  for (int j = 1; j <= 6; ++j) pop.features.push_back(Feature::input(j));

  RunSettings settings;
  settings.schedule.population_size = 6;
  std::vector<double> incl(6, 1.0);
  const Population next =
      evolve_population(pop, incl, pop.features, settings, cache, y, rng);
  REQUIRE(next.features.size() == 6);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(next.features[i]->key() == pop.features[i]->key());

  std::vector<double> wrong(5, 1.0);
  CHECK_THROWS_AS(
      evolve_population(pop, wrong, pop.features, settings, cache, y, rng),
      ConfigError);
}

TEST_CASE("pure input replacement draws unused covariates") {
  std::mt19937_64 rng(33);
  Eigen::MatrixXd X = gaussian_matrix(rng, 40, 12);
  Eigen::VectorXd y = X.col(0);
  ColumnCache cache(X);

  Population pop;
  for (int j = 1; j <= 6; ++j) pop.features.push_back(Feature::input(j));
  std::vector<FeaturePtr> originals;
  for (int j = 1; j <= 12; ++j) originals.push_back(Feature::input(j));

  RunSettings settings;
  settings.schedule.population_size = 6;
  settings.schedule.p_projection = 0.0;
  settings.schedule.p_modification = 0.0;
  settings.schedule.p_multiplication = 0.0;
  settings.schedule.p_input = 1.0;
  settings.schedule.keep_threshold = 0.9;
  settings.schedule.protected_count = 0;

  std::vector<double> incl = {1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  const Population next =
      evolve_population(pop, incl, originals, settings, cache, y, rng);
  REQUIRE(next.features.size() == 6);
  for (const auto& f : next.features) CHECK(f->kind() == FeatureKind::Input);
  // x1, x2 survive: above threshold and also the ceil(6/4) = 2 best
  CHECK(next.features[0]->key() == "x1");
  CHECK(next.features[1]->key() == "x2");
  std::set<std::string> keys;
  for (const auto& f : next.features) keys.insert(f->key());
  CHECK(keys.size() == 6);  // replacements are distinct from survivors
}

TEST_CASE("replacement kinds follow the configured probabilities") {
  std::mt19937_64 rng(34);
  const int m = 100, s = 8;
  Eigen::MatrixXd X = gaussian_matrix(rng, 50, m);
  std::normal_distribution<double> noise(0.0, 0.5);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) y[i] = X(i, 0) + noise(rng);
  ColumnCache cache(X);

  Population pop;
  for (int j = 1; j <= s; ++j) pop.features.push_back(Feature::input(j));
  std::vector<FeaturePtr> originals;
  for (int j = s + 1; j <= m; ++j) originals.push_back(Feature::input(j));

  RunSettings settings;
  settings.schedule.population_size = s;
  settings.schedule.protected_count = 0;
  const std::vector<double> incl(s, 0.0);  // keep only the ceil(s/4) floor

  std::map<FeatureKind, long> counts;
  long total = 0;
  const int calls = 1667;
  for (int rep = 0; rep < calls; ++rep) {
    const Population next =
        evolve_population(pop, incl, originals, settings, cache, y, rng);
    REQUIRE(next.features.size() == s);
    for (std::size_t i = 2; i < next.features.size(); ++i) {  // 2 = ceil(8/4)
      ++counts[next.features[i]->kind()];
      ++total;
    }
  }

  const std::map<FeatureKind, double> expect = {
      {FeatureKind::Projection, 0.1},
      {FeatureKind::Modification, 0.3},
      {FeatureKind::Multiplication, 0.4},
      {FeatureKind::Input, 0.2}};
  for (const auto& [kind, p] : expect) {
    const double freq = static_cast<double>(counts[kind]) / total;
    const double sigma = std::sqrt(p * (1.0 - p) / total);
    CHECK(std::fabs(freq - p) < 3.0 * sigma);
  }
}

TEST_CASE("chains are reproducible from the seed") {
  std::mt19937_64 rng(35);
  Eigen::MatrixXd X = gaussian_matrix(rng, 60, 4);
  std::normal_distribution<double> noise(0.0, 0.5);
  Eigen::VectorXd y(60);
  for (Eigen::Index i = 0; i < 60; ++i)
    y[i] = 1.0 + X(i, 1) - 0.7 * X(i, 3) + noise(rng);

  RunSettings settings;
  settings.limits.max_depth = 1;
  settings.model_size_cap = 4;
  settings.schedule.population_size = 6;
  settings.schedule.generations = 2;
  settings.schedule.init_steps = 60;
  settings.schedule.explore_steps = 40;
  settings.schedule.final_unique = 60;
  settings.schedule.max_final_steps = 600;

  const RunSummary a = run_chain(X, y, settings, 12345);
  const RunSummary b = run_chain(X, y, settings, 12345);
  CHECK(!a.failed);
  CHECK(a.seed == 12345);
  CHECK(a.model_count == b.model_count);
  CHECK(a.log_mass == b.log_mass);
  REQUIRE(a.feature_posteriors.size() == b.feature_posteriors.size());
  for (const auto& [key, p] : a.feature_posteriors) {
    REQUIRE(b.feature_posteriors.count(key) == 1);
    CHECK(p == b.feature_posteriors.at(key));
  }
  const RunSummary c = run_chain(X, y, settings, 54321);
  CHECK(!c.failed);
  CHECK(c.log_mass != a.log_mass);  // a different trajectory

  double sum = 0.0;
  for (const auto& [key, p] : a.model_posteriors) sum += p;
  CHECK(std::fabs(sum - 1.0) <= 1e-12);
}

TEST_CASE("an exhaustive run reproduces the enumeration posterior") {
  std::mt19937_64 rng(36);
  Eigen::MatrixXd X = gaussian_matrix(rng, 50, 3);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) y[i] = 1.5 * X(i, 0) + noise(rng);

  RunSettings settings;
  settings.limits.max_depth = 0;  // the population stays x1..x3
  settings.model_size_cap = 3;
  settings.schedule.population_size = 3;
  settings.schedule.generations = 1;
  settings.schedule.init_steps = 0;
  settings.schedule.final_unique = 8;
  settings.schedule.max_final_steps = 4000;

  const RunSummary sum = run_chain(X, y, settings, 99);
  REQUIRE(!sum.failed);
  CHECK(sum.model_count == 8);

  std::vector<FeaturePtr> feats = {Feature::input(1), Feature::input(2),
                                   Feature::input(3)};
  FamilySpec spec;
  const auto exact = exact_posterior(feats, X, y, spec, settings.prior_a, 3);
  REQUIRE(exact.size() == 8);
  for (const auto& [key, p] : exact) {
    REQUIRE(sum.model_posteriors.count(key) == 1);
    CHECK(sum.model_posteriors.at(key) == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("failures inside a chain are reported, not thrown") {
  Eigen::MatrixXd X(5, 0);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
  RunSettings settings;
  const RunSummary sum = run_chain(X, y, settings, 1);
  CHECK(sum.failed);
  CHECK(!sum.error.empty());
  CHECK(sum.model_count == 0);

  Eigen::MatrixXd X2(5, 2);
  X2.setRandom();
  CHECK_THROWS_AS(run_chain(X2, Eigen::VectorXd::Zero(4), settings, 1),
                  ConfigError);
}

}  // TEST_SUITE
