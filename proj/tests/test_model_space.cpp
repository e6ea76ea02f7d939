#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "bgnlm/model_space.hpp"
#include "bgnlm/numerics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bgnlm;

namespace {

std::vector<FeaturePtr> inputs(std::initializer_list<int> idx) {
  std::vector<FeaturePtr> out;
  for (int i : idx) out.push_back(Feature::input(i));
  return out;
}

}  // namespace

TEST_SUITE("model_space") {

TEST_CASE("model keys are sorted and the empty model prints empty") {
  CHECK(model_key({}) == "");
  CHECK(model_key(inputs({3, 1, 2})) == "x1;x2;x3");
  FeaturePtr prod = Feature::multiplication(Feature::input(1), Feature::input(2));
  CHECK(model_key({prod, Feature::input(3)}) == "(x1*x2);x3");
  CHECK(model_key({Feature::input(3), prod}) == "(x1*x2);x3");
}

TEST_CASE("duplicate features in one model are rejected") {
  CHECK_THROWS_AS(model_key(inputs({1, 1})), ConfigError);
}

TEST_CASE("the model prior multiplies penalties over included features") {
  const double a = std::exp(-2.0);
  CHECK(log_model_prior({}, a) == 0.0);
  CHECK(log_model_prior(inputs({1}), a) == doctest::Approx(-2.0));

  // complexities 1 and 4: x2 and x1*x1 (total width 2 + 1 + 1)
  FeaturePtr square =
      Feature::multiplication(Feature::input(1), Feature::input(1));
  CHECK(complexity(*square) == 4.0);
  const double bic_a = prior_a_by_name("bic", 100);
  CHECK(log_model_prior({Feature::input(2), square}, bic_a) ==
        doctest::Approx(-10.0 * std::log(100.0)));

  CHECK_THROWS_WITH_AS(log_model_prior(inputs({1}), 1.0),
                       "prior penalty a must lie in (0, 1)", ConfigError);
  CHECK_THROWS_AS(log_model_prior(inputs({1}), 0.0), ConfigError);
  CHECK_THROWS_AS(log_model_prior(inputs({1}), -0.5), ConfigError);
}

TEST_CASE("named penalties match their formulas") {
  CHECK(prior_a_by_name("aic", 5) == doctest::Approx(std::exp(-2.0)));
  CHECK(prior_a_by_name("bic", 100) ==
        doctest::Approx(std::exp(-2.0 * std::log(100.0))));
  CHECK_THROWS_AS(prior_a_by_name("dic", 100), ConfigError);
}

TEST_CASE("recording is idempotent up to the visit count") {
  VisitedStore store;
  CHECK(store.empty());
  CHECK(std::isinf(store.log_mass()));

  Eigen::VectorXd beta(2);
  beta << 0.5, 1.5;
  CHECK(store.record(inputs({1}), -3.0, -2.0, beta));
  CHECK(store.size() == 1);
  const double mass_once = store.log_mass();
  CHECK(mass_once == doctest::Approx(-5.0));

  Eigen::VectorXd other(2);
  other << 9.0, 9.0;
  CHECK(!store.record(inputs({1}), -999.0, -999.0, other));
  CHECK(store.size() == 1);
  CHECK(store.log_mass() == doctest::Approx(mass_once));
  const ModelRecord* rec = store.find("x1");
  REQUIRE(rec != nullptr);
  CHECK(rec->log_marginal == -3.0);
  CHECK(rec->beta[1] == 1.5);
  CHECK(rec->visit_count == 2);

  CHECK(store.revisit("x1") != nullptr);
  CHECK(store.find("x1")->visit_count == 3);
  CHECK(store.revisit("absent") == nullptr);
  CHECK(store.find("absent") == nullptr);
}

TEST_CASE("the chain mass accumulates by log-sum-exp") {
  VisitedStore store;
  store.record(inputs({1}), -1.0, 0.0, Eigen::VectorXd::Zero(2));
  store.record(inputs({2}), -2.0, -0.5, Eigen::VectorXd::Zero(2));
  store.record({}, -4.0, 0.0, Eigen::VectorXd::Zero(1));
  CHECK(store.log_mass() ==
        doctest::Approx(log_sum_exp({-1.0, -2.5, -4.0})));
}

TEST_CASE("the posterior renormalizes over visited models") {
  VisitedStore store;
  CHECK_THROWS_AS(store.posterior(), EmptyStore);
  CHECK_THROWS_AS(store.inclusion_probabilities(), EmptyStore);
  CHECK_THROWS_AS(store.posterior_statistic([](const ModelRecord&) { return 1.0; }),
                  EmptyStore);

  store.record(inputs({1}), -700.0, 0.0, Eigen::VectorXd::Zero(2));
  auto single = store.posterior();
  CHECK(single.size() == 1);
  CHECK(single.at("x1") == doctest::Approx(1.0));

  store.record(inputs({2}), -700.0, 0.0, Eigen::VectorXd::Zero(2));
  auto pair = store.posterior();
  CHECK(pair.at("x1") == doctest::Approx(0.5));
  CHECK(pair.at("x2") == doctest::Approx(0.5));

  store.record(inputs({1, 2}), -700.0 + std::log(2.0), 0.0,
               Eigen::VectorXd::Zero(3));
  auto three = store.posterior();
  CHECK(three.at("x1") == doctest::Approx(0.25));
  CHECK(three.at("x1;x2") == doctest::Approx(0.5));
  double total = 0.0;
  for (const auto& [key, p] : three) total += p;
  CHECK(std::fabs(total - 1.0) <= 1e-12);
}

TEST_CASE("posteriors are invariant to a common shift of the masses") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  VisitedStore a, b;
  for (int i = 1; i <= 6; ++i) {
    const double lm = unif(rng);
    a.record(inputs({i}), lm, -1.0, Eigen::VectorXd::Zero(2));
    b.record(inputs({i}), lm - 1234.5, -1.0, Eigen::VectorXd::Zero(2));
  }
  const auto pa = a.posterior();
  const auto pb = b.posterior();
  for (const auto& [key, p] : pa) CHECK(p == doctest::Approx(pb.at(key)));
}

TEST_CASE("inclusion probabilities sum model posteriors per feature") {
  VisitedStore store;
  store.record(inputs({1}), 0.0, 0.0, Eigen::VectorXd::Zero(2));
  store.record(inputs({1, 2}), 0.0, 0.0, Eigen::VectorXd::Zero(3));
  store.record(inputs({1, 3}), std::log(2.0), 0.0, Eigen::VectorXd::Zero(3));

  const auto incl = store.inclusion_probabilities();
  CHECK(incl.at("x1") == doctest::Approx(1.0));  // present everywhere
  CHECK(incl.at("x2") == doctest::Approx(0.25));
  CHECK(incl.at("x3") == doctest::Approx(0.5));
  CHECK(incl.count("x4") == 0);

  // an indicator statistic reproduces the inclusion probability
  const double via_stat = store.posterior_statistic([](const ModelRecord& m) {
    for (const auto& f : m.features)
      if (f->key() == "x3") return 1.0;
    return 0.0;
  });
  CHECK(via_stat == doctest::Approx(incl.at("x3")));
}

TEST_CASE("posterior statistics are expectations under the posterior") {
  VisitedStore store;
  store.record({}, 0.0, 0.0, Eigen::VectorXd::Zero(1));
  store.record(inputs({1, 2}), 0.0, 0.0, Eigen::VectorXd::Zero(3));
  CHECK(store.posterior_statistic([](const ModelRecord&) { return 1.0; }) ==
        doctest::Approx(1.0));
  CHECK(store.posterior_statistic([](const ModelRecord& m) {
          return static_cast<double>(m.features.size());
        }) == doctest::Approx(1.0));  // (0 + 2) / 2
}

}  // TEST_SUITE
