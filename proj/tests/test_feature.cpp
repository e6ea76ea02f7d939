#include <Eigen/Dense>
#include <random>
#include <set>

#include "bgnlm/feature.hpp"
#include "bgnlm/transforms.hpp"
#include "doctest.h"

using namespace bgnlm;

namespace {

Eigen::VectorXd alpha2(double a0, double a1, double a2) {
  Eigen::VectorXd a(3);
  a << a0, a1, a2;
  return a;
}

// Uniformly random feature tree of bounded size, for property tests.
FeaturePtr random_tree(std::mt19937_64& rng, int budget) {
  std::uniform_int_distribution<int> kind(0, budget <= 1 ? 0 : 3);
  const TransformLibrary lib = TransformLibrary::preset("g1");
  std::uniform_int_distribution<std::size_t> pick_g(0, lib.size() - 1);
  std::uniform_int_distribution<int> pick_x(1, 4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  switch (kind(rng)) {
    case 1:
      return Feature::modification(lib.at(pick_g(rng)), random_tree(rng, budget - 1));
    case 2:
      return Feature::multiplication(random_tree(rng, budget / 2),
                                     random_tree(rng, budget / 2));
    case 3: {
      // children must be distinct by key; retry collisions, then fall back
      // to fresh inputs so the arity is always reached
      std::vector<FeaturePtr> children;
      std::set<std::string> seen;
      const int k = 2 + static_cast<int>(rng() % 2);
      for (int tries = 0; static_cast<int>(children.size()) < k && tries < 20;
           ++tries) {
        FeaturePtr c = random_tree(rng, budget / k);
        if (seen.insert(c->key()).second) children.push_back(std::move(c));
      }
      for (int j = 1; children.size() < 2; ++j) {
        FeaturePtr c = Feature::input(j);
        if (seen.insert(c->key()).second) children.push_back(std::move(c));
      }
      Eigen::VectorXd alpha(children.size() + 1);
      for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha[i] = gauss(rng);
      return Feature::projection(lib.at(pick_g(rng)), children, alpha);
    }
    default:
      return Feature::input(pick_x(rng));
  }
}

}  // namespace

TEST_SUITE("feature") {

TEST_CASE("input features measure (0, 1, 1)") {
  const FeaturePtr x = Feature::input(1);
  const FeatureMeasure m = measure(*x);
  CHECK(m.depth == 0);
  CHECK(m.local_width == 1);
  CHECK(m.total_width == 1);
  CHECK(complexity(*x) == 1.0);
}

TEST_CASE("x squared measures (1, 2, 4)") {
  const FeaturePtr x = Feature::input(1);
  const FeaturePtr sq = Feature::multiplication(x, x);
  const FeatureMeasure m = measure(*sq);
  CHECK(m.depth == 1);
  CHECK(m.local_width == 2);
  CHECK(m.total_width == 4);
}

TEST_CASE("modification of x squared has total width 5") {
  const Transform& u = transform_by_name("sigmoid");
  const FeaturePtr x = Feature::input(1);
  const FeaturePtr f = Feature::modification(u, Feature::multiplication(x, x));
  CHECK(measure(*f).depth == 2);
  CHECK(complexity(*f) == 5.0);
}

TEST_CASE("nested projection over two branches has depth 3") {
  // sin(g(h(x1)) + exp(x2)): depth = 1 + max(2, 1)
  const Transform& sin_t = transform_by_name("sin");
  const Transform& tanh_t = transform_by_name("tanh");
  const Transform& atan_t = transform_by_name("atan");
  const Transform& exp_t = transform_by_name("exp");
  const FeaturePtr left =
      Feature::modification(tanh_t, Feature::modification(atan_t, Feature::input(1)));
  const FeaturePtr right = Feature::modification(exp_t, Feature::input(2));
  const FeaturePtr f =
      Feature::projection(sin_t, {left, right}, alpha2(0.0, 1.0, 1.0));
  CHECK(measure(*f).depth == 3);
}

TEST_CASE("wide projection v(x + u(x) + v(x) + x^2) measures (2, 4, 13)") {
  // The recursion gives total width 4 + (1 + 2 + 2 + 4) = 13 for this
  // feature and for its u(.) twin alike.
  const Transform& u = transform_by_name("sigmoid");
  const Transform& v = transform_by_name("sin");
  const FeaturePtr x = Feature::input(1);
  const std::vector<FeaturePtr> children = {
      x, Feature::modification(u, x), Feature::modification(v, x),
      Feature::multiplication(x, x)};
  Eigen::VectorXd alpha(5);
  alpha << 0.0, 1.0, 1.0, 1.0, 1.0;
  const FeaturePtr f = Feature::projection(v, children, alpha);
  const FeatureMeasure m = measure(*f);
  CHECK(m.depth == 2);
  CHECK(m.local_width == 4);
  CHECK(m.total_width == 13);
  const FeaturePtr g = Feature::projection(u, children, alpha);
  CHECK(measure(*g).total_width == 13);
}

TEST_CASE("multiplication depth adds the operand depths") {
  const FeaturePtr p = Feature::input(1);
  const FeaturePtr m = Feature::input(2);
  const FeaturePtr p2 = Feature::multiplication(p, p);
  CHECK(measure(*p2).depth == 1);
  const FeaturePtr f = Feature::multiplication(p2, m);
  CHECK(measure(*f).depth == 2);
  CHECK(measure(*f).total_width == 2 + 4 + 1);
}

TEST_CASE("structural recursions hold on random trees") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const FeaturePtr f = random_tree(rng, 6);
    const FeatureMeasure m = measure(*f);
    switch (f->kind()) {
      case FeatureKind::Input:
        CHECK(m.depth == 0);
        CHECK(m.local_width == 1);
        CHECK(m.total_width == 1);
        break;
      case FeatureKind::Modification:
        CHECK(m.depth == 1 + f->children()[0]->depth());
        CHECK(m.local_width == 1);
        CHECK(m.total_width == 1 + f->children()[0]->total_width());
        break;
      case FeatureKind::Multiplication:
        CHECK(m.depth ==
              1 + f->children()[0]->depth() + f->children()[1]->depth());
        CHECK(m.local_width == 2);
        CHECK(m.total_width ==
              2 + f->children()[0]->total_width() + f->children()[1]->total_width());
        break;
      case FeatureKind::Projection: {
        int dmax = 0, wsum = 0;
        for (const auto& c : f->children()) {
          dmax = std::max(dmax, c->depth());
          wsum += c->total_width();
        }
        CHECK(m.depth == 1 + dmax);
        CHECK(m.local_width == static_cast<int>(f->children().size()));
        CHECK(m.total_width == m.local_width + wsum);
        break;
      }
    }
    CHECK(complexity(*f) >= m.depth);
  }
}

TEST_CASE("evaluation matches the recursive definition") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 4, 2, 5, 3, 6;

  CHECK((Feature::input(1)->evaluate(X).array() == X.col(0).array()).all());
  CHECK((Feature::input(2)->evaluate(X).array() == X.col(1).array()).all());

  const FeaturePtr sq = Feature::multiplication(Feature::input(1), Feature::input(1));
  const Eigen::VectorXd v = sq->evaluate(X);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 4.0);
  CHECK(v[2] == 9.0);

  // sigmoid projection with zero intercept and unit weights at x = (0, 0)
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(1, 2);
  const FeaturePtr proj =
      Feature::projection(transform_by_name("sigmoid"),
                          {Feature::input(1), Feature::input(2)},
                          alpha2(0.0, 1.0, 1.0));
  CHECK(proj->evaluate(Z)[0] == doctest::Approx(0.5));
}

TEST_CASE("evaluation is pure") {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd X(8, 4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i / 4, i % 4) = gauss(rng);
  for (int rep = 0; rep < 20; ++rep) {
    const FeaturePtr f = random_tree(rng, 5);
    const Eigen::VectorXd a = f->evaluate(X);
    const Eigen::VectorXd b = f->evaluate(X);
    CHECK((a.array() == b.array()).all());  // bit-identical
  }
}

TEST_CASE("non-finite evaluation is reported with the offending row") {
  Eigen::MatrixXd X(2, 1);
  X << 1.0, 1000.0;
  // exp(exp(1000)) overflows
  const Transform& e = transform_by_name("exp");
  const FeaturePtr f = Feature::modification(e, Feature::modification(e, Feature::input(1)));
  ColumnCache cache(X);
  CHECK_THROWS_AS(cache.column(f), NumericError);
}

TEST_CASE("canonical keys sort operands and drop alpha noise") {
  const FeaturePtr a = Feature::multiplication(Feature::input(2), Feature::input(1));
  const FeaturePtr b = Feature::multiplication(Feature::input(1), Feature::input(2));
  CHECK(a->key() == b->key());
  CHECK(a->key() == "(x1*x2)");

  CHECK(Feature::input(3)->key() == "x3");
  CHECK(Feature::modification(transform_by_name("sin"), Feature::input(1))->key() ==
        "sin(x1)");

  const Transform& t = transform_by_name("tanh");
  const FeaturePtr p1 =
      Feature::projection(t, {Feature::input(1), Feature::input(2)},
                          alpha2(0.5, 1.2, -0.5));
  const FeaturePtr p2 =
      Feature::projection(t, {Feature::input(2), Feature::input(1)},
                          alpha2(0.5 + 1e-9, -0.5, 1.2));
  CHECK(p1->key() == p2->key());
  CHECK(p1->key() == "tanh(0.5+1.2*x1-0.5*x2)");
}

TEST_CASE("projection keys differing within 6 significant digits differ") {
  const Transform& t = transform_by_name("tanh");
  const FeaturePtr p1 = Feature::projection(
      t, {Feature::input(1), Feature::input(2)}, alpha2(0.5, 1.2, -0.5));
  const FeaturePtr p2 = Feature::projection(
      t, {Feature::input(1), Feature::input(2)}, alpha2(0.5, 1.3, -0.5));
  CHECK(p1->key() != p2->key());
}

TEST_CASE("keys round-trip through the parser") {
  std::mt19937_64 rng(23);
  Eigen::MatrixXd X(6, 4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = gauss(rng);
  for (int rep = 0; rep < 50; ++rep) {
    const FeaturePtr f = random_tree(rng, 5);
    const FeaturePtr g = parse_feature_key(f->key());
    CHECK(g->key() == f->key());
    CHECK(g->depth() == f->depth());
    CHECK(g->total_width() == f->total_width());
  }
  // malformed keys come from store files, so they surface as data errors;
  // an unknown transform name is a configuration problem instead
  CHECK_THROWS_WITH_AS(parse_feature_key("madeup(x1)"),
                       doctest::Contains("unknown transform"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_feature_key(""),
                       doctest::Contains("bad feature key"), DataError);
}

}  // TEST_SUITE
