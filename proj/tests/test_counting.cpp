#include <map>
#include <set>

#include "bgnlm/feature_count.hpp"
#include "doctest.h"

using namespace bgnlm;

TEST_SUITE("counting") {

TEST_CASE("full counts for one covariate and two transforms") {
  CHECK(count_features(1, 2, 0, CountMode::Full) == BigInt(1));
  CHECK(count_features(1, 2, 1, CountMode::Full) == BigInt(3));
  CHECK(count_features(1, 2, 2, CountMode::Full) == BigInt(31));
  CHECK(count_features(1, 2, 3, CountMode::Full) == BigInt("68719476740"));
}

TEST_CASE("lower-bound counts for one covariate and two transforms") {
  CHECK(count_features(1, 2, 0, CountMode::LowerBound) == BigInt(1));
  CHECK(count_features(1, 2, 1, CountMode::LowerBound) == BigInt(2));
  CHECK(count_features(1, 2, 2, CountMode::LowerBound) == BigInt(12));
  CHECK(count_features(1, 2, 3, CountMode::LowerBound) == BigInt(8176));
}

TEST_CASE("counts are monotone in every argument") {
  CHECK(count_features(2, 2, 2, CountMode::Full) >
        count_features(1, 2, 2, CountMode::Full));
  CHECK(count_features(1, 3, 2, CountMode::Full) >
        count_features(1, 2, 2, CountMode::Full));
  CHECK(count_features(1, 2, 3, CountMode::Full) >
        count_features(1, 2, 2, CountMode::Full));
  // the lower bound never exceeds the full count
  for (int d = 0; d <= 3; ++d)
    CHECK(count_features(1, 2, d, CountMode::LowerBound) <=
          count_features(1, 2, d, CountMode::Full));
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(count_features(0, 2, 1, CountMode::Full), ConfigError);
  CHECK_THROWS_AS(count_features(1, 0, 1, CountMode::Full), ConfigError);
  CHECK_THROWS_AS(count_features(1, 2, -1, CountMode::Full), ConfigError);
}

TEST_CASE("enumeration reproduces the 35 features at depth 2") {
  const TransformLibrary lib = TransformLibrary::from_names({"sigmoid", "sin"});
  const auto features = enumerate_features(1, lib, 2);
  CHECK(features.size() == 35);

  std::map<int, int> by_depth;
  std::set<std::string> keys;
  for (const auto& f : features) {
    ++by_depth[f->depth()];
    keys.insert(f->key());
  }
  CHECK(keys.size() == features.size());  // duplicate-free
  CHECK(by_depth[0] == 1);
  CHECK(by_depth[1] == 3);
  CHECK(by_depth[2] == 31);

  // spot checks of canonical keys
  CHECK(keys.count("x1"));
  CHECK(keys.count("(x1*x1)"));
  CHECK(keys.count("sin(x1)"));
  CHECK(keys.count("sigmoid((x1*x1))"));
  CHECK(keys.count("((x1*x1)*x1)"));  // x^3, depth 2
  // x^4 needs depth 1 + 1 + 1 = 3 whichever way it is bracketed
  CHECK(!keys.count("((x1*x1)*(x1*x1))"));
  CHECK(!keys.count("(((x1*x1)*x1)*x1)"));

  // the two widest projections both carry total width 13
  int width13 = 0;
  for (const auto& f : features)
    if (f->local_width() == 4) {
      CHECK(f->total_width() == 13);
      ++width13;
    }
  CHECK(width13 == 2);
}

TEST_CASE("enumeration counts match the recursion per depth wherever both run") {
  // count_features(d) counts the features at exactly depth d
  for (int m = 1; m <= 2; ++m)
    for (int gsize = 1; gsize <= 2; ++gsize) {
      const TransformLibrary lib =
          gsize == 1 ? TransformLibrary::from_names({"sigmoid"})
                     : TransformLibrary::from_names({"sigmoid", "sin"});
      const auto features = enumerate_features(m, lib, 2);
      std::map<int, long> by_depth;
      for (const auto& f : features) ++by_depth[f->depth()];
      for (int d = 0; d <= 2; ++d)
        CHECK(BigInt(by_depth[d]) == count_features(m, gsize, d, CountMode::Full));
    }
}

TEST_CASE("single transform at depth 1 yields x, g(x), x squared") {
  const TransformLibrary lib = TransformLibrary::from_names({"sigmoid"});
  const auto features = enumerate_features(1, lib, 1);
  std::set<std::string> keys;
  for (const auto& f : features) keys.insert(f->key());
  CHECK(keys == std::set<std::string>{"x1", "sigmoid(x1)", "(x1*x1)"});
}

TEST_CASE("enumeration is scale-guarded") {
  const TransformLibrary lib = TransformLibrary::from_names({"sigmoid"});
  CHECK_THROWS_AS(enumerate_features(3, lib, 1), ConfigError);
  CHECK_THROWS_AS(enumerate_features(1, lib, 3), ConfigError);
}

TEST_CASE("depth-1 count matches a hand enumeration for two covariates") {
  // From {x1, x2} with one transform u: modifications u(x1), u(x2);
  // multiplications x1^2, x1*x2, x2^2; projection u(a0+a1*x1+a2*x2).
  CHECK(count_features(2, 1, 1, CountMode::Full) == BigInt(6));
  // Without multiplications the lower-bound layer keeps u(.) and the
  // projection: 3 new features.
  CHECK(count_features(2, 1, 1, CountMode::LowerBound) == BigInt(3));
}

TEST_CASE("guard refuses exponents beyond the precision budget") {
  CHECK_THROWS_AS(count_features(100, 14, 9, CountMode::Full), NumericError);
}

}  // TEST_SUITE
