#include <cmath>

#include "bgnlm/transforms.hpp"
#include "doctest.h"

using namespace bgnlm;

TEST_SUITE("transforms") {

TEST_CASE("gauss is exactly exp(-x^2)") {
  const Transform& g = transform_by_name("gauss");
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.0})
    CHECK(g.apply(x) == std::exp(-x * x));
}

TEST_CASE("catalog covers the documented names with the documented shapes") {
  CHECK(transform_by_name("sigmoid").apply(0.0) == doctest::Approx(0.5));
  CHECK(transform_by_name("tanh").apply(1.0) == doctest::Approx(std::tanh(1.0)));
  CHECK(transform_by_name("atan").apply(1.0) == doctest::Approx(std::atan(1.0)));
  CHECK(transform_by_name("sin").apply(2.0) == doctest::Approx(std::sin(2.0)));
  CHECK(transform_by_name("exp").apply(1.5) == doctest::Approx(std::exp(1.5)));
  CHECK(transform_by_name("log1pabs").apply(-3.0) ==
        doctest::Approx(std::log(4.0)));
  CHECK(transform_by_name("cbrt_abs").apply(-8.0) == doctest::Approx(2.0));
  CHECK(transform_by_name("p25").apply(-2.0) ==
        doctest::Approx(std::pow(2.0, 2.5)));
  CHECK(transform_by_name("p35").apply(-2.0) ==
        doctest::Approx(std::pow(2.0, 3.5)));
  CHECK(transform_by_name("p23").apply(3.0) ==
        doctest::Approx(std::pow(3.0, 2.3)));
  // p72 is documented as |x|^{7/2}, same shape as p35
  CHECK(transform_by_name("p72").apply(1.7) ==
        doctest::Approx(transform_by_name("p35").apply(1.7)));
  CHECK(transform_by_name("expnabs").apply(-2.0) ==
        doctest::Approx(std::exp(-2.0)));
  CHECK(transform_by_name("relu").apply(-1.0) == 0.0);
  CHECK(transform_by_name("relu").apply(2.5) == 2.5);
  CHECK(transform_by_name("indicator_ge1").apply(0.999) == 0.0);
  CHECK(transform_by_name("indicator_ge1").apply(1.0) == 1.0);
}

TEST_CASE("unknown transform name raises a configuration error") {
  CHECK_THROWS_AS(transform_by_name("cosine"), ConfigError);
  CHECK_THROWS_AS(TransformLibrary::preset("g3"), ConfigError);
}

TEST_CASE("presets hold the documented member sets in order") {
  auto names = [](const TransformLibrary& lib) {
    std::vector<std::string> out;
    for (const Transform* t : lib.members()) out.push_back(t->name);
    return out;
  };
  CHECK(names(TransformLibrary::preset("classification")) ==
        std::vector<std::string>{"gauss", "tanh", "atan", "sin"});
  CHECK(names(TransformLibrary::preset("g1")) ==
        std::vector<std::string>{"sigmoid", "sin", "tanh", "atan", "cbrt_abs"});
  CHECK(names(TransformLibrary::preset("g2")) ==
        std::vector<std::string>{"sigmoid", "sin", "expnabs", "log1pabs",
                                 "cbrt_abs", "p23", "p35"});
  CHECK(names(TransformLibrary::preset("regression")) ==
        std::vector<std::string>{"sigmoid", "exp", "log1pabs", "cbrt_abs",
                                 "p25", "p35"});
}

TEST_CASE("from_names rejects duplicates and empty lists") {
  CHECK_THROWS_AS(TransformLibrary::from_names({}), ConfigError);
  CHECK_THROWS_AS(TransformLibrary::from_names({"sin", "sin"}), ConfigError);
  const TransformLibrary lib = TransformLibrary::from_names({"sin", "exp"});
  CHECK(lib.size() == 2);
  CHECK(lib.contains("sin"));
  CHECK(!lib.contains("tanh"));
}

TEST_CASE("transforms are total on finite inputs") {
  const TransformLibrary lib = TransformLibrary::preset("g2");
  for (const Transform* t : lib.members())
    for (double x : {-100.0, -1.0, 0.0, 1e-12, 3.0, 50.0})
      CHECK(std::isfinite(t->apply(x)));
}

}  // TEST_SUITE
