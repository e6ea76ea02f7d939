#include "bgnlm/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace bgnlm {

namespace {

double tf_gauss(double x) { return std::exp(-x * x); }
double tf_tanh(double x) { return std::tanh(x); }
double tf_atan(double x) { return std::atan(x); }
double tf_sin(double x) { return std::sin(x); }
double tf_sigmoid(double x) {
  // Overflow-safe in both tails.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
double tf_exp(double x) { return std::exp(x); }
double tf_log1pabs(double x) { return std::log1p(std::fabs(x)); }
double tf_cbrt_abs(double x) { return std::cbrt(std::fabs(x)); }
double tf_p25(double x) { return std::pow(std::fabs(x), 2.5); }
double tf_p35(double x) { return std::pow(std::fabs(x), 3.5); }
double tf_p23(double x) { return std::pow(std::fabs(x), 2.3); }
double tf_p72(double x) { return std::pow(std::fabs(x), 3.5); }
double tf_expnabs(double x) { return std::exp(-std::fabs(x)); }
double tf_relu(double x) { return x > 0.0 ? x : 0.0; }
double tf_indicator_ge1(double x) { return x >= 1.0 ? 1.0 : 0.0; }

const Transform kCatalog[] = {
    {"gauss", tf_gauss},
    {"tanh", tf_tanh},
    {"atan", tf_atan},
    {"sin", tf_sin},
    {"sigmoid", tf_sigmoid},
    {"exp", tf_exp},
    {"log1pabs", tf_log1pabs},
    {"cbrt_abs", tf_cbrt_abs},
    {"p25", tf_p25},
    {"p35", tf_p35},
    {"p23", tf_p23},
    {"p72", tf_p72},
    {"expnabs", tf_expnabs},
    {"relu", tf_relu},
    {"indicator_ge1", tf_indicator_ge1},
};

}  // namespace

const Transform& transform_by_name(const std::string& name) {
  for (const Transform& t : kCatalog)
    if (name == t.name) return t;
  throw ConfigError("unknown transform: " + name);
}

const std::vector<std::string>& transform_catalog() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const Transform& t : kCatalog) v.emplace_back(t.name);
    return v;
  }();
  return names;
}

TransformLibrary TransformLibrary::preset(const std::string& name) {
  if (name == "classification")
    return from_names({"gauss", "tanh", "atan", "sin"});
  if (name == "g1")
    return from_names({"sigmoid", "sin", "tanh", "atan", "cbrt_abs"});
  if (name == "g2")
    return from_names({"sigmoid", "sin", "expnabs", "log1pabs", "cbrt_abs", "p23", "p35"});
  if (name == "regression")
    return from_names({"sigmoid", "exp", "log1pabs", "cbrt_abs", "p25", "p35"});
  throw ConfigError("unknown transform preset: " + name);
}

TransformLibrary TransformLibrary::from_names(const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("transform library must be non-empty");
  TransformLibrary lib;
  for (const std::string& n : names) {
    const Transform& t = transform_by_name(n);
    if (lib.contains(n)) throw ConfigError("duplicate transform in library: " + n);
    lib.members_.push_back(&t);
  }
  return lib;
}

bool TransformLibrary::contains(const std::string& name) const {
  return std::any_of(members_.begin(), members_.end(),
                     [&](const Transform* t) { return name == t->name; });
}

}  // namespace bgnlm
