#pragma once

#include <string>
#include <vector>

#include "bgnlm/errors.hpp"

namespace bgnlm {

// A named scalar nonlinearity. apply is total on finite inputs; it may return
// non-finite values (e.g. exp overflow), which evaluation reports as errors.
struct Transform {
  const char* name;
  double (*apply)(double);
};

// Fixed catalog of transforms addressable by name.
const Transform& transform_by_name(const std::string& name);
const std::vector<std::string>& transform_catalog();

// An ordered set of transforms (the set G a run draws from).
class TransformLibrary {
 public:
  TransformLibrary() = default;

  // Presets: "classification" = {gauss, tanh, atan, sin},
  // "g1" = {sigmoid, sin, tanh, atan, cbrt_abs},
  // "g2" = {sigmoid, sin, expnabs, log1pabs, cbrt_abs, p23, p35},
  // "regression" = {sigmoid, exp, log1pabs, cbrt_abs, p25, p35}.
  static TransformLibrary preset(const std::string& name);
  static TransformLibrary from_names(const std::vector<std::string>& names);

  std::size_t size() const { return members_.size(); }
  const Transform& at(std::size_t i) const { return *members_.at(i); }
  bool contains(const std::string& name) const;
  const std::vector<const Transform*>& members() const { return members_; }

 private:
  std::vector<const Transform*> members_;
};

}  // namespace bgnlm
