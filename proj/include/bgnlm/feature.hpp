#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "bgnlm/errors.hpp"
#include "bgnlm/transforms.hpp"

namespace bgnlm {

enum class FeatureKind { Input, Projection, Modification, Multiplication };

class Feature;
using FeaturePtr = std::shared_ptr<const Feature>;

// Immutable expression tree over input covariates. Nodes are canonicalized at
// construction: multiplication operands and projection children are sorted by
// canonical key (projection weights travel with their child). Measures and the
// key are cached; instances are safely shared across threads.
class Feature {
 public:
  // index is 1-based: Input(3) evaluates column 2 of X and prints as "x3".
  static FeaturePtr input(int index);
  static FeaturePtr modification(const Transform& g, FeaturePtr child);
  static FeaturePtr multiplication(FeaturePtr left, FeaturePtr right);
  // alpha has size children.size()+1 with the intercept first; children must
  // have pairwise distinct keys (a projection acts on a subset of features).
  static FeaturePtr projection(const Transform& g, std::vector<FeaturePtr> children,
                               Eigen::VectorXd alpha);

  FeatureKind kind() const { return kind_; }
  int input_index() const { return input_index_; }
  const Transform& transform() const { return *transform_; }
  const std::vector<FeaturePtr>& children() const { return children_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

  int depth() const { return depth_; }
  int local_width() const { return local_width_; }
  int total_width() const { return total_width_; }
  const std::string& key() const { return key_; }

  bool contains_projection() const { return contains_projection_; }

  // Standalone evaluation (uses a scratch cache internally).
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const;

 private:
  friend class ColumnCache;
  Feature() = default;

  FeatureKind kind_ = FeatureKind::Input;
  int input_index_ = 0;
  const Transform* transform_ = nullptr;
  std::vector<FeaturePtr> children_;
  Eigen::VectorXd alpha_;
  int depth_ = 0;
  int local_width_ = 0;
  int total_width_ = 0;
  bool contains_projection_ = false;
  std::string key_;
};

struct FeatureMeasure {
  int depth;
  int local_width;
  int total_width;
};

FeatureMeasure measure(const Feature& f);

// c(F_j) for the model prior: the total width.
double complexity(const Feature& f);

// Memoizes evaluated feature columns for one data matrix. Not thread-safe;
// give each chain its own cache.
class ColumnCache {
 public:
  explicit ColumnCache(const Eigen::MatrixXd& X) : X_(&X) {}

  // Throws NumericError("non-finite value at row ...") when any node in the
  // tree produces NaN/inf.
  const Eigen::VectorXd& column(const FeaturePtr& f);

  const Eigen::MatrixXd& X() const { return *X_; }
  std::size_t size() const { return memo_.size(); }
  void clear() { memo_.clear(); }

 private:
  const Eigen::MatrixXd* X_;
  std::unordered_map<std::string, Eigen::VectorXd> memo_;
};

// Inverse of Feature::key(). Accepts any key the library can print.
FeaturePtr parse_feature_key(const std::string& key);

// Renders a double at the 6-significant-digit precision used inside keys.
std::string format_alpha(double v);

}  // namespace bgnlm
