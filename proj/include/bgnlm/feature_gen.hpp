#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "bgnlm/feature.hpp"
#include "bgnlm/glm.hpp"
#include "bgnlm/transforms.hpp"

namespace bgnlm {

// Recoverable generation failures: the caller redraws the candidate.
struct GenerationError : Error {
  using Error::Error;
};
struct DepthExceeded : GenerationError {
  using GenerationError::GenerationError;
};
struct WidthExceeded : GenerationError {
  using GenerationError::GenerationError;
};
struct AlphaFitFailed : GenerationError {
  using GenerationError::GenerationError;
};

// How projection weights are obtained.
//   1: fit the response on the child columns without the transform
//   2: fit with the transform applied (damped gradient ascent)
//   3: strategy 2 plus joint re-estimation of all nested projection
//      weights (copy-on-write: rebuilt subtrees, never shared mutation)
//   4: every weight drawn from N(0, alpha_sd^2); marginal likelihoods
//      are then Monte Carlo averages over mc_draws prior draws
struct AlphaStrategy {
  int kind = 1;
  double alpha_sd = 1.0;
  int mc_draws = 100;

  void validate() const;
};

// Structural constraints D and L.
struct GenerationLimits {
  int max_depth = 5;
  int max_local_width = 20;

  void validate() const;
};

struct AlphaFit {
  Eigen::VectorXd alpha;             // intercept first
  std::vector<FeaturePtr> children;  // rebuilt under strategies 3 and 4
};

AlphaFit estimate_alpha(const AlphaStrategy& strategy, const Transform& g,
                        const std::vector<FeaturePtr>& children,
                        ColumnCache& cache, const Eigen::VectorXd& y,
                        const FamilySpec& spec, std::mt19937_64& rng);

enum class GenKind { Projection, Modification, Multiplication, Input };

// Optional operand sampling bias: with probability p a multiplication or
// modification operand is drawn from `focus` (members of the pool worth
// combining further) instead of the whole pool. The default is unbiased
// and consumes no extra randomness.
struct OperandBias {
  const std::vector<FeaturePtr>* focus = nullptr;
  double p = 0.0;
};

// Draws one new feature of the given kind. Components come from `pool`;
// kind Input draws from `originals`. Throws DepthExceeded / WidthExceeded
// when the drawn combination violates the limits and AlphaFitFailed when
// the projection weight fit breaks down.
FeaturePtr generate_feature(GenKind kind, const std::vector<FeaturePtr>& pool,
                            const std::vector<FeaturePtr>& originals,
                            const TransformLibrary& lib,
                            const AlphaStrategy& strategy,
                            const GenerationLimits& limits, ColumnCache& cache,
                            const Eigen::VectorXd& y, const FamilySpec& spec,
                            std::mt19937_64& rng, const OperandBias& bias = {});

// True when f duplicates a population key, fails to evaluate finitely, or
// its column lies in the span of the population columns plus an intercept
// (relative residual below 1e-8).
bool is_redundant(const FeaturePtr& f, const std::vector<FeaturePtr>& population,
                  ColumnCache& cache);

// Deep copy with every projection weight vector redrawn from N(0, sd^2).
FeaturePtr resample_projection_alphas(const FeaturePtr& f, double sd,
                                      std::mt19937_64& rng);

}  // namespace bgnlm
