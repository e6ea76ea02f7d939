#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bgnlm/feature.hpp"
#include "bgnlm/glm.hpp"

namespace bgnlm {

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> column_names;  // aligned with X columns
  std::string response_name;
  int dropped_rows = 0;  // rows removed for missing values
  Family family_hint = Family::Gaussian;
};

// RFC-4180 CSV with a header row. Categorical columns expand to k-1 dummy
// columns (reference level = first in sorted order, dummies named
// column=level). Rows with missing cells (empty, NA, N/A, ?) are dropped
// and counted. Throws DataError on parse failures, unknown columns, and
// when nothing survives filtering.
Dataset load_csv(const std::string& path, const std::string& response_column,
                 const std::vector<std::string>& categorical_columns = {});

struct SyntheticSpec {
  std::string generator;  // kepler | mass | logic
  int n = 1000;
  double noise_sd = 1.0;
  // When set, noise_sd is a fraction of the sd of the noiseless response
  // (e.g. 0.01 = 1% noise) instead of an absolute sd.
  bool relative_noise = false;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Dataset data;
  // Equivalence classes of canonical feature keys counting as a correct
  // detection of each ground-truth term.
  std::vector<std::vector<std::string>> truth_classes;
};

// Seed-deterministic generators:
//   kepler: semi-major axis law y = (P^2 M_h)^{1/3} + noise over
//           P, M_h, R_h, T_h and 6 nuisance covariates; the truth class
//           also accepts the R_h and T_h forms (near-perfect correlates)
//   mass:   y = R^3 rho + noise with 4 nuisance covariates
//   logic:  50 iid Bernoulli(0.5) covariates with the fixed 8-term mean
SyntheticData gen_synthetic(const SyntheticSpec& spec);

// Canonical keys of every binary multiplication tree over the given
// leaves (all parenthesizations), duplicates removed.
std::vector<std::string> product_parenthesization_keys(
    const std::vector<FeaturePtr>& leaves);

}  // namespace bgnlm
