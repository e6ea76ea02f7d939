#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "bgnlm/data_io.hpp"
#include "bgnlm/parallel.hpp"
#include "bgnlm/predictor.hpp"

namespace bgnlm {

// Brute-force posterior over every subset of `features` (up to size_cap),
// fitted on the full data. Intended for small enumerable spaces.
std::map<std::string, double> exact_posterior(
    const std::vector<FeaturePtr>& features, const Eigen::MatrixXd& X,
    const Eigen::VectorXd& y, const FamilySpec& spec, double prior_a,
    int size_cap);

// Total variation distance between two distributions keyed by model;
// missing keys count as probability 0.
double total_variation(const std::map<std::string, double>& p,
                       const std::map<std::string, double>& q);

// Tuned search settings for the synthetic recovery experiments.
RunSettings default_experiment_settings(const std::string& generator,
                                        Eigen::Index n);

// Collapses a pure product of input covariates to a canonical key: distinct
// leaves sorted by index, left-nested. Valid for binary covariates, where
// x * x = x makes any such product a function of its leaf set alone. Keys
// containing other node kinds pass through unchanged.
std::string canonical_product_key(const std::string& key);

struct DetectionOutcome {
  DetectionMetrics metrics;
  std::vector<std::set<std::string>> detected;  // per replicate
  std::vector<std::vector<std::string>> truth_classes;
};

// Runs `replicates` seeded synthetic datasets through the parallel search
// and thresholds the merged feature posteriors into detected sets.
// Dataset r uses seed base_seed + r; its chains use seeds
// base_seed + 7919 * (r + 1) + b, so chain 0 is shared between runs with
// different chain counts.
DetectionOutcome run_detection_experiment(const std::string& generator,
                                          int replicates, int chains,
                                          double threshold,
                                          std::uint64_t base_seed,
                                          const RunSettings* override_settings =
                                              nullptr,
                                          std::ostream* log = nullptr);

struct EnumerationOutcome {
  std::vector<double> tv;         // per seeded replicate
  int models_in_space = 0;
};

// Gaussian m-covariate toy problem with depth 0: compares the renormalized
// store posterior after `budget_steps` kernel steps against the exact
// enumeration posterior, once per seed.
EnumerationOutcome run_enumeration_experiment(int replicates, int budget_steps,
                                              std::uint64_t base_seed);

}  // namespace bgnlm
