#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "bgnlm/gmjmcmc.hpp"

namespace bgnlm {

enum class AggregationMode { MassWeighted, Uniform };

struct AggregateResult {
  std::map<std::string, double> feature_posteriors;  // merged
  std::map<std::string, double> model_posteriors;    // merged
  // Per-feature spread across successful chains; chains lacking a feature
  // count as 0.
  std::map<std::string, std::pair<double, double>> feature_range;
  std::vector<double> weights;  // u_b aligned with the input; failed chains 0
};

// B independent chains seeded base_seed + b. Chain failures are reported
// in the summaries, never thrown. Progress lines (when log is non-null)
// are emitted after all chains join, grouped by chain.
std::vector<RunSummary> run_parallel(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y,
                                     const RunSettings& settings, int chains,
                                     std::uint64_t base_seed,
                                     std::ostream* log = nullptr);

// Merges chain estimates: mass-weighted uses u_b = exp(s_b - logsumexp s)
// over the successful chains, uniform uses 1/B. Throws when no chain
// succeeded. Consumes only the posterior maps and masses.
AggregateResult aggregate(const std::vector<RunSummary>& summaries,
                          AggregationMode mode = AggregationMode::MassWeighted);

}  // namespace bgnlm
