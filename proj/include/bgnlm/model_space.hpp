#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bgnlm/feature.hpp"

namespace bgnlm {

// Posterior queries on a store with no recorded models.
struct EmptyStore : Error {
  using Error::Error;
};

// Sorted feature keys joined with ';'. The empty model (intercept only)
// has the empty key.
std::string model_key(const std::vector<FeaturePtr>& features);

// Unnormalized log prior: sum of complexity(F_j) * log(a) over included
// features. Requires a in (0, 1).
double log_model_prior(const std::vector<FeaturePtr>& features, double a);

// Symbolic prior penalties: "aic" = e^{-2}, "bic" = e^{-2 log n}.
double prior_a_by_name(const std::string& name, Eigen::Index n);

struct ModelRecord {
  std::vector<FeaturePtr> features;  // sorted by canonical key
  double log_marginal = 0.0;
  double log_prior = 0.0;
  Eigen::VectorXd beta;              // intercept first, then features in order
  int visit_count = 0;
};

// Every model evaluated during a run, keyed by model_key. Each model is
// fitted once; revisits only bump visit_count. Also tracks the running
// log-sum-exp of log_prior + log_marginal (the chain mass s_b).
class VisitedStore {
 public:
  // Returns true on first insertion. Re-recording an existing key leaves
  // the record unchanged apart from visit_count.
  bool record(std::vector<FeaturePtr> features, double log_marginal,
              double log_prior, Eigen::VectorXd beta);

  // Lookup that bumps visit_count; nullptr when absent.
  const ModelRecord* revisit(const std::string& key);
  const ModelRecord* find(const std::string& key) const;

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  double log_mass() const { return log_mass_; }
  const std::map<std::string, ModelRecord>& records() const { return records_; }

  // Renormalized posterior over the visited models; sums to 1 within 1e-12.
  std::map<std::string, double> posterior() const;

  // Per-feature inclusion probability: sum of posteriors of the models
  // containing the feature.
  std::map<std::string, double> inclusion_probabilities() const;

  // Posterior expectation of an arbitrary model statistic.
  double posterior_statistic(
      const std::function<double(const ModelRecord&)>& stat) const;

 private:
  std::map<std::string, ModelRecord> records_;
  double log_mass_ = -std::numeric_limits<double>::infinity();
};

}  // namespace bgnlm
