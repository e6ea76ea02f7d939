#pragma once

#include <Eigen/Dense>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bgnlm/glm.hpp"
#include "bgnlm/model_space.hpp"

namespace bgnlm {

// Pearson correlation of a constant vector is undefined.
struct DegenerateCorrelation : NumericError {
  using NumericError::NumericError;
};

struct PredictionReport {
  Eigen::VectorXd mean;      // posterior mean (Bernoulli: class probability)
  std::vector<int> classes;  // Bernoulli only: mean > threshold
};

// Model-averaged plug-in prediction over the visited store:
//   E[Y* | y] = sum_m p(Y* | m, beta_m) * posterior(m)
// Bernoulli rows are classified 1 when the probability strictly exceeds
// `threshold`.
PredictionReport predict(const VisitedStore& store, const Eigen::MatrixXd& X_test,
                         const FamilySpec& spec, double threshold = 0.5);

struct ClassificationMetrics {
  double accuracy = 0.0;
  std::optional<double> fnr;  // absent when the truth has no positives
  std::optional<double> fpr;  // absent when the truth has no negatives
};

ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred);

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double corr = 0.0;  // Pearson; DegenerateCorrelation on constant input
};

RegressionMetrics regression_metrics(const Eigen::VectorXd& y_true,
                                     const Eigen::VectorXd& y_pred);

struct DetectionMetrics {
  std::vector<double> power;  // per truth class
  double overall_power = 0.0;
  double false_positives = 0.0;  // mean spurious detections per run
  double fdr = 0.0;              // mean per-run FP / (TP + FP); 0 when none
};

// Detection accounting over replicate runs. Each truth class is a set of
// feature keys counting as the same discovery (e.g. equivalent
// parenthesizations); a run detects the class when it detects any member.
// per_truth_power: overall power is the mean of per-class powers;
// otherwise it is the fraction of runs detecting every class.
DetectionMetrics detection_metrics(
    const std::vector<std::set<std::string>>& runs,
    const std::vector<std::vector<std::string>>& truth_classes,
    bool per_truth_power = true);

}  // namespace bgnlm
