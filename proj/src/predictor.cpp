#include "bgnlm/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace bgnlm {

PredictionReport predict(const VisitedStore& store, const Eigen::MatrixXd& X_test,
                         const FamilySpec& spec, double threshold) {
  if (store.empty()) throw EmptyStore("prediction from an empty model store");
  const Eigen::Index n = X_test.rows();
  if (spec.offset && spec.offset->size() != n)
    throw ConfigError("offset length does not match test rows");

  const auto posterior = store.posterior();
  ColumnCache cache(X_test);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& [key, rec] : store.records()) {
    const double weight = posterior.at(key);

    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, rec.beta[0]);
    for (std::size_t i = 0; i < rec.features.size(); ++i)
      eta += rec.beta[1 + static_cast<Eigen::Index>(i)] * cache.column(rec.features[i]);
    if (spec.offset) eta += *spec.offset;

    switch (spec.family) {
      case Family::Gaussian:
        mean += weight * eta;
        break;
      case Family::Bernoulli:
        mean += weight * eta.unaryExpr([](double e) {
                  if (e >= 0) return 1.0 / (1.0 + std::exp(-e));
                  const double t = std::exp(e);
                  return t / (1.0 + t);
                }).matrix();
        break;
      case Family::Poisson:
        mean += weight * eta.array().exp().matrix();
        break;
    }
  }
  if (!mean.allFinite())
    throw NumericError("non-finite model-averaged prediction");

  PredictionReport report;
  report.mean = std::move(mean);
  if (spec.family == Family::Bernoulli) {
    report.classes.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      report.classes[i] = report.mean[i] > threshold ? 1 : 0;
  }
  return report;
}

ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw ConfigError("prediction and truth lengths differ");
  if (y_true.empty()) throw ConfigError("empty classification input");
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if ((y_true[i] & ~1) || (y_pred[i] & ~1))
      throw ConfigError("classification entries must be 0 or 1");

  int tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 1)
      (y_pred[i] == 1 ? tp : fn)++;
    else
      (y_pred[i] == 0 ? tn : fp)++;
  }

  ClassificationMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(y_true.size());
  if (tp + fn > 0) m.fnr = static_cast<double>(fn) / (tp + fn);
  if (fp + tn > 0) m.fpr = static_cast<double>(fp) / (fp + tn);
  return m;
}

RegressionMetrics regression_metrics(const Eigen::VectorXd& y_true,
                                     const Eigen::VectorXd& y_pred) {
  const Eigen::Index n = y_true.size();
  if (y_pred.size() != n)
    throw ConfigError("prediction and truth lengths differ");
  if (n < 2) throw ConfigError("regression metrics require at least 2 rows");

  const Eigen::VectorXd err = y_pred - y_true;
  RegressionMetrics m;
  m.rmse = std::sqrt(err.squaredNorm() / static_cast<double>(n));
  m.mae = err.array().abs().mean();

  const Eigen::VectorXd ct = y_true.array() - y_true.mean();
  const Eigen::VectorXd cp = y_pred.array() - y_pred.mean();
  const double denom = ct.norm() * cp.norm();
  if (!(denom > 0))
    throw DegenerateCorrelation("correlation of a constant vector is undefined");
  m.corr = ct.dot(cp) / denom;
  return m;
}

DetectionMetrics detection_metrics(
    const std::vector<std::set<std::string>>& runs,
    const std::vector<std::vector<std::string>>& truth_classes,
    bool per_truth_power) {
  if (runs.empty()) throw ConfigError("detection metrics require at least one run");

  std::unordered_set<std::string> any_truth;
  for (const auto& cls : truth_classes)
    for (const auto& key : cls) any_truth.insert(key);

  DetectionMetrics m;
  m.power.assign(truth_classes.size(), 0.0);

  double all_detected_runs = 0.0;
  for (const auto& detected : runs) {
    bool all = true;
    for (std::size_t j = 0; j < truth_classes.size(); ++j) {
      const bool hit = std::any_of(
          truth_classes[j].begin(), truth_classes[j].end(),
          [&](const std::string& key) { return detected.count(key) > 0; });
      if (hit) m.power[j] += 1.0;
      all = all && hit;
    }
    if (all) all_detected_runs += 1.0;

    int tp = 0, fp = 0;
    for (const auto& key : detected) (any_truth.count(key) ? tp : fp)++;
    m.false_positives += fp;
    if (tp + fp > 0) m.fdr += static_cast<double>(fp) / (tp + fp);
  }

  const double n_runs = static_cast<double>(runs.size());
  for (auto& p : m.power) p /= n_runs;
  m.false_positives /= n_runs;
  m.fdr /= n_runs;
  if (truth_classes.empty()) {
    m.overall_power = 0.0;
  } else if (per_truth_power) {
    double sum = 0.0;
    for (double p : m.power) sum += p;
    m.overall_power = sum / static_cast<double>(m.power.size());
  } else {
    m.overall_power = all_detected_runs / n_runs;
  }
  return m;
}

}  // namespace bgnlm
