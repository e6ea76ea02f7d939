#include "bgnlm/model_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bgnlm/numerics.hpp"

namespace bgnlm {

namespace {

void sort_by_key(std::vector<FeaturePtr>& features) {
  std::sort(features.begin(), features.end(),
            [](const FeaturePtr& a, const FeaturePtr& b) {
              return a->key() < b->key();
            });
}

}  // namespace

std::string model_key(const std::vector<FeaturePtr>& features) {
  std::vector<std::string> keys;
  keys.reserve(features.size());
  for (const auto& f : features) keys.push_back(f->key());
  std::sort(keys.begin(), keys.end());
  const auto dup = std::adjacent_find(keys.begin(), keys.end());
  if (dup != keys.end())
    throw ConfigError("duplicate feature in model: " + *dup);
  std::string out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i) out += ';';
    out += keys[i];
  }
  return out;
}

double log_model_prior(const std::vector<FeaturePtr>& features, double a) {
  if (!(a > 0.0 && a < 1.0))
    throw ConfigError("prior penalty a must lie in (0, 1)");
  double total_complexity = 0.0;
  for (const auto& f : features) total_complexity += complexity(*f);
  return total_complexity * std::log(a);
}

double prior_a_by_name(const std::string& name, Eigen::Index n) {
  if (name == "aic") return std::exp(-2.0);
  if (name == "bic") {
    if (n < 2) throw ConfigError("bic prior requires n >= 2");
    return std::exp(-2.0 * std::log(static_cast<double>(n)));
  }
  throw ConfigError("unknown prior name '" + name + "' (expected aic or bic)");
}

bool VisitedStore::record(std::vector<FeaturePtr> features, double log_marginal,
                          double log_prior, Eigen::VectorXd beta) {
  sort_by_key(features);
  for (std::size_t i = 1; i < features.size(); ++i)
    if (features[i]->key() == features[i - 1]->key())
      throw ConfigError("duplicate feature in model: " + features[i]->key());

  std::string key = model_key(features);
  auto it = records_.find(key);
  if (it != records_.end()) {
    ++it->second.visit_count;
    return false;
  }

  ModelRecord rec;
  rec.features = std::move(features);
  rec.log_marginal = log_marginal;
  rec.log_prior = log_prior;
  rec.beta = std::move(beta);
  rec.visit_count = 1;
  records_.emplace(std::move(key), std::move(rec));

  const double mass = log_prior + log_marginal;
  if (std::isfinite(mass)) {
    if (std::isinf(log_mass_) && log_mass_ < 0) {
      log_mass_ = mass;
    } else if (mass <= log_mass_) {
      log_mass_ += std::log1p(std::exp(mass - log_mass_));
    } else {
      log_mass_ = mass + std::log1p(std::exp(log_mass_ - mass));
    }
  }
  return true;
}

const ModelRecord* VisitedStore::revisit(const std::string& key) {
  auto it = records_.find(key);
  if (it == records_.end()) return nullptr;
  ++it->second.visit_count;
  return &it->second;
}

const ModelRecord* VisitedStore::find(const std::string& key) const {
  auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

std::map<std::string, double> VisitedStore::posterior() const {
  if (records_.empty()) throw EmptyStore("posterior of an empty model store");

  // Fresh max-shifted normalization: deterministic and more accurate than
  // the running accumulator.
  std::vector<double> masses;
  masses.reserve(records_.size());
  for (const auto& [key, rec] : records_)
    masses.push_back(rec.log_prior + rec.log_marginal);
  const double lse = log_sum_exp(masses);

  std::map<std::string, double> out;
  std::size_t i = 0;
  for (const auto& [key, rec] : records_)
    out.emplace(key, std::exp(masses[i++] - lse));
  return out;
}

std::map<std::string, double> VisitedStore::inclusion_probabilities() const {
  const auto post = posterior();
  std::map<std::string, double> out;
  for (const auto& [key, rec] : records_) {
    const double p = post.at(key);
    for (const auto& f : rec.features) out[f->key()] += p;
  }
  for (auto& [key, p] : out) p = std::min(p, 1.0);  // clamp fp noise
  return out;
}

double VisitedStore::posterior_statistic(
    const std::function<double(const ModelRecord&)>& stat) const {
  const auto post = posterior();
  double total = 0.0;
  for (const auto& [key, rec] : records_) total += stat(rec) * post.at(key);
  return total;
}

}  // namespace bgnlm
