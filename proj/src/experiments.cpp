#include "bgnlm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "bgnlm/numerics.hpp"

namespace bgnlm {

std::map<std::string, double> exact_posterior(
    const std::vector<FeaturePtr>& features, const Eigen::MatrixXd& X,
    const Eigen::VectorXd& y, const FamilySpec& spec, double prior_a,
    int size_cap) {
  const int k = static_cast<int>(features.size());
  if (k > 16)
    throw ConfigError("exact enumeration supports at most 16 features");

  ColumnCache cache(X);
  const Eigen::Index n = y.size();
  std::vector<std::string> keys;
  std::vector<double> masses;

  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    std::vector<FeaturePtr> feats;
    for (int i = 0; i < k; ++i)
      if (mask & (1u << i)) feats.push_back(features[i]);
    if (static_cast<int>(feats.size()) > size_cap) continue;

    try {
      Eigen::MatrixXd design(n, static_cast<Eigen::Index>(feats.size()) + 1);
      design.col(0).setOnes();
      for (std::size_t i = 0; i < feats.size(); ++i)
        design.col(1 + static_cast<Eigen::Index>(i)) = cache.column(feats[i]);
      const double lm = log_marginal(design, y, spec);
      const double lp = log_model_prior(feats, prior_a);
      keys.push_back(model_key(feats));
      masses.push_back(lm + lp);
    } catch (const NumericError&) {
      // zero-mass model (singular design): excluded, as in the sampler
    }
  }
  if (keys.empty()) throw NumericError("no model in the space is estimable");

  const double lse = log_sum_exp(masses);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < keys.size(); ++i)
    out[keys[i]] = std::exp(masses[i] - lse);
  return out;
}

double total_variation(const std::map<std::string, double>& p,
                       const std::map<std::string, double>& q) {
  double sum = 0.0;
  for (const auto& [key, pv] : p) {
    const auto it = q.find(key);
    sum += std::abs(pv - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [key, qv] : q)
    if (!p.count(key)) sum += qv;
  return 0.5 * sum;
}

RunSettings default_experiment_settings(const std::string& generator,
                                        Eigen::Index n) {
  RunSettings st;
  st.family.family = Family::Gaussian;
  st.strategy.kind = 1;
  st.limits.max_depth = 5;
  st.prior_a = std::exp(-2.0 * std::log(static_cast<double>(n)));
  st.lib = TransformLibrary::preset("g1");
  st.limits.max_local_width = 15;
  st.model_size_cap = 15;
  st.kernel.local_steps = 12;

  if (generator == "logic") {
    // Eight ground-truth terms decompose into twenty marginal pieces, more
    // than fit under the size cap, so interactions must be assembled across
    // many transitions: long schedule, survivor-focused operands, and
    // residual shelter for half-built products.
    st.schedule.population_size = 50;
    st.schedule.generations = 60;
    st.schedule.init_steps = 300;
    st.schedule.explore_steps = 250;
    st.schedule.final_unique = 1500;
    // On binary covariates every modification is affine in its child, so
    // shift that mass onto multiplications.
    st.schedule.p_projection = 0.02;
    st.schedule.p_modification = 0.03;
    st.schedule.p_multiplication = 0.75;
    st.schedule.p_input = 0.2;
    st.schedule.residual_keep = 8;
    st.schedule.operand_focus = 0.5;
  } else if (generator == "kepler" || generator == "mass") {
    st.schedule.population_size = 20;
    st.schedule.generations = 40;
    st.schedule.init_steps = 300;
    st.schedule.explore_steps = 200;
    st.schedule.final_unique = 1500;
    st.schedule.p_projection = 0.1;
    st.schedule.p_modification = 0.35;
    st.schedule.p_multiplication = 0.35;
    st.schedule.p_input = 0.2;
  } else {
    throw ConfigError("unknown experiment generator '" + generator + "'");
  }
  return st;
}

std::string canonical_product_key(const std::string& key) {
  FeaturePtr f;
  try {
    f = parse_feature_key(key);
  } catch (const Error&) {
    return key;
  }

  std::set<int> leaves;
  const std::function<bool(const FeaturePtr&)> collect =
      [&](const FeaturePtr& node) {
        if (node->kind() == FeatureKind::Input) {
          leaves.insert(node->input_index());
          return true;
        }
        if (node->kind() != FeatureKind::Multiplication) return false;
        return collect(node->children()[0]) && collect(node->children()[1]);
      };
  if (!collect(f) || leaves.empty()) return key;

  FeaturePtr canon;
  for (const int j : leaves) {
    FeaturePtr leaf = Feature::input(j);
    canon = canon ? Feature::multiplication(std::move(canon), std::move(leaf))
                  : std::move(leaf);
  }
  return canon->key();
}

DetectionOutcome run_detection_experiment(const std::string& generator,
                                          int replicates, int chains,
                                          double threshold,
                                          std::uint64_t base_seed,
                                          const RunSettings* override_settings,
                                          std::ostream* log) {
  if (replicates < 1) throw ConfigError("replicate count must be at least 1");

  SyntheticSpec synth;
  synth.generator = generator;
  if (generator == "logic") {
    synth.n = 1000;
    synth.noise_sd = 1.0;
  } else if (generator == "kepler") {
    synth.n = 223;
    synth.noise_sd = 0.01;
    synth.relative_noise = true;
  } else if (generator == "mass") {
    synth.n = 500;
    synth.noise_sd = 0.01;
    synth.relative_noise = true;
  } else {
    throw ConfigError("unknown experiment generator '" + generator + "'");
  }

  const RunSettings settings = override_settings
                                   ? *override_settings
                                   : default_experiment_settings(generator, synth.n);

  DetectionOutcome out;
  for (int r = 0; r < replicates; ++r) {
    synth.seed = base_seed + r;
    const SyntheticData data = gen_synthetic(synth);
    if (r == 0) out.truth_classes = data.truth_classes;

    const auto summaries =
        run_parallel(data.data.X, data.data.y, settings, chains,
                     base_seed + 7919 * (static_cast<std::uint64_t>(r) + 1), log);
    const AggregateResult agg = aggregate(summaries, AggregationMode::MassWeighted);

    // On binary covariates, syntactically different products of the same
    // leaves compute the same function; their posteriors pool. Models never
    // contain two of them at once (collinear), so the sum is exact.
    std::map<std::string, double> merged;
    for (const auto& [key, p] : agg.feature_posteriors)
      merged[generator == "logic" ? canonical_product_key(key) : key] += p;

    std::set<std::string> detected;
    for (const auto& [key, p] : merged)
      if (p > threshold) detected.insert(key);

    if (log) {
      *log << generator << " replicate " << r << ": " << detected.size()
           << " detections";
      for (const auto& key : detected)
        *log << " | " << key << " " << merged.at(key);
      *log << "\n";
    }
    out.detected.push_back(std::move(detected));
  }

  out.metrics = detection_metrics(out.detected, out.truth_classes, true);
  return out;
}

EnumerationOutcome run_enumeration_experiment(int replicates, int budget_steps,
                                              std::uint64_t base_seed) {
  if (replicates < 1) throw ConfigError("replicate count must be at least 1");

  // Fixed Gaussian toy problem: 4 covariates, 2 active.
  const int m = 4;
  const Eigen::Index n = 60;
  std::mt19937_64 rng(base_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd X(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) X(i, j) = gauss(rng);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i)
    y[i] = 1.0 + 1.2 * X(i, 0) - 0.8 * X(i, 2) + gauss(rng);

  RunSettings st;
  st.family.family = Family::Gaussian;
  st.strategy.kind = 1;
  st.limits.max_depth = 0;
  st.model_size_cap = m;
  st.prior_a = std::exp(-2.0);
  st.schedule.population_size = m;
  st.schedule.generations = 1;
  st.schedule.init_steps = budget_steps;
  st.schedule.final_unique = 0;

  std::vector<FeaturePtr> features;
  for (int j = 1; j <= m; ++j) features.push_back(Feature::input(j));
  const auto exact =
      exact_posterior(features, X, y, st.family, st.prior_a, st.model_size_cap);

  EnumerationOutcome out;
  out.models_in_space = 1 << m;
  for (int r = 0; r < replicates; ++r) {
    const RunSummary summary =
        run_chain(X, y, st, base_seed + 7919 * (static_cast<std::uint64_t>(r) + 1));
    if (summary.failed) throw Error("enumeration replicate failed: " + summary.error);
    out.tv.push_back(total_variation(summary.model_posteriors, exact));
  }
  return out;
}

}  // namespace bgnlm
