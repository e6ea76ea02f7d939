#include "bgnlm/feature_gen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <unordered_set>

namespace bgnlm {

namespace {

constexpr int kMaxAscentIter = 100;
constexpr double kGradTol = 1e-6;
constexpr double kRedundancyTol = 1e-8;

std::size_t pick_index(std::size_t n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

const Transform& pick_transform(const TransformLibrary& lib, std::mt19937_64& rng) {
  if (lib.size() == 0) throw ConfigError("transform library is empty");
  return lib.at(pick_index(lib.size(), rng));
}

// Damped gradient ascent with finite-difference gradients and a coordinate
// search pass at kinks. Returns false only when the iteration limit is hit;
// a point no probe can improve counts as converged.
bool ascend(const std::function<double(const Eigen::VectorXd&)>& obj,
            Eigen::VectorXd& theta) {
  double f = obj(theta);
  if (!std::isfinite(f)) return false;

  auto fd_gradient = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd g(at.size());
    Eigen::VectorXd probe = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(at[i]));
      probe[i] = at[i] + h;
      const double fp = obj(probe);
      probe[i] = at[i] - h;
      const double fm = obj(probe);
      probe[i] = at[i];
      g[i] = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * h) : 0.0;
    }
    return g;
  };

  auto coordinate_pass = [&]() {
    bool improved = false;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      for (double step = 1.0; step > 1e-7; step *= 0.5) {
        bool moved = false;
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd cand = theta;
          cand[i] += sgn * step;
          const double fc = obj(cand);
          if (fc > f + 1e-14) {
            theta = cand;
            f = fc;
            improved = moved = true;
            break;
          }
        }
        if (moved) break;
      }
    }
    return improved;
  };

  for (int it = 0; it < kMaxAscentIter; ++it) {
    const Eigen::VectorXd g = fd_gradient(theta);
    if (g.lpNorm<Eigen::Infinity>() < kGradTol) return true;

    double step = 1.0 / std::max(1.0, g.norm());
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      const Eigen::VectorXd cand = theta + step * g;
      const double fc = obj(cand);
      if (fc > f + 1e-14) {
        theta = cand;
        f = fc;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved && !coordinate_pass()) return true;  // local optimum
  }
  return false;
}

Eigen::MatrixXd child_design(const std::vector<FeaturePtr>& children,
                             ColumnCache& cache) {
  const Eigen::Index n = cache.X().rows();
  Eigen::MatrixXd C(n, static_cast<Eigen::Index>(children.size()) + 1);
  C.col(0).setOnes();
  for (std::size_t i = 0; i < children.size(); ++i)
    C.col(1 + static_cast<Eigen::Index>(i)) = cache.column(children[i]);
  return C;
}

double transformed_log_lik(const Eigen::MatrixXd& C, const Eigen::VectorXd& alpha,
                           const Transform& g, const Eigen::VectorXd& y,
                           const FamilySpec& spec) {
  const Eigen::VectorXd eta = (C * alpha).unaryExpr(g.apply);
  return detail::log_likelihood(eta, y, spec);
}

// Post-order: nested projection weights of each child, children in stored order.
void collect_nested_alphas(const FeaturePtr& f, std::vector<double>& out) {
  for (const auto& c : f->children()) collect_nested_alphas(c, out);
  if (f->kind() == FeatureKind::Projection)
    for (Eigen::Index i = 0; i < f->alpha().size(); ++i) out.push_back(f->alpha()[i]);
}

FeaturePtr rebuild_with_alphas(const FeaturePtr& f, const Eigen::VectorXd& theta,
                               Eigen::Index& cursor) {
  switch (f->kind()) {
    case FeatureKind::Input:
      return f;
    case FeatureKind::Modification:
      return Feature::modification(f->transform(),
                                   rebuild_with_alphas(f->children()[0], theta, cursor));
    case FeatureKind::Multiplication: {
      FeaturePtr l = rebuild_with_alphas(f->children()[0], theta, cursor);
      FeaturePtr r = rebuild_with_alphas(f->children()[1], theta, cursor);
      return Feature::multiplication(std::move(l), std::move(r));
    }
    case FeatureKind::Projection: {
      std::vector<FeaturePtr> kids;
      kids.reserve(f->children().size());
      for (const auto& c : f->children())
        kids.push_back(rebuild_with_alphas(c, theta, cursor));
      const Eigen::Index k = f->alpha().size();
      Eigen::VectorXd a = theta.segment(cursor, k);
      cursor += k;
      return Feature::projection(f->transform(), std::move(kids), std::move(a));
    }
  }
  return f;  // unreachable
}

AlphaFit strategy1(const Eigen::MatrixXd& C, const std::vector<FeaturePtr>& children,
                   const Eigen::VectorXd& y, const FamilySpec& spec) {
  FitResult fit = fit_mle(C, y, spec);
  return {std::move(fit.beta), children};
}

AlphaFit strategy2(const Eigen::MatrixXd& C, const std::vector<FeaturePtr>& children,
                   const Transform& g, const Eigen::VectorXd& y,
                   const FamilySpec& spec) {
  AlphaFit warm = strategy1(C, children, y, spec);
  Eigen::VectorXd theta = warm.alpha;
  auto obj = [&](const Eigen::VectorXd& a) {
    return transformed_log_lik(C, a, g, y, spec);
  };
  if (!std::isfinite(obj(theta))) theta.setZero();
  if (ascend(obj, theta) && theta.allFinite()) return {std::move(theta), children};
  return warm;  // iteration limit: fall back to the untransformed fit
}

AlphaFit strategy3(const Eigen::MatrixXd& C, const std::vector<FeaturePtr>& children,
                   const Transform& g, const Eigen::VectorXd& y,
                   const FamilySpec& spec, const Eigen::MatrixXd& X) {
  AlphaFit warm = strategy2(C, children, g, y, spec);

  std::vector<double> nested;
  for (const auto& c : children) collect_nested_alphas(c, nested);
  if (nested.empty()) return warm;  // nothing below to re-estimate

  const Eigen::Index k_out = warm.alpha.size();
  Eigen::VectorXd theta(k_out + static_cast<Eigen::Index>(nested.size()));
  theta.head(k_out) = warm.alpha;
  for (std::size_t i = 0; i < nested.size(); ++i)
    theta[k_out + static_cast<Eigen::Index>(i)] = nested[i];

  const Eigen::Index n = y.size();
  auto obj = [&](const Eigen::VectorXd& t) {
    try {
      Eigen::Index cursor = k_out;
      Eigen::MatrixXd Ct(n, k_out);
      Ct.col(0).setOnes();
      for (std::size_t i = 0; i < children.size(); ++i) {
        FeaturePtr c = rebuild_with_alphas(children[i], t, cursor);
        Ct.col(1 + static_cast<Eigen::Index>(i)) = c->evaluate(X);
      }
      return transformed_log_lik(Ct, t.head(k_out), g, y, spec);
    } catch (const NumericError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  if (!ascend(obj, theta) || !theta.allFinite()) return warm;

  Eigen::Index cursor = k_out;
  std::vector<FeaturePtr> kids;
  kids.reserve(children.size());
  for (const auto& c : children)
    kids.push_back(rebuild_with_alphas(c, theta, cursor));
  return {theta.head(k_out), std::move(kids)};
}

}  // namespace

void AlphaStrategy::validate() const {
  if (kind < 1 || kind > 4)
    throw ConfigError("alpha strategy must be 1, 2, 3, or 4");
  if (kind == 4) {
    if (!(alpha_sd > 0))
      throw ConfigError("alpha prior sd must be positive");
    if (mc_draws < 1)
      throw ConfigError("marginal draw count must be at least 1");
  }
}

void GenerationLimits::validate() const {
  if (max_depth < 0) throw ConfigError("max depth must be non-negative");
  if (max_local_width < 2)
    throw ConfigError("max local width must be at least 2");
}

AlphaFit estimate_alpha(const AlphaStrategy& strategy, const Transform& g,
                        const std::vector<FeaturePtr>& children,
                        ColumnCache& cache, const Eigen::VectorXd& y,
                        const FamilySpec& spec, std::mt19937_64& rng) {
  strategy.validate();
  if (children.empty())
    throw ConfigError("projection requires at least one child feature");

  if (strategy.kind == 4) {
    std::normal_distribution<double> prior(0.0, strategy.alpha_sd);
    std::vector<FeaturePtr> kids;
    kids.reserve(children.size());
    for (const auto& c : children)
      kids.push_back(resample_projection_alphas(c, strategy.alpha_sd, rng));
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(children.size()) + 1);
    for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha[i] = prior(rng);
    return {std::move(alpha), std::move(kids)};
  }

  const Eigen::MatrixXd C = child_design(children, cache);
  switch (strategy.kind) {
    case 1:
      return strategy1(C, children, y, spec);
    case 2:
      return strategy2(C, children, g, y, spec);
    default:
      return strategy3(C, children, g, y, spec, cache.X());
  }
}

FeaturePtr generate_feature(GenKind kind, const std::vector<FeaturePtr>& pool,
                            const std::vector<FeaturePtr>& originals,
                            const TransformLibrary& lib,
                            const AlphaStrategy& strategy,
                            const GenerationLimits& limits, ColumnCache& cache,
                            const Eigen::VectorXd& y, const FamilySpec& spec,
                            std::mt19937_64& rng, const OperandBias& bias) {
  limits.validate();
  if (pool.empty()) throw ConfigError("feature pool is empty");
  if (!(bias.p >= 0.0 && bias.p <= 1.0))
    throw ConfigError("operand bias probability must lie in [0, 1]");

  auto pick_operand = [&]() -> const FeaturePtr& {
    if (bias.focus && !bias.focus->empty() && bias.p > 0.0 &&
        std::bernoulli_distribution(bias.p)(rng))
      return (*bias.focus)[pick_index(bias.focus->size(), rng)];
    return pool[pick_index(pool.size(), rng)];
  };

  switch (kind) {
    case GenKind::Input: {
      if (originals.empty()) throw ConfigError("no original covariates available");
      return originals[pick_index(originals.size(), rng)];
    }
    case GenKind::Modification: {
      const FeaturePtr& child = pick_operand();
      if (1 + child->depth() > limits.max_depth)
        throw DepthExceeded("modification would exceed depth " +
                            std::to_string(limits.max_depth));
      return Feature::modification(pick_transform(lib, rng), child);
    }
    case GenKind::Multiplication: {
      const FeaturePtr& l = pick_operand();
      const FeaturePtr& r = pick_operand();
      if (1 + l->depth() + r->depth() > limits.max_depth)
        throw DepthExceeded("multiplication would exceed depth " +
                            std::to_string(limits.max_depth));
      return Feature::multiplication(l, r);
    }
    case GenKind::Projection:
      break;
  }

  // Projection: distinct component keys, subset size uniform on [2, min(L, pool)].
  std::vector<FeaturePtr> uniq;
  {
    std::unordered_set<std::string> seen;
    for (const auto& f : pool)
      if (seen.insert(f->key()).second) uniq.push_back(f);
  }
  if (uniq.size() < 2)
    throw WidthExceeded("projection needs at least two distinct components");
  const std::size_t k_max =
      std::min<std::size_t>(limits.max_local_width, uniq.size());
  const std::size_t k =
      std::uniform_int_distribution<std::size_t>(2, k_max)(rng);

  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j =
        i + std::uniform_int_distribution<std::size_t>(0, uniq.size() - 1 - i)(rng);
    std::swap(uniq[i], uniq[j]);
  }
  std::vector<FeaturePtr> subset(uniq.begin(), uniq.begin() + k);

  int max_child_depth = 0;
  for (const auto& c : subset) max_child_depth = std::max(max_child_depth, c->depth());
  if (1 + max_child_depth > limits.max_depth)
    throw DepthExceeded("projection would exceed depth " +
                        std::to_string(limits.max_depth));

  const Transform& g = pick_transform(lib, rng);
  try {
    AlphaFit fit = estimate_alpha(strategy, g, subset, cache, y, spec, rng);
    return Feature::projection(g, std::move(fit.children), std::move(fit.alpha));
  } catch (const NumericError& e) {
    throw AlphaFitFailed(e.what());
  }
}

bool is_redundant(const FeaturePtr& f, const std::vector<FeaturePtr>& population,
                  ColumnCache& cache) {
  for (const auto& m : population)
    if (m->key() == f->key()) return true;

  Eigen::VectorXd c;
  try {
    c = cache.column(f);
  } catch (const NumericError&) {
    return true;  // non-finite candidates are never admitted
  }

  const double cn = c.norm();
  if (!(cn > 0) || !std::isfinite(cn)) return true;

  const Eigen::Index n = c.size();
  Eigen::MatrixXd A(n, static_cast<Eigen::Index>(population.size()) + 1);
  A.col(0).setOnes();
  for (std::size_t i = 0; i < population.size(); ++i)
    A.col(1 + static_cast<Eigen::Index>(i)) = cache.column(population[i]);

  const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(c);
  const double rel = (c - A * coef).norm() / cn;
  return rel < kRedundancyTol;
}

FeaturePtr resample_projection_alphas(const FeaturePtr& f, double sd,
                                      std::mt19937_64& rng) {
  if (!(sd > 0)) throw ConfigError("alpha prior sd must be positive");
  switch (f->kind()) {
    case FeatureKind::Input:
      return f;
    case FeatureKind::Modification: {
      FeaturePtr child = resample_projection_alphas(f->children()[0], sd, rng);
      if (child == f->children()[0]) return f;
      return Feature::modification(f->transform(), std::move(child));
    }
    case FeatureKind::Multiplication: {
      FeaturePtr l = resample_projection_alphas(f->children()[0], sd, rng);
      FeaturePtr r = resample_projection_alphas(f->children()[1], sd, rng);
      if (l == f->children()[0] && r == f->children()[1]) return f;
      return Feature::multiplication(std::move(l), std::move(r));
    }
    case FeatureKind::Projection: {
      std::vector<FeaturePtr> kids;
      kids.reserve(f->children().size());
      for (const auto& c : f->children())
        kids.push_back(resample_projection_alphas(c, sd, rng));
      std::normal_distribution<double> prior(0.0, sd);
      Eigen::VectorXd alpha(f->alpha().size());
      for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha[i] = prior(rng);
      return Feature::projection(f->transform(), std::move(kids), std::move(alpha));
    }
  }
  return f;  // unreachable
}

}  // namespace bgnlm
