#include "bgnlm/glm.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "bgnlm/numerics.hpp"

namespace bgnlm {

namespace {

constexpr int kMaxIrlsIter = 50;
constexpr double kScoreTol = 1e-8;
constexpr double kRelLogLikTol = 1e-10;
constexpr double kRidge = 1e-6;
constexpr double kWeightFloor = 1e-10;
constexpr double kRssFloor = 1e-300;

double stable_softplus(double x) {
  // log(1 + e^x) without overflow in either tail.
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Eigen::VectorXd mean_from_eta(const Eigen::VectorXd& eta, Family family) {
  switch (family) {
    case Family::Gaussian:
      return eta;
    case Family::Bernoulli:
      return eta.unaryExpr([](double e) {
        if (e >= 0) return 1.0 / (1.0 + std::exp(-e));
        const double t = std::exp(e);
        return t / (1.0 + t);
      });
    case Family::Poisson:
      return eta.unaryExpr([](double e) { return std::exp(e); });
  }
  return eta;  // unreachable
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Bernoulli: return "bernoulli";
    case Family::Poisson: return "poisson";
  }
  return "?";
}

Family family_by_name(const std::string& name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "bernoulli" || name == "binomial") return Family::Bernoulli;
  if (name == "poisson") return Family::Poisson;
  throw ConfigError("unknown family '" + name +
                    "' (expected gaussian, bernoulli, or poisson)");
}

void FamilySpec::validate(Eigen::Index n) const {
  if (offset) {
    if (family != Family::Poisson)
      throw ConfigError("offset is only supported with the poisson family");
    if (offset->size() != n)
      throw ConfigError("offset length " + std::to_string(offset->size()) +
                        " does not match n = " + std::to_string(n));
  }
}

double detail::log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                              const FamilySpec& spec) {
  const Eigen::Index n = eta.size();
  double ll = 0.0;
  switch (spec.family) {
    case Family::Gaussian: {
      // Profile likelihood at sigma2 = RSS/n; used only for reporting.
      double rss = (y - eta).squaredNorm();
      if (rss < kRssFloor) rss = kRssFloor;
      ll = -0.5 * n * (std::log(2.0 * M_PI * rss / n) + 1.0);
      break;
    }
    case Family::Bernoulli:
      for (Eigen::Index i = 0; i < n; ++i)
        ll += y[i] * eta[i] - stable_softplus(eta[i]);
      break;
    case Family::Poisson:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = std::exp(eta[i]);
        if (!std::isfinite(mu))
          return -std::numeric_limits<double>::infinity();
        ll += y[i] * eta[i] - mu - std::lgamma(y[i] + 1.0);
      }
      break;
  }
  if (std::isnan(ll)) return -std::numeric_limits<double>::infinity();
  return ll;
}

FitResult fit_mle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const FamilySpec& spec) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n)
    throw ConfigError("response length does not match design rows");
  spec.validate(n);
  if (n <= p)
    throw NumericError("singular design: " + std::to_string(n) + " rows for " +
                       std::to_string(p) + " coefficients");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p)
    throw NumericError("singular design: rank " + std::to_string(qr.rank()) +
                       " < " + std::to_string(p) + " columns");

  FitResult out;
  if (spec.family == Family::Gaussian) {
    out.beta = qr.solve(y);
    out.rss = (y - X * out.beta).squaredNorm();
    out.dispersion = out.rss / static_cast<double>(n);
    const double sigma2 = std::max(out.dispersion, kRssFloor);
    out.log_lik = -0.5 * n * (std::log(2.0 * M_PI * sigma2) + 1.0);
    out.fisher_info = (X.transpose() * X) / sigma2;
    out.converged = true;
    out.iterations = 1;
    return out;
  }

  const Eigen::VectorXd offset =
      spec.offset ? *spec.offset : Eigen::VectorXd::Zero(n);

  // Damped Newton (IRLS in score form for canonical links).
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (spec.family == Family::Poisson) {
    // Start the intercept near the aggregate rate so exp(eta) cannot blow up.
    const double exposure = offset.array().exp().sum();
    beta[0] = std::log((y.sum() + 0.1) / exposure);
  }

  Eigen::VectorXd eta = X * beta + offset;
  double ll = detail::log_likelihood(eta, y, spec);
  bool ridged = false;
  double score_inf = std::numeric_limits<double>::infinity();
  int iter = 0;

  for (; iter < kMaxIrlsIter; ++iter) {
    const Eigen::VectorXd mu = mean_from_eta(eta, spec.family);
    const Eigen::VectorXd score = X.transpose() * (y - mu);
    score_inf = score.lpNorm<Eigen::Infinity>();
    if (score_inf < kScoreTol) break;

    Eigen::VectorXd w;
    if (spec.family == Family::Bernoulli)
      w = (mu.array() * (1.0 - mu.array())).cwiseMax(kWeightFloor);
    else
      w = mu.cwiseMax(kWeightFloor);

    Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    if (ridged)
      info.diagonal().array() += kRidge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(score);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      if (!ridged) {
        // Weight collapse (separation): stabilise and keep going.
        ridged = true;
        info.diagonal().array() += kRidge;
        step = Eigen::LDLT<Eigen::MatrixXd>(info).solve(score);
      }
      if (!step.allFinite())
        throw NumericError("IRLS produced a non-finite step");
    }

    // Step halving: retreat until the likelihood does not decrease.
    double scale = 1.0;
    Eigen::VectorXd beta_new;
    Eigen::VectorXd eta_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < 30; ++h) {
      beta_new = beta + scale * step;
      eta_new = X * beta_new + offset;
      ll_new = detail::log_likelihood(eta_new, y, spec);
      if (ll_new >= ll - 1e-12) break;
      scale *= 0.5;
    }
    if (ll_new < ll - 1e-12) break;  // no ascent direction left

    const bool tiny_gain = std::abs(ll_new - ll) <
                           kRelLogLikTol * (std::abs(ll_new) + 1.0);
    beta = beta_new;
    eta = eta_new;
    ll = ll_new;

    if (spec.family == Family::Bernoulli && !ridged &&
        eta.lpNorm<Eigen::Infinity>() > 30.0) {
      // Fitted probabilities pinned at 0/1: separation.
      ridged = true;
    }
    if (tiny_gain && !ridged) {
      const Eigen::VectorXd mu2 = mean_from_eta(eta, spec.family);
      score_inf = (X.transpose() * (y - mu2)).lpNorm<Eigen::Infinity>();
      break;
    }
  }

  {
    const Eigen::VectorXd mu = mean_from_eta(eta, spec.family);
    score_inf = (X.transpose() * (y - mu)).lpNorm<Eigen::Infinity>();
    Eigen::VectorXd w;
    if (spec.family == Family::Bernoulli)
      w = (mu.array() * (1.0 - mu.array())).cwiseMax(kWeightFloor);
    else
      w = mu.cwiseMax(kWeightFloor);
    out.fisher_info = X.transpose() * w.asDiagonal() * X;
  }

  out.beta = beta;
  out.log_lik = ll;
  out.dispersion = 1.0;
  out.converged = !ridged && score_inf < kScoreTol;
  out.iterations = iter;
  if (!beta.allFinite() || !std::isfinite(ll))
    throw NumericError("IRLS diverged to a non-finite fit");
  return out;
}

double log_marginal(const FitResult& fit, const FamilySpec& spec, Eigen::Index n) {
  double value;
  if (spec.family == Family::Gaussian) {
    const double rss = std::max(fit.rss, kRssFloor);
    value = -0.5 * static_cast<double>(n) * std::log(rss / static_cast<double>(n));
  } else {
    value = fit.log_lik;
  }
  if (!std::isfinite(value))
    throw NumericError("non-finite log marginal likelihood");
  return value;
}

double log_marginal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const FamilySpec& spec, FitResult* fit_out) {
  FitResult fit = fit_mle(X, y, spec);
  const double value = log_marginal(fit, spec, X.rows());
  if (fit_out) *fit_out = std::move(fit);
  return value;
}

double mc_marginal(const std::function<Eigen::MatrixXd(std::mt19937_64&)>& draw_design,
                   const Eigen::VectorXd& y, const FamilySpec& spec,
                   int draws, std::mt19937_64& rng) {
  if (draws < 1) throw ConfigError("mc_marginal requires draws >= 1");
  std::vector<double> values;
  values.reserve(draws);
  for (int t = 0; t < draws; ++t)
    values.push_back(log_marginal(draw_design(rng), y, spec));
  return log_sum_exp(values) - std::log(static_cast<double>(draws));
}

}  // namespace bgnlm
