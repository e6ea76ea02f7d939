#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <random>

#include "bgnlm/errors.hpp"

namespace bgnlm {

enum class Family { Gaussian, Bernoulli, Poisson };

const char* family_name(Family f);
Family family_by_name(const std::string& name);

// Response family plus an optional offset. Canonical links only
// (identity / logit / log), so the link is implied by the family.
struct FamilySpec {
  Family family = Family::Gaussian;
  std::optional<Eigen::VectorXd> offset;  // Poisson only

  // Throws ConfigError when the offset is present for a non-Poisson
  // family or its length does not match n.
  void validate(Eigen::Index n) const;
};

struct FitResult {
  Eigen::VectorXd beta;        // intercept first
  double log_lik = 0.0;
  Eigen::MatrixXd fisher_info; // X'WX at beta (X'X/sigma2 for Gaussian)
  double dispersion = 1.0;     // Gaussian: RSS/n; 1 otherwise
  double rss = 0.0;            // Gaussian only
  bool converged = false;
  int iterations = 0;
};

// Maximum-likelihood fit. Gaussian solves least squares in closed form;
// Bernoulli/Poisson run damped IRLS (max 50 iterations, step halving,
// score tolerance 1e-6). Throws SingularDesign (a NumericError) via
// rank check on X. Bernoulli separation returns a ridge-stabilised fit
// with converged=false instead of throwing.
FitResult fit_mle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const FamilySpec& spec);

// Log marginal likelihood convention used throughout:
//   Gaussian:           -(n/2) * log(RSS/n)
//   Bernoulli/Poisson:  log-likelihood at the MLE
// Constant factors are dropped deliberately so complexity penalties come
// only from the model prior. Throws NumericError on a non-finite result.
double log_marginal(const FitResult& fit, const FamilySpec& spec, Eigen::Index n);

// Convenience: fit then evaluate the marginal. Optionally hands back the fit.
double log_marginal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const FamilySpec& spec, FitResult* fit_out = nullptr);

// Monte Carlo marginal: average the marginal likelihood over `draws`
// prior draws of the design (the sampler regenerates projection columns
// with fresh alphas). Returned in log space:
//   logsumexp_t log_marginal(X_t) - log(draws)
double mc_marginal(const std::function<Eigen::MatrixXd(std::mt19937_64&)>& draw_design,
                   const Eigen::VectorXd& y, const FamilySpec& spec,
                   int draws, std::mt19937_64& rng);

namespace detail {
// Log-likelihood at linear predictor eta; -inf on overflow (never NaN).
double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                      const FamilySpec& spec);
}  // namespace detail

}  // namespace bgnlm
