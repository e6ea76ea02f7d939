// Independent reference implementations used only by tests. Everything here
// is deliberately written with different algorithms than the library
// (normal equations vs QR, Newton vs IRLS, quadrature vs Laplace) so that
// agreement is evidence, not tautology.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

// Least squares via the normal equations with full-pivot LU.
inline Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return (X.transpose() * X).fullPivLu().solve(X.transpose() * y);
}

inline double bernoulli_log_lik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log p = y*eta - log(1+e^eta), stable both directions
    const double e = eta[i];
    ll += y[i] * e - (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e)));
  }
  return ll;
}

inline Eigen::MatrixXd bernoulli_fisher(const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-eta[i]));
    w[i] = p * (1.0 - p);
  }
  return X.transpose() * w.asDiagonal() * X;
}

// Plain Newton-Raphson for the Bernoulli MLE, no damping, no ridge.
inline Eigen::VectorXd newton_logistic(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y,
                                       int max_iter = 100) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd mu(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    const Eigen::VectorXd score = X.transpose() * (y - mu);
    if (score.lpNorm<Eigen::Infinity>() < 1e-12) break;
    beta += bernoulli_fisher(X, beta).fullPivLu().solve(score);
  }
  return beta;
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
}

// log of the Jeffreys-prior evidence integral
//   I = integral p(y|beta) |J_n(beta)|^{1/2} d beta
// for a Bernoulli GLM, by tensor Gauss-Legendre quadrature centered at the
// MLE and scaled by the observed standard errors. Feasible up to 3
// dimensions. A Laplace approximation of the same integral equals
// loglik(beta_hat) + (k/2) log(2 pi), which is what the cross-check
// criterion compares differences against.
inline double bernoulli_evidence_quadrature(const Eigen::MatrixXd& X,
                                            const Eigen::VectorXd& y,
                                            const Eigen::VectorXd& beta_hat,
                                            int points_per_dim = 48,
                                            double half_width_se = 12.0) {
  const int k = static_cast<int>(X.cols());
  if (k > 3) throw std::runtime_error("quadrature oracle supports up to 3 dims");

  const Eigen::MatrixXd fisher = bernoulli_fisher(X, beta_hat);
  const Eigen::MatrixXd cov = fisher.fullPivLu().inverse();
  Eigen::VectorXd se(k);
  for (int j = 0; j < k; ++j) se[j] = std::sqrt(cov(j, j));

  std::vector<double> nodes, weights;
  gauss_legendre(points_per_dim, nodes, weights);

  const double ll_hat = bernoulli_log_lik(X, y, beta_hat);
  double sum = 0.0;  // of exp(ll - ll_hat) * |J|^{1/2} * quad weights
  std::vector<int> idx(k, 0);
  const long total = static_cast<long>(std::pow(points_per_dim, k));
  Eigen::VectorXd beta(k);
  for (long t = 0; t < total; ++t) {
    long rem = t;
    double w = 1.0;
    for (int j = 0; j < k; ++j) {
      idx[j] = static_cast<int>(rem % points_per_dim);
      rem /= points_per_dim;
      beta[j] = beta_hat[j] + half_width_se * se[j] * nodes[idx[j]];
      w *= weights[idx[j]] * half_width_se * se[j];
    }
    const double ll = bernoulli_log_lik(X, y, beta);
    const double det = bernoulli_fisher(X, beta).determinant();
    if (det > 0) sum += w * std::exp(ll - ll_hat) * std::sqrt(det);
  }
  return ll_hat + std::log(sum);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace oracle
