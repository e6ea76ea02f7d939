#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "bgnlm/feature_gen.hpp"
#include "bgnlm/glm.hpp"
#include "bgnlm/mjmcmc.hpp"
#include "bgnlm/model_space.hpp"
#include "bgnlm/transforms.hpp"

namespace bgnlm {

struct ScheduleConfig {
  int population_size = 20;  // s
  int generations = 10;      // number of populations (1 = no evolution)
  int init_steps = 300;      // kernel steps on the initial population
  int explore_steps = 250;   // kernel steps after each evolution
  int final_unique = 2000;   // unique models to collect in the final phase
  int max_final_steps = 0;   // 0 = 50 * final_unique + 10000

  // Replacement kind probabilities (projection, modification,
  // multiplication, input); must sum to 1.
  double p_projection = 0.1;
  double p_modification = 0.3;
  double p_multiplication = 0.4;
  double p_input = 0.2;

  double keep_threshold = 0.5;  // within-phase inclusion needed to survive
  int preselect_count = -1;     // top covariates ranked into S_0; -1 = min(m, s)
  int protected_count = 3;      // best initial covariates kept in every S_t

  // Extra survivors below the threshold, ranked by correlation with the
  // residuals of the best model seen in the finished phase (0 = off).
  // Keeps half-built interactions alive long enough to be combined again.
  int residual_keep = 0;
  // Chance that a multiplication or modification operand is drawn from the
  // survivor set rather than the whole pool (0 = uniform over the pool).
  double operand_focus = 0.0;

  void validate(int model_size_cap, int max_local_width) const;
};

struct RunSettings {
  FamilySpec family;
  TransformLibrary lib = TransformLibrary::preset("g1");
  AlphaStrategy strategy;
  GenerationLimits limits;         // D and L
  int model_size_cap = 20;         // Q
  double prior_a = 0.1353352832366127;  // e^{-2}
  KernelConfig kernel;
  ScheduleConfig schedule;

  void validate() const;
};

struct RunSummary {
  std::map<std::string, double> feature_posteriors;
  std::map<std::string, double> model_posteriors;
  double log_mass = -std::numeric_limits<double>::infinity();  // s_b
  int model_count = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::shared_ptr<VisitedStore> store;
};

struct Population {
  std::vector<FeaturePtr> features;
  std::vector<FeaturePtr> protected_features;
};

// S_0: rank covariates by univariate log marginal, keep the top
// preselect_count, pad with remaining covariates in random order.
// Covariates that are redundant against the selection are skipped.
Population init_population(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const FamilySpec& spec, const ScheduleConfig& cfg,
                           std::mt19937_64& rng);

// One genetic transition. `inclusion` holds within-phase inclusion
// probabilities aligned with pop.features. `best_residuals`, when given,
// ranks the residual_keep extra survivors and may be null. Never fails:
// after 100 rejected candidates per vacancy it falls back to unused
// original covariates, then to reinstating the best dropped members.
Population evolve_population(const Population& pop,
                             const std::vector<double>& inclusion,
                             const std::vector<FeaturePtr>& originals,
                             const RunSettings& settings, ColumnCache& cache,
                             const Eigen::VectorXd& y, std::mt19937_64& rng,
                             const Eigen::VectorXd* best_residuals = nullptr);

// Full single-chain run: initial phase, generations-1 evolutions, then a
// final phase that stops after final_unique fresh models (guarded by
// max_final_steps). `log` receives per-phase progress lines when non-null.
RunSummary run_chain(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const RunSettings& settings, std::uint64_t seed,
                     std::ostream* log = nullptr);

}  // namespace bgnlm
