#include "bgnlm/gmjmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "bgnlm/numerics.hpp"

namespace bgnlm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Same tolerance as is_redundant: a candidate whose column sits closer
// than this to the span of the population columns is rejected.
constexpr double kSpanTol = 1e-8;

std::vector<FeaturePtr> dedup_by_key(const std::vector<FeaturePtr>& a,
                                     const std::vector<FeaturePtr>& b) {
  std::vector<FeaturePtr> out;
  std::unordered_set<std::string> seen;
  for (const auto* src : {&a, &b})
    for (const auto& f : *src)
      if (seen.insert(f->key()).second) out.push_back(f);
  return out;
}

// Shared per-phase state the evaluator closes over.
struct PhaseCounters {
  bool counting_final = false;
  int fresh_in_final = 0;
};

// Cross products of the population design, built once per phase so Gaussian
// marginals reduce to a small normal-equations solve instead of a dense QR
// per mask. Columns are scaled to unit norm to keep the solve conditioned.
struct GramState {
  bool tried = false;
  bool ok = false;
  Eigen::MatrixXd G;        // (s+1) x (s+1) over [1 | scaled columns]
  Eigen::VectorXd b;        // [1 | scaled columns]' y
  Eigen::VectorXd colnorm;  // original column norms, index 0 = intercept
  double yty = 0.0;
};

void build_gram(GramState& g, const std::vector<FeaturePtr>& population,
                ColumnCache& cache, const Eigen::VectorXd& y) {
  g.tried = true;
  const Eigen::Index n = y.size();
  const Eigen::Index s = static_cast<Eigen::Index>(population.size());
  Eigen::MatrixXd A(n, s + 1);
  A.col(0).setOnes();
  for (Eigen::Index i = 0; i < s; ++i)
    A.col(1 + i) = cache.column(population[i]);  // NumericError falls through

  g.colnorm = A.colwise().norm();
  for (Eigen::Index j = 0; j <= s; ++j) {
    if (!(g.colnorm[j] > 0.0) || !std::isfinite(g.colnorm[j])) return;
    A.col(j) /= g.colnorm[j];
  }
  g.G = A.transpose() * A;
  g.b = A.transpose() * y;
  g.yty = y.squaredNorm();
  g.ok = g.G.allFinite() && g.b.allFinite() && std::isfinite(g.yty);
}

// Gaussian log marginal and coefficients for the submodel on `slots`
// (population indices in design order). False on any sign of numerical
// trouble; the caller then takes the dense path.
bool gram_eval(const GramState& g, const std::vector<int>& slots,
               Eigen::Index n, double& lm, Eigen::VectorXd& beta) {
  const int k = static_cast<int>(slots.size());
  if (static_cast<Eigen::Index>(k) + 1 >= n) return false;

  std::vector<int> idx(k + 1);
  idx[0] = 0;
  for (int i = 0; i < k; ++i) idx[1 + i] = 1 + slots[i];

  Eigen::MatrixXd subG(k + 1, k + 1);
  Eigen::VectorXd subb(k + 1);
  for (int r = 0; r < k + 1; ++r) {
    subb[r] = g.b[idx[r]];
    for (int c = 0; c < k + 1; ++c) subG(r, c) = g.G(idx[r], idx[c]);
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(subG);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() < 1e-12 * dmax) return false;

  const Eigen::VectorXd bs = ldlt.solve(subb);
  if (!bs.allFinite()) return false;
  const Eigen::VectorXd gb = subG * bs;
  if ((gb - subb).lpNorm<Eigen::Infinity>() >
      1e-9 * (subb.lpNorm<Eigen::Infinity>() + 1.0))
    return false;

  const double rss = g.yty - 2.0 * bs.dot(subb) + bs.dot(gb);
  if (!(rss > 1e-10 * g.yty)) return false;  // cancellation territory

  lm = -0.5 * static_cast<double>(n) * std::log(rss / static_cast<double>(n));
  beta.resize(k + 1);
  for (int i = 0; i < k + 1; ++i) beta[i] = bs[i] / g.colnorm[idx[i]];
  return std::isfinite(lm) && beta.allFinite();
}

Evaluator make_evaluator(const std::vector<FeaturePtr>& population,
                         ColumnCache& cache, VisitedStore& store,
                         std::unordered_map<std::string, double>& memo,
                         const Eigen::VectorXd& y, const RunSettings& st,
                         PhaseCounters& counters, std::mt19937_64& rng) {
  auto gram = std::make_shared<GramState>();
  return [&population, &cache, &store, &memo, &y, &st, &counters, &rng,
          gram](const Mask& mask) -> double {
    std::string mask_key(mask.begin(), mask.end());
    if (auto it = memo.find(mask_key); it != memo.end()) return it->second;

    double log_target;
    if (mask_count(mask) > st.model_size_cap) {
      log_target = kNegInf;  // over the size cap: zero mass, never recorded
    } else {
      // Members in canonical (sorted key) order, with their population slots.
      std::vector<std::pair<std::string, int>> members;
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) members.emplace_back(population[i]->key(), static_cast<int>(i));
      std::sort(members.begin(), members.end());
      std::vector<FeaturePtr> feats;
      feats.reserve(members.size());
      for (const auto& [k, slot] : members) feats.push_back(population[slot]);

      const std::string key = model_key(feats);
      if (const ModelRecord* rec = store.revisit(key)) {
        log_target = rec->log_prior + rec->log_marginal;
      } else {
        try {
          const Eigen::Index n = y.size();
          bool any_projection = false;
          for (const auto& f : feats) any_projection |= f->contains_projection();

          double lm;
          Eigen::VectorXd beta;
          bool have = false;
          if (st.family.family == Family::Gaussian &&
              !(st.strategy.kind == 4 && any_projection)) {
            if (!gram->tried) {
              try {
                build_gram(*gram, population, cache, y);
              } catch (const NumericError&) {
                // unusable column: every mask takes the dense path
              }
            }
            if (gram->ok) {
              std::vector<int> slots;
              slots.reserve(members.size());
              for (const auto& [k, slot] : members) slots.push_back(slot);
              have = gram_eval(*gram, slots, n, lm, beta);
            }
          }

          if (!have) {
            Eigen::MatrixXd design(n, static_cast<Eigen::Index>(feats.size()) + 1);
            design.col(0).setOnes();
            for (std::size_t i = 0; i < feats.size(); ++i)
              design.col(1 + static_cast<Eigen::Index>(i)) = cache.column(feats[i]);

            FitResult fit;
            if (st.strategy.kind == 4 && any_projection) {
              fit = fit_mle(design, y, st.family);
              auto draw_design = [&](std::mt19937_64& r) {
                Eigen::MatrixXd d(n, design.cols());
                d.col(0).setOnes();
                for (std::size_t i = 0; i < feats.size(); ++i) {
                  FeaturePtr resampled =
                      resample_projection_alphas(feats[i], st.strategy.alpha_sd, r);
                  d.col(1 + static_cast<Eigen::Index>(i)) = resampled->evaluate(cache.X());
                }
                return d;
              };
              lm = mc_marginal(draw_design, y, st.family, st.strategy.mc_draws, rng);
            } else {
              lm = log_marginal(design, y, st.family, &fit);
            }
            beta = std::move(fit.beta);
          }

          const double lp = log_model_prior(feats, st.prior_a);
          const bool fresh = store.record(feats, lm, lp, std::move(beta));
          if (fresh && counters.counting_final) ++counters.fresh_in_final;
          log_target = lp + lm;
        } catch (const NumericError&) {
          log_target = kNegInf;  // unusable model: zero mass, not recorded
        }
      }
    }
    memo.emplace(std::move(mask_key), log_target);
    return log_target;
  };
}

// Incremental orthonormal basis of {intercept, admitted columns}. Gives the
// same span test as is_redundant (tolerance kSpanTol) without a fresh QR per
// candidate; twice-applied Gram-Schmidt keeps the basis orthonormal.
class SpanChecker {
 public:
  SpanChecker(Eigen::Index n, std::size_t capacity) : Q_(n, capacity + 1) {
    add(Eigen::VectorXd::Ones(n));
  }

  bool contains(const Eigen::VectorXd& c) {
    const double cn = c.norm();
    if (!(cn > 0.0) || !std::isfinite(cn)) return true;  // unusable: reject
    return project(c).norm() < kSpanTol * cn;
  }

  void add(const Eigen::VectorXd& c) {
    if (k_ >= Q_.cols()) return;  // capacity guard; extra members only shrink spans
    const Eigen::VectorXd r = project(c);
    const double rn = r.norm();
    if (rn > 1e-12 * (c.norm() + 1.0)) Q_.col(k_++) = r / rn;
  }

 private:
  Eigen::VectorXd project(const Eigen::VectorXd& c) const {
    Eigen::VectorXd r = c;
    for (int pass = 0; pass < 2; ++pass)
      if (k_ > 0) r -= Q_.leftCols(k_) * (Q_.leftCols(k_).transpose() * r);
    return r;
  }

  Eigen::MatrixXd Q_;
  Eigen::Index k_ = 0;
};

// Within-phase inclusion probabilities from the phase memo (mask -> target).
std::vector<double> phase_inclusion(
    const std::unordered_map<std::string, double>& memo, std::size_t s) {
  std::vector<const std::pair<const std::string, double>*> finite;
  for (const auto& entry : memo)
    if (std::isfinite(entry.second)) finite.push_back(&entry);

  std::vector<double> incl(s, 0.0);
  if (finite.empty()) return incl;

  // Deterministic order regardless of hash-map iteration.
  std::sort(finite.begin(), finite.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });
  std::vector<double> values;
  values.reserve(finite.size());
  for (const auto* e : finite) values.push_back(e->second);
  const double lse = log_sum_exp(values);

  for (std::size_t k = 0; k < finite.size(); ++k) {
    const double p = std::exp(values[k] - lse);
    const std::string& mask = finite[k]->first;
    for (std::size_t i = 0; i < s && i < mask.size(); ++i)
      if (mask[i]) incl[i] += p;
  }
  return incl;
}

// Residuals of the highest-posterior model in the finished phase, ranking
// the residual_keep survivors. Empty when the phase saw no usable model.
Eigen::VectorXd best_phase_residuals(
    const std::unordered_map<std::string, double>& memo,
    const std::vector<FeaturePtr>& population, const VisitedStore& store,
    ColumnCache& cache, const Eigen::VectorXd& y, const FamilySpec& spec) {
  const std::string* best_mask = nullptr;
  double best = kNegInf;
  for (const auto& e : memo) {
    if (!std::isfinite(e.second)) continue;
    if (e.second > best ||
        (e.second == best && (best_mask == nullptr || e.first < *best_mask))) {
      best = e.second;
      best_mask = &e.first;
    }
  }
  if (best_mask == nullptr) return {};

  std::vector<FeaturePtr> feats;
  for (std::size_t i = 0; i < best_mask->size() && i < population.size(); ++i)
    if ((*best_mask)[i]) feats.push_back(population[i]);
  std::sort(feats.begin(), feats.end(),
            [](const FeaturePtr& a, const FeaturePtr& b) {
              return a->key() < b->key();
            });
  const ModelRecord* rec = store.find(model_key(feats));
  if (rec == nullptr ||
      rec->beta.size() != static_cast<Eigen::Index>(feats.size()) + 1)
    return {};

  try {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(y.size(), rec->beta[0]);
    for (std::size_t i = 0; i < feats.size(); ++i)
      eta += rec->beta[1 + static_cast<Eigen::Index>(i)] * cache.column(feats[i]);
    if (spec.offset) eta += *spec.offset;

    Eigen::VectorXd mu;
    switch (spec.family) {
      case Family::Gaussian:
        mu = eta;
        break;
      case Family::Bernoulli:
        mu = eta.unaryExpr([](double e) {
          if (e >= 0) return 1.0 / (1.0 + std::exp(-e));
          const double t = std::exp(e);
          return t / (1.0 + t);
        });
        break;
      case Family::Poisson:
        mu = eta.unaryExpr([](double e) { return std::exp(e); });
        break;
    }
    if (!mu.allFinite()) return {};
    return y - mu;
  } catch (const NumericError&) {
    return {};
  }
}

}  // namespace

void ScheduleConfig::validate(int model_size_cap, int max_local_width) const {
  if (population_size < std::min(model_size_cap, max_local_width))
    throw ConfigError("population size must be at least min(Q, L) = " +
                      std::to_string(std::min(model_size_cap, max_local_width)));
  if (generations < 1) throw ConfigError("generation count must be at least 1");
  if (init_steps < 0 || explore_steps < 0 || final_unique < 0 ||
      max_final_steps < 0)
    throw ConfigError("schedule step counts must be non-negative");
  for (double p : {p_projection, p_modification, p_multiplication, p_input})
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError("kind probabilities must lie in [0, 1]");
  const double sum = p_projection + p_modification + p_multiplication + p_input;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("kind probabilities must sum to 1");
  if (p_input == 0.0 && protected_count == 0)
    throw ConfigError(
        "input probability 0 with an empty protected set breaks irreducibility");
  if (!(keep_threshold >= 0.0 && keep_threshold <= 1.0))
    throw ConfigError("keep threshold must lie in [0, 1]");
  if (preselect_count < -1 || preselect_count == 0)
    throw ConfigError("preselect count must be positive (or -1 for min(m, s))");
  if (protected_count < 0)
    throw ConfigError("protected count must be non-negative");
  if (residual_keep < 0)
    throw ConfigError("residual keep count must be non-negative");
  if (!(operand_focus >= 0.0 && operand_focus <= 1.0))
    throw ConfigError("operand focus probability must lie in [0, 1]");
}

void RunSettings::validate() const {
  if (!(prior_a > 0.0 && prior_a < 1.0))
    throw ConfigError("prior penalty a must lie in (0, 1)");
  if (model_size_cap < 1)
    throw ConfigError("model size cap must be at least 1");
  if (lib.size() == 0) throw ConfigError("transform library is empty");
  strategy.validate();
  limits.validate();
  kernel.validate();
  schedule.validate(model_size_cap, limits.max_local_width);
}

Population init_population(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const FamilySpec& spec, const ScheduleConfig& cfg,
                           std::mt19937_64& rng) {
  const int m = static_cast<int>(X.cols());
  if (m < 1) throw ConfigError("data must contain at least one covariate");
  const Eigen::Index n = X.rows();

  std::vector<double> score(m, kNegInf);
  for (int j = 0; j < m; ++j) {
    Eigen::MatrixXd design(n, 2);
    design.col(0).setOnes();
    design.col(1) = X.col(j);
    try {
      score[j] = log_marginal(design, y, spec);
    } catch (const NumericError&) {
      // constant or otherwise unusable covariate: ranked last
    }
  }

  std::vector<int> ranked(m);
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](int a, int b) { return score[a] > score[b]; });

  const int s = cfg.population_size;
  const int q0 = cfg.preselect_count < 0 ? std::min(m, s)
                                         : std::min(cfg.preselect_count, m);

  ColumnCache cache(X);
  Population pop;
  std::vector<int> leftover;
  for (int r = 0; r < m; ++r) {
    const int j = ranked[r];
    if (static_cast<int>(pop.features.size()) < q0) {
      FeaturePtr f = Feature::input(j + 1);
      if (!is_redundant(f, pop.features, cache)) pop.features.push_back(f);
    } else {
      leftover.push_back(j);
    }
  }

  // Pad with remaining covariates in random order up to s.
  for (std::size_t i = leftover.size(); i > 1; --i)
    std::swap(leftover[i - 1],
              leftover[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
  for (int j : leftover) {
    if (static_cast<int>(pop.features.size()) >= s) break;
    FeaturePtr f = Feature::input(j + 1);
    if (!is_redundant(f, pop.features, cache)) pop.features.push_back(f);
  }

  const int n_protected =
      std::min<int>(cfg.protected_count, static_cast<int>(pop.features.size()));
  pop.protected_features.assign(pop.features.begin(),
                                pop.features.begin() + n_protected);
  return pop;
}

Population evolve_population(const Population& pop,
                             const std::vector<double>& inclusion,
                             const std::vector<FeaturePtr>& originals,
                             const RunSettings& settings, ColumnCache& cache,
                             const Eigen::VectorXd& y, std::mt19937_64& rng,
                             const Eigen::VectorXd* best_residuals) {
  const ScheduleConfig& cfg = settings.schedule;
  const std::size_t s_now = pop.features.size();
  if (inclusion.size() != s_now)
    throw ConfigError("inclusion vector does not match population size");
  const std::size_t s_target =
      std::max<std::size_t>(cfg.population_size, s_now);

  std::unordered_set<std::string> protected_keys;
  for (const auto& f : pop.protected_features) protected_keys.insert(f->key());

  // Survivors: inclusion above threshold, the ceil(s/4) best regardless,
  // and the protected subset.
  std::vector<std::size_t> order(s_now);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inclusion[a] > inclusion[b];
  });
  std::vector<bool> keep(s_now, false);
  const std::size_t floor_keep =
      std::min(s_now, (s_now + 3) / 4);  // ceil(s/4), at most s
  for (std::size_t r = 0; r < floor_keep; ++r) keep[order[r]] = true;
  for (std::size_t i = 0; i < s_now; ++i) {
    if (inclusion[i] >= cfg.keep_threshold) keep[i] = true;
    if (protected_keys.count(pop.features[i]->key())) keep[i] = true;
  }

  // Additional survivors by residual relevance: members the best model does
  // not explain yet, typically half-built interactions awaiting a partner.
  if (cfg.residual_keep > 0 && best_residuals != nullptr &&
      best_residuals->size() == y.size() && y.size() > 1) {
    Eigen::VectorXd r = *best_residuals;
    r.array() -= r.mean();
    const double rn = r.norm();
    if (rn > 0.0 && std::isfinite(rn)) {
      std::vector<double> score(s_now, -1.0);
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < s_now; ++i) {
        if (keep[i]) continue;
        rest.push_back(i);
        try {
          Eigen::VectorXd c = cache.column(pop.features[i]);
          c.array() -= c.mean();
          const double cn = c.norm();
          if (cn > 0.0 && std::isfinite(cn))
            score[i] = std::abs(r.dot(c)) / (rn * cn);
        } catch (const NumericError&) {
          // unusable column: never sheltered
        }
      }
      std::stable_sort(rest.begin(), rest.end(),
                       [&](std::size_t a, std::size_t b) {
                         return score[a] > score[b];
                       });
      int granted = 0;
      for (std::size_t i : rest) {
        if (granted >= cfg.residual_keep || !(score[i] > 0.0)) break;
        keep[i] = true;
        ++granted;
      }
    }
  }

  Population next;
  next.protected_features = pop.protected_features;
  std::vector<std::size_t> dropped;
  for (std::size_t i = 0; i < s_now; ++i) {
    if (keep[i])
      next.features.push_back(pop.features[i]);
    else
      dropped.push_back(i);
  }
  std::stable_sort(dropped.begin(), dropped.end(), [&](std::size_t a, std::size_t b) {
    return inclusion[a] > inclusion[b];
  });

  // Replacements must stay linearly independent of the growing population;
  // the incremental basis answers that like is_redundant does, without a
  // fresh QR per candidate.
  SpanChecker span(y.size(), s_target + next.features.size() + 1);
  std::unordered_set<std::string> next_keys;
  bool span_ok = true;
  for (const auto& f : next.features) {
    next_keys.insert(f->key());
    try {
      span.add(cache.column(f));
    } catch (const NumericError&) {
      span_ok = false;  // survivor column broke: fall back to is_redundant
    }
  }
  auto admit = [&](const FeaturePtr& f) {
    if (next_keys.count(f->key())) return false;
    if (!span_ok) return !is_redundant(f, next.features, cache);
    Eigen::VectorXd c;
    try {
      c = cache.column(f);
    } catch (const NumericError&) {
      return false;
    }
    if (span.contains(c)) return false;
    span.add(c);
    return true;
  };
  auto push = [&](FeaturePtr f) {
    next_keys.insert(f->key());
    next.features.push_back(std::move(f));
  };

  // Operands for new interactions favour the survivor set: combinations of
  // members already carrying signal are where deeper structure hides.
  std::vector<FeaturePtr> focus;
  if (cfg.operand_focus > 0.0)
    for (std::size_t i = 0; i < s_now; ++i)
      if (keep[i]) focus.push_back(pop.features[i]);
  const OperandBias bias{focus.empty() ? nullptr : &focus, cfg.operand_focus};

  const std::vector<FeaturePtr> pool = dedup_by_key(pop.features, originals);
  std::discrete_distribution<int> kind_dist(
      {cfg.p_projection, cfg.p_modification, cfg.p_multiplication, cfg.p_input});
  constexpr GenKind kKinds[] = {GenKind::Projection, GenKind::Modification,
                                GenKind::Multiplication, GenKind::Input};

  std::size_t reinstated = 0;
  while (next.features.size() < s_target) {
    bool filled = false;
    for (int attempt = 0; attempt < 100 && !filled; ++attempt) {
      const GenKind kind = kKinds[kind_dist(rng)];
      try {
        FeaturePtr cand =
            generate_feature(kind, pool, originals, settings.lib,
                             settings.strategy, settings.limits, cache, y,
                             settings.family, rng, bias);
        if (admit(cand)) {
          push(std::move(cand));
          filled = true;
        }
      } catch (const GenerationError&) {
        // redraw
      }
    }

    if (!filled) {
      // Fall back to an unused original covariate, in random order.
      std::vector<std::size_t> idx(originals.size());
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1],
                  idx[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
      for (std::size_t i : idx) {
        if (admit(originals[i])) {
          push(originals[i]);
          filled = true;
          break;
        }
      }
    }

    if (!filled) {
      // Reinstate the best dropped member so the population keeps its size.
      while (reinstated < dropped.size() && !filled) {
        const FeaturePtr& back = pop.features[dropped[reinstated++]];
        if (admit(back)) {
          push(back);
          filled = true;
        }
      }
    }

    if (!filled) break;  // feature space exhausted below s; proceed smaller
  }
  return next;
}

RunSummary run_chain(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const RunSettings& settings, std::uint64_t seed,
                     std::ostream* log) {
  settings.validate();
  settings.family.validate(y.size());
  if (X.rows() != y.size())
    throw ConfigError("design rows do not match response length");

  RunSummary out;
  out.seed = seed;
  out.store = std::make_shared<VisitedStore>();

  try {
    std::mt19937_64 rng(seed);
    ColumnCache cache(X);

    std::vector<FeaturePtr> originals;
    for (int j = 1; j <= X.cols(); ++j) originals.push_back(Feature::input(j));

    Population pop = init_population(X, y, settings.family, settings.schedule, rng);

    std::unordered_map<std::string, double> memo;
    PhaseCounters counters;
    std::vector<std::string> carried_keys;  // current model across phases

    const int T = settings.schedule.generations;
    for (int t = 0; t < T; ++t) {
      if (t > 0) {
        const std::vector<double> incl =
            phase_inclusion(memo, pop.features.size());
        Eigen::VectorXd resid;
        const Eigen::VectorXd* resid_ptr = nullptr;
        if (settings.schedule.residual_keep > 0) {
          resid = best_phase_residuals(memo, pop.features, *out.store, cache, y,
                                       settings.family);
          if (resid.size() == y.size()) resid_ptr = &resid;
        }
        pop = evolve_population(pop, incl, originals, settings, cache, y, rng,
                                resid_ptr);
      }
      memo.clear();
      counters.counting_final = false;

      Evaluator evaluate = make_evaluator(pop.features, cache, *out.store, memo,
                                          y, settings, counters, rng);

      Mask cur(pop.features.size(), 0);
      for (std::size_t i = 0; i < pop.features.size(); ++i)
        for (const auto& k : carried_keys)
          if (pop.features[i]->key() == k) cur[i] = 1;
      ChainState state{std::move(cur), 0.0};
      state.log_target = evaluate(state.current);

      const int steps =
          t == 0 ? settings.schedule.init_steps : settings.schedule.explore_steps;
      for (int k = 0; k < steps; ++k)
        mjmcmc_step(state, settings.kernel, settings.model_size_cap, evaluate, rng);

      if (t == T - 1) {
        counters.counting_final = true;
        counters.fresh_in_final = 0;
        const long guard =
            settings.schedule.max_final_steps > 0
                ? settings.schedule.max_final_steps
                : 50L * settings.schedule.final_unique + 10000;
        for (long k = 0;
             counters.fresh_in_final < settings.schedule.final_unique && k < guard;
             ++k)
          mjmcmc_step(state, settings.kernel, settings.model_size_cap, evaluate, rng);
      }

      carried_keys.clear();
      for (std::size_t i = 0; i < state.current.size(); ++i)
        if (state.current[i]) carried_keys.push_back(pop.features[i]->key());

      if (log) {
        double best = kNegInf;
        for (const auto& e : memo) best = std::max(best, e.second);
        *log << "phase " << t << ": store=" << out.store->size()
             << " best_log_posterior=" << best << " population=[";
        for (std::size_t i = 0; i < pop.features.size(); ++i)
          *log << (i ? ", " : "") << pop.features[i]->key();
        *log << "]\n";
      }
    }
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
  }

  out.model_count = static_cast<int>(out.store->size());
  out.log_mass = out.store->log_mass();
  if (!out.store->empty()) {
    out.feature_posteriors = out.store->inclusion_probabilities();
    out.model_posteriors = out.store->posterior();
  }
  return out;
}

}  // namespace bgnlm
