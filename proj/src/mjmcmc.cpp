#include "bgnlm/mjmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bgnlm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace

int mask_count(const Mask& m) {
  int c = 0;
  for (char b : m) c += (b != 0);
  return c;
}

void KernelConfig::validate() const {
  if (!(large_jump_flip_prob >= 0.0 && large_jump_flip_prob <= 1.0))
    throw ConfigError("large jump flip probability must lie in [0, 1]");
  if (!(randomize_flip_prob > 0.0 && randomize_flip_prob < 0.5))
    throw ConfigError("randomize flip probability must lie in (0, 0.5)");
  if (local_steps < 0)
    throw ConfigError("local step count must be non-negative");
  if (!(mode_jump_prob >= 0.0 && mode_jump_prob <= 1.0))
    throw ConfigError("mode jump probability must lie in [0, 1]");
}

Mask large_jump(const Mask& m, const KernelConfig& cfg, int size_cap,
                std::mt19937_64& rng) {
  Mask out = m;
  for (auto& b : out)
    if (uniform01(rng) < cfg.large_jump_flip_prob) b = !b;

  int excess = mask_count(out) - size_cap;
  while (excess > 0) {
    // Drop a uniformly random included feature.
    int target = std::uniform_int_distribution<int>(0, mask_count(out) - 1)(rng);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!out[i]) continue;
      if (target-- == 0) {
        out[i] = 0;
        break;
      }
    }
    --excess;
  }
  return out;
}

Mask local_optimize(const Mask& m0, const KernelConfig& cfg,
                    const Evaluator& evaluate, std::mt19937_64& rng) {
  Mask cur = m0;
  if (cfg.local_steps == 0 || cur.empty()) return cur;
  double cur_value = evaluate(cur);

  if (cfg.local_method == KernelConfig::LocalMethod::Greedy) {
    for (int step = 0; step < cfg.local_steps; ++step) {
      int best_flip = -1;
      double best_value = cur_value;
      for (std::size_t i = 0; i < cur.size(); ++i) {
        cur[i] = !cur[i];
        const double v = evaluate(cur);
        cur[i] = !cur[i];
        if (v > best_value) {
          best_value = v;
          best_flip = static_cast<int>(i);
        }
      }
      if (best_flip < 0) break;
      cur[best_flip] = !cur[best_flip];
      cur_value = best_value;
    }
    return cur;
  }

  // Simulated annealing: single random flips on a geometric ladder from
  // T=1 down to T=0.01 across local_steps moves.
  const double t_hi = 1.0, t_lo = 0.01;
  const double decay = cfg.local_steps > 1
                           ? std::pow(t_lo / t_hi, 1.0 / (cfg.local_steps - 1))
                           : 1.0;
  double temp = t_hi;
  for (int step = 0; step < cfg.local_steps; ++step, temp *= decay) {
    const int i =
        std::uniform_int_distribution<int>(0, static_cast<int>(cur.size()) - 1)(rng);
    cur[i] = !cur[i];
    const double v = evaluate(cur);
    const double delta = v - cur_value;
    if (delta >= 0 || uniform01(rng) < std::exp(delta / temp)) {
      cur_value = v;
    } else {
      cur[i] = !cur[i];
    }
  }
  return cur;
}

Mask randomize(const Mask& m1, const KernelConfig& cfg, std::mt19937_64& rng) {
  Mask out = m1;
  for (auto& b : out)
    if (uniform01(rng) < cfg.randomize_flip_prob) b = !b;
  return out;
}

double log_randomize_density(const Mask& from, const Mask& to, double flip_prob) {
  if (from.size() != to.size())
    throw ConfigError("mask sizes differ in randomize density");
  int h = 0;
  for (std::size_t i = 0; i < from.size(); ++i) h += (from[i] != to[i]);
  const int s = static_cast<int>(from.size());
  return h * std::log(flip_prob) + (s - h) * std::log1p(-flip_prob);
}

void mjmcmc_step(ChainState& state, const KernelConfig& cfg, int size_cap,
                 const Evaluator& evaluate, std::mt19937_64& rng) {
  cfg.validate();
  if (state.current.empty()) return;

  if (uniform01(rng) >= cfg.mode_jump_prob) {
    // Plain single-flip Metropolis (symmetric proposal).
    const int i = std::uniform_int_distribution<int>(
        0, static_cast<int>(state.current.size()) - 1)(rng);
    Mask proposal = state.current;
    proposal[i] = !proposal[i];
    const double value = evaluate(proposal);
    const double log_ratio = value - state.log_target;
    if (log_ratio >= 0 || uniform01(rng) < std::exp(log_ratio)) {
      state.current = std::move(proposal);
      state.log_target = value;
    }
    return;
  }

  // Mode jump: large jump, local optimization, randomization; backward
  // auxiliaries are drawn independently from the proposal.
  const Mask jump_fwd = large_jump(state.current, cfg, size_cap, rng);
  const Mask mode_fwd = local_optimize(jump_fwd, cfg, evaluate, rng);
  const Mask proposal = randomize(mode_fwd, cfg, rng);
  const double value = evaluate(proposal);

  const Mask jump_bwd = large_jump(proposal, cfg, size_cap, rng);
  const Mask mode_bwd = local_optimize(jump_bwd, cfg, evaluate, rng);

  if (value == kNegInf) return;  // zero-mass proposal is never accepted

  const double log_ratio =
      (value + log_randomize_density(mode_bwd, state.current, cfg.randomize_flip_prob)) -
      (state.log_target +
       log_randomize_density(mode_fwd, proposal, cfg.randomize_flip_prob));
  if (log_ratio >= 0 || uniform01(rng) < std::exp(log_ratio)) {
    state.current = proposal;
    state.log_target = value;
  }
}

}  // namespace bgnlm
