#pragma once

#include <functional>
#include <random>
#include <vector>

#include "bgnlm/errors.hpp"

namespace bgnlm {

// Inclusion mask over the s features of the current search space.
using Mask = std::vector<char>;

int mask_count(const Mask& m);

// Log target evaluator: log prior + log marginal for the masked model,
// -inf for models with zero mass (e.g. over the size cap). Implementations
// cache so repeated evaluation is cheap and side effects happen once.
using Evaluator = std::function<double(const Mask&)>;

struct KernelConfig {
  double large_jump_flip_prob = 0.35;
  int local_steps = 20;
  enum class LocalMethod { Greedy, SimulatedAnnealing };
  LocalMethod local_method = LocalMethod::Greedy;
  double randomize_flip_prob = 0.05;
  // Share of steps that are full mode jumps; the rest are single-flip
  // Metropolis moves.
  double mode_jump_prob = 0.3;

  void validate() const;
};

struct ChainState {
  Mask current;
  double log_target = 0.0;
};

// Step 1: flip every bit independently with large_jump_flip_prob, then
// drop random features until the model respects the size cap.
Mask large_jump(const Mask& m, const KernelConfig& cfg, int size_cap,
                std::mt19937_64& rng);

// Step 2: greedy hill climbing over single-bit flips (ties to the lowest
// index, stop on no improvement) or simulated annealing with a geometric
// temperature ladder; at most local_steps moves either way.
Mask local_optimize(const Mask& m0, const KernelConfig& cfg,
                    const Evaluator& evaluate, std::mt19937_64& rng);

// Step 3: independent bit flips with randomize_flip_prob.
Mask randomize(const Mask& m1, const KernelConfig& cfg, std::mt19937_64& rng);

// Log density of randomize moving from `from` to `to`: symmetric in the
// pair, h*log(p) + (s-h)*log(1-p) at Hamming distance h.
double log_randomize_density(const Mask& from, const Mask& to, double flip_prob);

// One Metropolis-Hastings step: a single-flip move with probability
// 1 - mode_jump_prob, otherwise the full mode jump with independently
// drawn backward auxiliaries. Mutates state in place.
void mjmcmc_step(ChainState& state, const KernelConfig& cfg, int size_cap,
                 const Evaluator& evaluate, std::mt19937_64& rng);

}  // namespace bgnlm
