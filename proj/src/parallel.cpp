#include "bgnlm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "bgnlm/numerics.hpp"

namespace bgnlm {

std::vector<RunSummary> run_parallel(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y,
                                     const RunSettings& settings, int chains,
                                     std::uint64_t base_seed,
                                     std::ostream* log) {
  if (chains < 1) throw ConfigError("chain count must be at least 1");
  settings.validate();

  std::vector<RunSummary> summaries(chains);
  std::vector<std::ostringstream> chain_logs(chains);
  std::vector<std::thread> workers;
  workers.reserve(chains);

  for (int b = 0; b < chains; ++b) {
    workers.emplace_back([&, b]() {
      try {
        summaries[b] = run_chain(X, y, settings, base_seed + b,
                                 log ? &chain_logs[b] : nullptr);
      } catch (const std::exception& e) {
        summaries[b].seed = base_seed + b;
        summaries[b].failed = true;
        summaries[b].error = e.what();
      }
    });
  }
  for (auto& w : workers) w.join();

  if (log) {
    for (int b = 0; b < chains; ++b) {
      *log << "chain " << b << " (seed " << base_seed + b << ")";
      if (summaries[b].failed)
        *log << " FAILED: " << summaries[b].error;
      *log << "\n" << chain_logs[b].str();
    }
  }
  return summaries;
}

AggregateResult aggregate(const std::vector<RunSummary>& summaries,
                          AggregationMode mode) {
  if (summaries.empty())
    throw ConfigError("nothing to aggregate");

  std::vector<std::size_t> ok;
  for (std::size_t b = 0; b < summaries.size(); ++b)
    if (!summaries[b].failed && summaries[b].model_count > 0) ok.push_back(b);
  if (ok.empty()) throw Error("all chains failed; nothing to aggregate");

  AggregateResult out;
  out.weights.assign(summaries.size(), 0.0);
  if (mode == AggregationMode::Uniform) {
    for (std::size_t b : ok) out.weights[b] = 1.0 / static_cast<double>(ok.size());
  } else {
    std::vector<double> masses;
    masses.reserve(ok.size());
    for (std::size_t b : ok) masses.push_back(summaries[b].log_mass);
    const double lse = log_sum_exp(masses);
    for (std::size_t i = 0; i < ok.size(); ++i)
      out.weights[ok[i]] = std::exp(masses[i] - lse);
  }

  for (std::size_t b : ok) {
    const double u = out.weights[b];
    for (const auto& [key, p] : summaries[b].feature_posteriors)
      out.feature_posteriors[key] += u * p;
    for (const auto& [key, p] : summaries[b].model_posteriors)
      out.model_posteriors[key] += u * p;
  }

  for (const auto& [key, merged] : out.feature_posteriors) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t b : ok) {
      const auto it = summaries[b].feature_posteriors.find(key);
      const double p =
          it == summaries[b].feature_posteriors.end() ? 0.0 : it->second;
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    out.feature_range.emplace(key, std::make_pair(lo, hi));
  }
  return out;
}

}  // namespace bgnlm
