// Command line interface: fit, predict, count-features, experiment.
//
// Every option can also come from a flat key=value config file passed via
// --config; command-line flags win over file values. BGNLM_THREADS, when
// set, overrides the chain count regardless of flags.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numerical failure, 1 anything else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bgnlm/data_io.hpp"
#include "bgnlm/experiments.hpp"
#include "bgnlm/feature_count.hpp"
#include "bgnlm/parallel.hpp"
#include "bgnlm/predictor.hpp"

#ifndef BGNLM_GIT_HASH
#define BGNLM_GIT_HASH "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------
// shared option bundles

struct SearchOptions {
  std::string family = "auto";
  std::string transforms = "g1";
  std::string prior_a = "aic";
  int depth = 5;
  int local_width = 20;
  int model_size = 20;
  int strategy = 1;
  double alpha_sd = 1.0;
  int mc_draws = 100;

  int population_size = 20;
  int generations = 10;
  int init_steps = 300;
  int explore_steps = 250;
  int final_unique = 2000;
  int max_final_steps = 0;
  double p_projection = 0.1;
  double p_modification = 0.3;
  double p_multiplication = 0.4;
  double p_input = 0.2;
  double keep_threshold = 0.5;
  int preselect_count = -1;
  int protected_count = 3;

  double large_jump_flip = 0.35;
  int local_steps = 20;
  std::string local_method = "greedy";
  double randomize_flip = 0.05;
  double mode_jump_prob = 0.3;
};

void add_search_options(CLI::App* cmd, SearchOptions& o) {
  cmd->add_option("--family", o.family,
                  "auto|gaussian|bernoulli|poisson (auto infers from the response)");
  cmd->add_option("--transforms", o.transforms,
                  "Preset name (g1, g2, classification, regression) or comma list");
  cmd->add_option("--prior-a", o.prior_a,
                  "Complexity penalty a in (0,1): number, 'aic' (e^-2) or 'bic' (e^-2 log n)");
  cmd->add_option("--depth", o.depth, "Maximum feature depth D");
  cmd->add_option("--local-width", o.local_width, "Maximum projection width L");
  cmd->add_option("--model-size", o.model_size, "Maximum model size Q");
  cmd->add_option("--strategy", o.strategy, "Alpha strategy 1|2|3|4")
      ->check(CLI::Range(1, 4));
  cmd->add_option("--alpha-sd", o.alpha_sd, "Alpha prior sd (strategy 4)");
  cmd->add_option("--mc-draws", o.mc_draws, "Monte Carlo draws (strategy 4)");

  cmd->add_option("--population-size", o.population_size, "Population size s");
  cmd->add_option("--generations", o.generations, "Number of populations T");
  cmd->add_option("--init-steps", o.init_steps, "Kernel steps in the first phase");
  cmd->add_option("--explore-steps", o.explore_steps, "Kernel steps per later phase");
  cmd->add_option("--final-unique", o.final_unique,
                  "Fresh models collected in the final phase");
  cmd->add_option("--max-final-steps", o.max_final_steps,
                  "Hard cap on final-phase steps (0 = automatic)");
  cmd->add_option("--p-projection", o.p_projection, "Replacement probability: projection");
  cmd->add_option("--p-modification", o.p_modification, "Replacement probability: modification");
  cmd->add_option("--p-multiplication", o.p_multiplication, "Replacement probability: multiplication");
  cmd->add_option("--p-input", o.p_input, "Replacement probability: input");
  cmd->add_option("--keep-threshold", o.keep_threshold,
                  "Inclusion probability required to survive evolution");
  cmd->add_option("--preselect-count", o.preselect_count,
                  "Covariates ranked into the initial population (-1 = all)");
  cmd->add_option("--protected-count", o.protected_count,
                  "Initial covariates protected from replacement");

  cmd->add_option("--large-jump-flip", o.large_jump_flip, "Large-jump flip probability");
  cmd->add_option("--local-steps", o.local_steps, "Local optimization steps");
  cmd->add_option("--local-method", o.local_method, "greedy|sa")
      ->check(CLI::IsMember({"greedy", "sa"}));
  cmd->add_option("--randomize-flip", o.randomize_flip,
                  "Randomization flip probability (0, 0.5)");
  cmd->add_option("--mode-jump-prob", o.mode_jump_prob,
                  "Probability of a mode-jump proposal");
}

bgnlm::TransformLibrary make_library(const std::string& spec) {
  if (spec.find(',') == std::string::npos) {
    try {
      return bgnlm::TransformLibrary::preset(spec);
    } catch (const bgnlm::ConfigError&) {
      return bgnlm::TransformLibrary::from_names({spec});
    }
  }
  std::vector<std::string> names;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) names.push_back(item);
  }
  return bgnlm::TransformLibrary::from_names(names);
}

double parse_prior_a(const std::string& text, Eigen::Index n) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos == text.size()) return v;
  } catch (const std::exception&) {
  }
  return bgnlm::prior_a_by_name(text, n);
}

bgnlm::RunSettings build_settings(const SearchOptions& o, bgnlm::Family family,
                                  Eigen::Index n) {
  bgnlm::RunSettings st;
  st.family.family = family;
  st.lib = make_library(o.transforms);
  st.strategy.kind = o.strategy;
  st.strategy.alpha_sd = o.alpha_sd;
  st.strategy.mc_draws = o.mc_draws;
  st.limits.max_depth = o.depth;
  st.limits.max_local_width = o.local_width;
  st.model_size_cap = o.model_size;
  st.prior_a = parse_prior_a(o.prior_a, n);

  st.kernel.large_jump_flip_prob = o.large_jump_flip;
  st.kernel.local_steps = o.local_steps;
  st.kernel.local_method = o.local_method == "sa"
                               ? bgnlm::KernelConfig::LocalMethod::SimulatedAnnealing
                               : bgnlm::KernelConfig::LocalMethod::Greedy;
  st.kernel.randomize_flip_prob = o.randomize_flip;
  st.kernel.mode_jump_prob = o.mode_jump_prob;

  st.schedule.population_size = o.population_size;
  st.schedule.generations = o.generations;
  st.schedule.init_steps = o.init_steps;
  st.schedule.explore_steps = o.explore_steps;
  st.schedule.final_unique = o.final_unique;
  st.schedule.max_final_steps = o.max_final_steps;
  st.schedule.p_projection = o.p_projection;
  st.schedule.p_modification = o.p_modification;
  st.schedule.p_multiplication = o.p_multiplication;
  st.schedule.p_input = o.p_input;
  st.schedule.keep_threshold = o.keep_threshold;
  st.schedule.preselect_count = o.preselect_count;
  st.schedule.protected_count = o.protected_count;
  return st;
}

bgnlm::Family resolve_family(const std::string& name, bgnlm::Family hint) {
  if (name == "auto") return hint;
  return bgnlm::family_by_name(name);
}

int env_chain_override(int chains) {
  const char* env = std::getenv("BGNLM_THREADS");
  if (!env || !*env) return chains;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(env, &pos);
    if (pos == std::string(env).size() && v >= 1) return v;
  } catch (const std::exception&) {
  }
  throw bgnlm::ConfigError("BGNLM_THREADS must be a positive integer, got '" +
                           std::string(env) + "'");
}

// ---------------------------------------------------------------------
// small IO helpers

std::string timestamp_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
#ifdef _WIN32
  localtime_s(&tm, &t);
#else
  localtime_r(&t, &tm);
#endif
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path make_run_dir(const std::string& out_root, std::uint64_t seed) {
  const std::string stem = "run_" + timestamp_now() + "_" + std::to_string(seed);
  fs::path dir = fs::path(out_root) / stem;
  for (int k = 2; fs::exists(dir); ++k)
    dir = fs::path(out_root) / (stem + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_beta(const Eigen::VectorXd& beta) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    if (i) os << ' ';
    os << beta[i];
  }
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

int max_input_index(const bgnlm::FeaturePtr& f) {
  if (f->kind() == bgnlm::FeatureKind::Input) return f->input_index();
  int best = 0;
  for (const auto& c : f->children()) best = std::max(best, max_input_index(c));
  return best;
}

// ---------------------------------------------------------------------
// fit

struct FitOptions {
  std::string data_path;
  std::string response;
  std::vector<std::string> categorical;
  std::string offset_column;
  std::string synthetic;
  int synthetic_n = 1000;
  double synthetic_noise = 1.0;
  bool synthetic_relative_noise = false;
  std::uint64_t synthetic_seed = 1;

  SearchOptions search;
  int chains = 1;
  std::uint64_t seed = 1;
  std::string aggregation = "mass";
  std::string out_root = ".";
  bool standardize = false;
  bool quiet = false;
};

struct Standardization {
  std::vector<double> mean, sd;
};

Standardization standardize_columns(Eigen::MatrixXd& X) {
  Standardization s;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    const double var =
        (X.col(j).array() - mean).square().sum() / std::max<double>(1, X.rows() - 1);
    const double sd = std::sqrt(var);
    s.mean.push_back(mean);
    s.sd.push_back(sd);
    if (sd > 0) X.col(j) = (X.col(j).array() - mean) / sd;
  }
  return s;
}

void echo_config(std::ostream& os, const FitOptions& o, int chains,
                 double prior_a_value, const std::string& family) {
  os << "command = fit\n";
  if (!o.data_path.empty()) os << "data = " << o.data_path << "\n";
  if (!o.response.empty()) os << "response = " << o.response << "\n";
  for (const auto& c : o.categorical) os << "categorical = " << c << "\n";
  if (!o.offset_column.empty()) os << "offset-column = " << o.offset_column << "\n";
  if (!o.synthetic.empty()) {
    os << "synthetic = " << o.synthetic << "\n";
    os << "n = " << o.synthetic_n << "\n";
    os << "noise = " << o.synthetic_noise << "\n";
    os << "relative-noise = " << (o.synthetic_relative_noise ? 1 : 0) << "\n";
    os << "data-seed = " << o.synthetic_seed << "\n";
  }
  os << "family = " << family << "\n";
  os << "transforms = " << o.search.transforms << "\n";
  os << "prior-a = " << o.search.prior_a << "\n";
  os << "prior-a-value = " << fmt(prior_a_value) << "\n";
  os << "depth = " << o.search.depth << "\n";
  os << "local-width = " << o.search.local_width << "\n";
  os << "model-size = " << o.search.model_size << "\n";
  os << "strategy = " << o.search.strategy << "\n";
  os << "alpha-sd = " << fmt(o.search.alpha_sd) << "\n";
  os << "mc-draws = " << o.search.mc_draws << "\n";
  os << "population-size = " << o.search.population_size << "\n";
  os << "generations = " << o.search.generations << "\n";
  os << "init-steps = " << o.search.init_steps << "\n";
  os << "explore-steps = " << o.search.explore_steps << "\n";
  os << "final-unique = " << o.search.final_unique << "\n";
  os << "max-final-steps = " << o.search.max_final_steps << "\n";
  os << "p-projection = " << fmt(o.search.p_projection) << "\n";
  os << "p-modification = " << fmt(o.search.p_modification) << "\n";
  os << "p-multiplication = " << fmt(o.search.p_multiplication) << "\n";
  os << "p-input = " << fmt(o.search.p_input) << "\n";
  os << "keep-threshold = " << fmt(o.search.keep_threshold) << "\n";
  os << "preselect-count = " << o.search.preselect_count << "\n";
  os << "protected-count = " << o.search.protected_count << "\n";
  os << "large-jump-flip = " << fmt(o.search.large_jump_flip) << "\n";
  os << "local-steps = " << o.search.local_steps << "\n";
  os << "local-method = " << o.search.local_method << "\n";
  os << "randomize-flip = " << fmt(o.search.randomize_flip) << "\n";
  os << "mode-jump-prob = " << fmt(o.search.mode_jump_prob) << "\n";
  os << "chains = " << chains << "\n";
  os << "seed = " << o.seed << "\n";
  os << "aggregation = " << o.aggregation << "\n";
  os << "standardize = " << (o.standardize ? 1 : 0) << "\n";
}

void write_dataset_csv(const fs::path& path, const bgnlm::Dataset& d) {
  std::ofstream os(path);
  for (const auto& name : d.column_names) os << name << ",";
  os << (d.response_name.empty() ? "y" : d.response_name) << "\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) os << d.X(i, j) << ",";
    os << d.y[i] << "\n";
  }
}

int cmd_fit(const FitOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const int chains = env_chain_override(opt.chains);
  if (chains < 1) throw bgnlm::ConfigError("chain count must be at least 1");

  if (opt.data_path.empty() == opt.synthetic.empty())
    throw bgnlm::ConfigError("provide exactly one of --data or --synthetic");

  bgnlm::Dataset data;
  std::vector<std::vector<std::string>> truth_classes;
  if (!opt.synthetic.empty()) {
    bgnlm::SyntheticSpec spec;
    spec.generator = opt.synthetic;
    spec.n = opt.synthetic_n;
    spec.noise_sd = opt.synthetic_noise;
    spec.relative_noise = opt.synthetic_relative_noise;
    spec.seed = opt.synthetic_seed;
    bgnlm::SyntheticData synth = bgnlm::gen_synthetic(spec);
    data = std::move(synth.data);
    truth_classes = std::move(synth.truth_classes);
  } else {
    if (opt.response.empty())
      throw bgnlm::ConfigError("--response is required with --data");
    data = bgnlm::load_csv(opt.data_path, opt.response, opt.categorical);
  }

  bgnlm::FamilySpec fam;
  fam.family = resolve_family(opt.search.family, data.family_hint);
  if (!opt.offset_column.empty()) {
    const auto it = std::find(data.column_names.begin(), data.column_names.end(),
                              opt.offset_column);
    if (it == data.column_names.end())
      throw bgnlm::DataError("offset column '" + opt.offset_column + "' not found");
    const Eigen::Index idx = it - data.column_names.begin();
    fam.offset = data.X.col(idx);
    Eigen::MatrixXd X2(data.X.rows(), data.X.cols() - 1);
    X2 << data.X.leftCols(idx), data.X.rightCols(data.X.cols() - idx - 1);
    data.X = std::move(X2);
    data.column_names.erase(it);
  }

  Standardization scaling;
  if (opt.standardize) scaling = standardize_columns(data.X);

  bgnlm::RunSettings settings = build_settings(opt.search, fam.family, data.y.size());
  settings.family = fam;
  settings.validate();

  const fs::path dir = make_run_dir(opt.out_root, opt.seed);
  std::ofstream log(dir / "log.txt");
  log << "bgnlm fit (git " << BGNLM_GIT_HASH << ")\n";
  log << "started " << timestamp_now() << "\n";
  log << "data: " << data.X.rows() << " rows, " << data.X.cols()
      << " covariates, " << data.dropped_rows << " dropped\n";
  log << "family: " << bgnlm::family_name(fam.family) << "\n";
  log << "chains: " << chains << " seed: " << opt.seed << "\n";
  for (std::size_t j = 0; j < data.column_names.size(); ++j)
    log << "column x" << (j + 1) << " = " << data.column_names[j] << "\n";
  if (!truth_classes.empty()) {
    for (const auto& cls : truth_classes) {
      log << "truth class:";
      for (const auto& key : cls) log << " " << key;
      log << "\n";
    }
  }
  log.flush();

  {
    std::ofstream cfg(dir / "config.echo");
    echo_config(cfg, opt, chains, settings.prior_a,
                bgnlm::family_name(fam.family));
  }
  if (!opt.synthetic.empty()) write_dataset_csv(dir / "data.csv", data);
  if (opt.standardize) {
    std::ofstream sc(dir / "scaling.csv");
    sc << "column,mean,sd\n" << std::setprecision(17);
    for (std::size_t j = 0; j < data.column_names.size(); ++j)
      sc << data.column_names[j] << "," << scaling.mean[j] << ","
         << scaling.sd[j] << "\n";
  }
  {
    std::ofstream cols(dir / "columns.csv");
    cols << "index,name\n";
    for (std::size_t j = 0; j < data.column_names.size(); ++j)
      cols << "x" << (j + 1) << "," << data.column_names[j] << "\n";
  }

  const auto summaries =
      bgnlm::run_parallel(data.X, data.y, settings, chains, opt.seed, &log);
  const auto mode = opt.aggregation == "uniform"
                        ? bgnlm::AggregationMode::Uniform
                        : bgnlm::AggregationMode::MassWeighted;
  const bgnlm::AggregateResult agg = bgnlm::aggregate(summaries, mode);

  // report.csv, descending posterior
  std::vector<std::pair<std::string, double>> feats(agg.feature_posteriors.begin(),
                                                    agg.feature_posteriors.end());
  std::sort(feats.begin(), feats.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  {
    std::ofstream rep(dir / "report.csv");
    rep << "feature_key,aggregated_posterior,min_chain,max_chain\n"
        << std::setprecision(12);
    for (const auto& [key, p] : feats) {
      const auto range = agg.feature_range.at(key);
      rep << key << "," << p << "," << range.first << "," << range.second << "\n";
    }
  }
  {
    json j;
    j["git"] = BGNLM_GIT_HASH;
    j["seed"] = opt.seed;
    j["chains"] = chains;
    j["family"] = bgnlm::family_name(fam.family);
    j["weights"] = agg.weights;
    j["features"] = json::array();
    for (const auto& [key, p] : feats) {
      const auto range = agg.feature_range.at(key);
      j["features"].push_back({{"key", key},
                               {"posterior", p},
                               {"min_chain", range.first},
                               {"max_chain", range.second}});
    }
    std::ofstream(dir / "report.json") << j.dump(2) << "\n";
  }

  // store.csv: merged over chains; per-model metadata from the first chain
  // that visited the model.
  {
    std::ofstream st(dir / "store.csv");
    st << "model_key,log_marginal,log_prior,posterior,size,beta_hat\n";
    for (const auto& [key, p] : agg.model_posteriors) {
      const bgnlm::ModelRecord* rec = nullptr;
      for (const auto& s : summaries) {
        if (s.failed || !s.store) continue;
        rec = s.store->find(key);
        if (rec) break;
      }
      if (!rec) continue;
      st << key << "," << fmt(rec->log_marginal) << "," << fmt(rec->log_prior)
         << "," << fmt(p) << "," << rec->features.size() << ","
         << fmt_beta(rec->beta) << "\n";
    }
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  int failed = 0;
  for (const auto& s : summaries) failed += s.failed ? 1 : 0;
  log << "finished in " << std::setprecision(4) << secs << " s, " << failed
      << " failed chains\n";

  if (!opt.quiet) {
    std::cout << "run directory: " << dir.string() << "\n";
    std::cout << "chains: " << chains << " (" << failed << " failed), "
              << agg.model_posteriors.size() << " models, "
              << feats.size() << " features\n";
    std::cout << "top features:\n";
    std::cout << std::left << std::setw(44) << "  feature" << "posterior\n";
    const std::size_t top = std::min<std::size_t>(feats.size(), 20);
    for (std::size_t i = 0; i < top; ++i)
      std::cout << "  " << std::left << std::setw(42) << feats[i].first
                << std::setprecision(4) << feats[i].second << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------
// predict

struct PredictOptions {
  std::string store_path;
  std::string data_path;
  std::string response;  // optional truth column for metrics
  std::vector<std::string> categorical;
  std::string offset_column;
  std::string family = "auto";
  double threshold = 0.5;
  std::string out_path = "predictions.csv";
};

struct StoredModel {
  std::vector<bgnlm::FeaturePtr> features;
  Eigen::VectorXd beta;
  double posterior = 0.0;
};

std::vector<StoredModel> read_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bgnlm::DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw bgnlm::DataError("'" + path + "' is empty");
  if (line.rfind("model_key,", 0) != 0)
    throw bgnlm::DataError("'" + path + "' does not look like a model store");

  std::vector<StoredModel> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 6)
      throw bgnlm::DataError("store line " + std::to_string(lineno) +
                             ": expected 6 fields, got " +
                             std::to_string(fields.size()));
    StoredModel m;
    if (!fields[0].empty())
      for (const auto& key : split(fields[0], ';'))
        m.features.push_back(bgnlm::parse_feature_key(key));
    m.posterior = std::stod(fields[3]);
    std::istringstream bs(fields[5]);
    std::vector<double> beta;
    double v;
    while (bs >> v) beta.push_back(v);
    if (beta.size() != m.features.size() + 1)
      throw bgnlm::DataError("store line " + std::to_string(lineno) + ": " +
                             std::to_string(beta.size()) + " coefficients for " +
                             std::to_string(m.features.size()) + " features");
    m.beta = Eigen::Map<Eigen::VectorXd>(beta.data(),
                                         static_cast<Eigen::Index>(beta.size()));
    out.push_back(std::move(m));
  }
  if (out.empty()) throw bgnlm::DataError("'" + path + "' holds no models");
  return out;
}

// Config value from the run directory's config.echo, when present.
std::optional<std::string> sibling_config_value(const std::string& store_path,
                                                const std::string& key) {
  const fs::path cfg = fs::path(store_path).parent_path() / "config.echo";
  std::ifstream in(cfg);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string k = line.substr(0, eq);
    k.erase(k.find_last_not_of(" \t") + 1);
    if (k != key) continue;
    std::string v = line.substr(eq + 1);
    v.erase(0, v.find_first_not_of(" \t"));
    return v;
  }
  return std::nullopt;
}

void apply_sibling_scaling(const std::string& store_path, bgnlm::Dataset& data) {
  const fs::path sc = fs::path(store_path).parent_path() / "scaling.csv";
  std::ifstream in(sc);
  if (!in) return;
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, std::pair<double, double>> by_name;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3)
      throw bgnlm::DataError("malformed scaling file '" + sc.string() + "'");
    by_name[fields[0]] = {std::stod(fields[1]), std::stod(fields[2])};
  }
  for (std::size_t j = 0; j < data.column_names.size(); ++j) {
    const auto it = by_name.find(data.column_names[j]);
    if (it == by_name.end())
      throw bgnlm::DataError("no training scale for column '" +
                             data.column_names[j] + "'");
    const auto [mean, sd] = it->second;
    if (sd > 0)
      data.X.col(static_cast<Eigen::Index>(j)) =
          (data.X.col(static_cast<Eigen::Index>(j)).array() - mean) / sd;
  }
}

int cmd_predict(const PredictOptions& opt) {
  const auto store = read_store(opt.store_path);

  bgnlm::Dataset data = bgnlm::load_csv(opt.data_path, opt.response, opt.categorical);
  bgnlm::FamilySpec fam;
  if (opt.family == "auto") {
    const auto stored = sibling_config_value(opt.store_path, "family");
    fam.family = stored ? bgnlm::family_by_name(*stored)
                        : (opt.response.empty() ? bgnlm::Family::Gaussian
                                                : data.family_hint);
  } else {
    fam.family = bgnlm::family_by_name(opt.family);
  }
  if (!opt.offset_column.empty()) {
    const auto it = std::find(data.column_names.begin(), data.column_names.end(),
                              opt.offset_column);
    if (it == data.column_names.end())
      throw bgnlm::DataError("offset column '" + opt.offset_column + "' not found");
    const Eigen::Index idx = it - data.column_names.begin();
    fam.offset = data.X.col(idx);
    Eigen::MatrixXd X2(data.X.rows(), data.X.cols() - 1);
    X2 << data.X.leftCols(idx), data.X.rightCols(data.X.cols() - idx - 1);
    data.X = std::move(X2);
    data.column_names.erase(it);
  }
  apply_sibling_scaling(opt.store_path, data);

  int needed = 0;
  for (const auto& m : store)
    for (const auto& f : m.features) needed = std::max(needed, max_input_index(f));
  if (needed > data.X.cols())
    throw bgnlm::DataError("store references covariate x" + std::to_string(needed) +
                           " but the data has only " + std::to_string(data.X.cols()) +
                           " columns");

  const Eigen::Index n = data.X.rows();
  bgnlm::ColumnCache cache(data.X);
  double total = 0.0;
  for (const auto& m : store) total += m.posterior;
  if (total <= 0) throw bgnlm::NumericError("store posteriors sum to zero");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& m : store) {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, m.beta[0]);
    for (std::size_t j = 0; j < m.features.size(); ++j)
      eta += m.beta[static_cast<Eigen::Index>(j) + 1] * cache.column(m.features[j]);
    if (fam.offset) eta += *fam.offset;
    Eigen::VectorXd mu(n);
    switch (fam.family) {
      case bgnlm::Family::Gaussian:
        mu = eta;
        break;
      case bgnlm::Family::Bernoulli:
        for (Eigen::Index i = 0; i < n; ++i)
          mu[i] = eta[i] >= 0 ? 1.0 / (1.0 + std::exp(-eta[i]))
                              : std::exp(eta[i]) / (1.0 + std::exp(eta[i]));
        break;
      case bgnlm::Family::Poisson:
        for (Eigen::Index i = 0; i < n; ++i) mu[i] = std::exp(std::min(eta[i], 700.0));
        break;
    }
    mean += (m.posterior / total) * mu;
  }

  const bool classify = fam.family == bgnlm::Family::Bernoulli;
  {
    std::ofstream out(opt.out_path);
    out << "row_id," << (classify ? "probability" : "posterior_mean")
        << (classify ? ",class" : "") << "\n"
        << std::setprecision(12);
    for (Eigen::Index i = 0; i < n; ++i) {
      out << (i + 1) << "," << mean[i];
      if (classify) out << "," << (mean[i] > opt.threshold ? 1 : 0);
      out << "\n";
    }
  }
  std::cout << "wrote " << n << " predictions to " << opt.out_path << "\n";

  if (!opt.response.empty()) {
    if (classify) {
      std::vector<int> y_true(n), y_pred(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        y_true[i] = static_cast<int>(data.y[i]);
        y_pred[i] = mean[i] > opt.threshold ? 1 : 0;
      }
      const auto metrics = bgnlm::classification_metrics(y_true, y_pred);
      std::cout << std::setprecision(6) << "ACC " << metrics.accuracy << "\n";
      std::cout << "FNR " << (metrics.fnr ? std::to_string(*metrics.fnr) : "n/a")
                << "\n";
      std::cout << "FPR " << (metrics.fpr ? std::to_string(*metrics.fpr) : "n/a")
                << "\n";
    } else {
      const auto metrics = bgnlm::regression_metrics(data.y, mean);
      std::cout << std::setprecision(6) << "RMSE " << metrics.rmse << "\n";
      std::cout << "MAE  " << metrics.mae << "\n";
      std::cout << "CORR " << metrics.corr << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------
// count-features

int cmd_count_features(int m, int gsize, int depth, const std::string& mode) {
  const auto count = bgnlm::count_features(
      m, gsize, depth,
      mode == "lower-bound" ? bgnlm::CountMode::LowerBound : bgnlm::CountMode::Full);
  std::cout << count << "\n";
  return 0;
}

// ---------------------------------------------------------------------
// experiment

struct ExperimentOptions {
  std::string name;
  int replicates = 10;
  int chains = 4;
  double threshold = -1.0;  // -1 = per-experiment default
  std::uint64_t seed = 1;
  int budget = 500;
  bool verbose = false;
};

int cmd_experiment(const ExperimentOptions& opt) {
  const int chains = env_chain_override(opt.chains);
  std::ostream* log = opt.verbose ? &std::cerr : nullptr;

  if (opt.name == "enumeration") {
    const auto out =
        bgnlm::run_enumeration_experiment(opt.replicates, opt.budget, opt.seed);
    std::cout << "enumeration experiment: " << out.models_in_space
              << " models, budget " << opt.budget << " steps\n";
    std::cout << "replicate  tv_distance\n" << std::setprecision(6);
    int ok = 0;
    double worst = 0;
    for (std::size_t r = 0; r < out.tv.size(); ++r) {
      std::cout << std::left << std::setw(11) << (r + 1) << out.tv[r] << "\n";
      ok += out.tv[r] < 0.05 ? 1 : 0;
      worst = std::max(worst, out.tv[r]);
    }
    std::cout << "max TV " << worst << "; " << ok << "/" << out.tv.size()
              << " replicates below 0.05\n";
    return 0;
  }

  const double threshold =
      opt.threshold >= 0 ? opt.threshold : (opt.name == "logic" ? 0.5 : 0.25);
  const auto out = bgnlm::run_detection_experiment(
      opt.name, opt.replicates, chains, threshold, opt.seed, nullptr, log);

  std::cout << opt.name << " experiment: " << opt.replicates << " replicates, "
            << chains << " chains, threshold " << threshold << "\n";
  std::cout << std::left << std::setw(44) << "truth_class" << "power\n"
            << std::setprecision(4);
  for (std::size_t c = 0; c < out.truth_classes.size(); ++c)
    std::cout << std::left << std::setw(44) << out.truth_classes[c].front()
              << out.metrics.power[c] << "\n";
  std::cout << "Pow " << out.metrics.overall_power << "  FP "
            << out.metrics.false_positives << "  FDR " << out.metrics.fdr << "\n";
  return 0;
}

// CLI11 only reads config files attached to the top-level command, so each
// subcommand's flat key=value file is expanded into synthetic --key=value
// tokens and the command line is parsed a second time. Keys the user already
// set as flags are skipped, which is what gives flags precedence.
std::vector<std::string> config_file_tokens(const CLI::App& sub,
                                            const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bgnlm::ConfigError("cannot open config file '" + path + "'");
  std::vector<std::string> tokens;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (CLI::detail::trim_copy(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw bgnlm::ConfigError(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = CLI::detail::trim_copy(line.substr(0, eq));
    const std::string value = CLI::detail::trim_copy(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw bgnlm::ConfigError(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    if (!seen.insert(key).second)
      throw bgnlm::ConfigError(path + ": duplicate key '" + key + "'");
    if (key == "config")
      throw bgnlm::ConfigError(path + ": config files cannot nest");
    const CLI::Option* op = sub.get_option_no_throw("--" + key);
    if (op == nullptr)
      throw bgnlm::ConfigError(path + ": unknown configuration key '" + key + "'");
    if (op->count() > 0) continue;  // the command line set it already
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian generalized nonlinear models: feature search and prediction"};
  app.require_subcommand(1);

  std::string fit_cfg, pred_cfg, exp_cfg;

  FitOptions fit;
  CLI::App* cfit = app.add_subcommand("fit", "Run the model search on a dataset");
  cfit->add_option("--config", fit_cfg, "Flat key=value configuration file");
  cfit->add_option("--data", fit.data_path, "Training CSV (header row required)");
  cfit->add_option("--response", fit.response, "Response column name");
  cfit->add_option("--categorical", fit.categorical,
                   "Categorical column (repeatable)");
  cfit->add_option("--offset-column", fit.offset_column,
                   "Offset column (Poisson only)");
  cfit->add_option("--synthetic", fit.synthetic,
                   "Generate data instead: kepler|mass|logic");
  cfit->add_option("--n", fit.synthetic_n, "Synthetic sample size");
  cfit->add_option("--noise", fit.synthetic_noise, "Synthetic noise sd");
  cfit->add_flag("--relative-noise", fit.synthetic_relative_noise,
                 "Noise sd is a fraction of the signal sd");
  cfit->add_option("--data-seed", fit.synthetic_seed, "Synthetic data seed");
  add_search_options(cfit, fit.search);
  cfit->add_option("--chains", fit.chains, "Parallel chains B");
  cfit->add_option("--seed", fit.seed, "Base seed (chain b uses seed+b)");
  cfit->add_option("--aggregation", fit.aggregation, "mass|uniform")
      ->check(CLI::IsMember({"mass", "uniform"}));
  cfit->add_option("--out", fit.out_root, "Directory to create the run folder in");
  cfit->add_flag("--standardize", fit.standardize,
                 "Standardize covariates before the search");
  cfit->add_flag("--quiet", fit.quiet, "Suppress the stdout summary");

  PredictOptions pred;
  CLI::App* cpred = app.add_subcommand("predict", "Model-averaged prediction from a store");
  cpred->add_option("--config", pred_cfg, "Flat key=value configuration file");
  cpred->add_option("--store", pred.store_path, "store.csv from a fit run")->required();
  cpred->add_option("--data", pred.data_path, "CSV to predict on")->required();
  cpred->add_option("--response", pred.response,
                    "Truth column for the metric block (optional)");
  cpred->add_option("--categorical", pred.categorical,
                    "Categorical column (repeatable)");
  cpred->add_option("--offset-column", pred.offset_column,
                    "Offset column (Poisson only)");
  cpred->add_option("--family", pred.family,
                    "auto|gaussian|bernoulli|poisson (auto reads the run config)");
  cpred->add_option("--threshold", pred.threshold, "Classification threshold");
  cpred->add_option("--out", pred.out_path, "Prediction CSV path");

  int cf_m = 1, cf_gsize = 2, cf_depth = 0;
  std::string cf_mode = "full";
  CLI::App* ccount = app.add_subcommand("count-features",
                                        "Size of the feature space at a given depth");
  ccount->add_option("--covariates", cf_m, "Number of input covariates m")->required();
  ccount->add_option("--gsize", cf_gsize, "Number of nonlinear transforms |G|")
      ->required();
  ccount->add_option("--depth", cf_depth, "Depth d")->required();
  ccount->add_option("--mode", cf_mode, "full|lower-bound")
      ->check(CLI::IsMember({"full", "lower-bound"}));

  ExperimentOptions exp;
  CLI::App* cexp = app.add_subcommand("experiment", "Seeded recovery experiments");
  cexp->add_option("--config", exp_cfg, "Flat key=value configuration file");
  cexp->add_option("--name", exp.name, "enumeration|logic|kepler|mass")
      ->required()
      ->check(CLI::IsMember({"enumeration", "logic", "kepler", "mass"}));
  cexp->add_option("--replicates", exp.replicates, "Seeded replicates");
  cexp->add_option("--chains", exp.chains, "Chains per replicate");
  cexp->add_option("--threshold", exp.threshold,
                   "Detection threshold (default 0.5, kepler/mass 0.25)");
  cexp->add_option("--seed", exp.seed, "Base seed");
  cexp->add_option("--budget", exp.budget, "Kernel steps (enumeration)");
  cexp->add_flag("--verbose", exp.verbose, "Chain progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const CLI::App* sub = cfit->parsed()    ? cfit
                          : cpred->parsed() ? cpred
                          : cexp->parsed()  ? cexp
                                            : nullptr;
    const std::string cfg_path = sub == cfit    ? fit_cfg
                                 : sub == cpred ? pred_cfg
                                 : sub == cexp  ? exp_cfg
                                                : "";
    if (!cfg_path.empty()) {
      const auto extra = config_file_tokens(*sub, cfg_path);
      if (!extra.empty()) {
        // parse() takes the command line reversed; file tokens go last so
        // they sit inside the subcommand's scope
        std::vector<std::string> rev(extra.rbegin(), extra.rend());
        for (int i = argc - 1; i >= 1; --i) rev.push_back(argv[i]);
        app.parse(rev);
      }
    }

    if (cfit->parsed()) return cmd_fit(fit);
    if (cpred->parsed()) return cmd_predict(pred);
    if (ccount->parsed()) return cmd_count_features(cf_m, cf_gsize, cf_depth, cf_mode);
    if (cexp->parsed()) return cmd_experiment(exp);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const bgnlm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const bgnlm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const bgnlm::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
