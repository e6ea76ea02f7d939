#include "bgnlm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace bgnlm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool is_missing(const std::string& field) {
  const std::string t = trim(field);
  return t.empty() || t == "NA" || t == "na" || t == "N/A" || t == "?";
}

double parse_number(const std::string& field, std::size_t row,
                    const std::string& column) {
  const std::string t = trim(field);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    throw DataError("could not parse '" + t + "' as a number at row " +
                    std::to_string(row) + ", column '" + column + "'");
  return v;
}

// RFC-4180 tokenizer: quoted fields, doubled quotes, embedded separators
// and line breaks.
std::vector<std::vector<std::string>> tokenize_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;

  auto end_field = [&]() {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&]() {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          quoted = true;
          field_started = true;
        } else {
          field += c;  // interior quote in an unquoted field: keep verbatim
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        field_started = true;
        break;
    }
  }
  if (quoted) throw DataError("unterminated quoted field at end of file");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

double sample_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() /
                   std::max<Eigen::Index>(1, v.size() - 1));
}

void apply_noise(Eigen::VectorXd& y, const Eigen::VectorXd& law,
                 const SyntheticSpec& spec, std::mt19937_64& rng) {
  if (spec.noise_sd < 0) throw ConfigError("noise sd must be non-negative");
  const double sd =
      spec.relative_noise ? spec.noise_sd * sample_sd(law) : spec.noise_sd;
  std::normal_distribution<double> noise(0.0, 1.0);
  y = law;
  if (sd > 0)
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * noise(rng);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& response_column,
                 const std::vector<std::string>& categorical_columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const auto rows = tokenize_csv(buffer.str());
  if (rows.size() < 2)
    throw DataError("'" + path + "' needs a header row and at least one data row");

  const std::vector<std::string>& header = rows[0];
  const std::size_t width = header.size();

  auto column_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < width; ++j)
      if (trim(header[j]) == name) return j;
    throw DataError("unknown column '" + name + "' in '" + path + "'");
  };
  // An empty response name loads covariates only (y is left at zero),
  // for scoring unlabeled data.
  const std::size_t response_idx =
      response_column.empty() ? width : column_index(response_column);
  std::set<std::size_t> categorical;
  for (const auto& name : categorical_columns) {
    const std::size_t j = column_index(name);
    if (j == response_idx)
      throw ConfigError("response column cannot be categorical");
    categorical.insert(j);
  }

  // Keep complete rows only.
  std::vector<const std::vector<std::string>*> kept;
  int dropped = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw DataError("row " + std::to_string(r + 1) + " has " +
                      std::to_string(rows[r].size()) + " fields, expected " +
                      std::to_string(width));
    const bool missing = std::any_of(rows[r].begin(), rows[r].end(),
                                     [](const std::string& f) { return is_missing(f); });
    if (missing)
      ++dropped;
    else
      kept.push_back(&rows[r]);
  }
  if (kept.size() < 2)
    throw DataError("fewer than 2 complete rows in '" + path + "'");

  const Eigen::Index n = static_cast<Eigen::Index>(kept.size());
  Dataset out;
  out.dropped_rows = dropped;
  out.response_name = response_column;
  out.y = Eigen::VectorXd::Zero(n);
  if (response_idx < width)
    for (Eigen::Index i = 0; i < n; ++i)
      out.y[i] = parse_number((*kept[i])[response_idx], i + 2, response_column);

  std::vector<Eigen::VectorXd> columns;
  for (std::size_t j = 0; j < width; ++j) {
    if (j == response_idx) continue;
    const std::string name = trim(header[j]);
    if (!categorical.count(j)) {
      Eigen::VectorXd col(n);
      for (Eigen::Index i = 0; i < n; ++i)
        col[i] = parse_number((*kept[i])[j], i + 2, name);
      columns.push_back(std::move(col));
      out.column_names.push_back(name);
      continue;
    }
    // k levels in sorted order; the first is the reference.
    std::set<std::string> levels;
    for (Eigen::Index i = 0; i < n; ++i) levels.insert(trim((*kept[i])[j]));
    auto level = levels.begin();
    for (++level; level != levels.end(); ++level) {
      Eigen::VectorXd col(n);
      for (Eigen::Index i = 0; i < n; ++i)
        col[i] = trim((*kept[i])[j]) == *level ? 1.0 : 0.0;
      columns.push_back(std::move(col));
      out.column_names.push_back(name + "=" + *level);
    }
  }
  if (columns.empty())
    throw DataError("no covariate columns left in '" + path + "'");

  out.X.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    out.X.col(static_cast<Eigen::Index>(j)) = columns[j];

  const bool binary = (out.y.array() == 0.0 || out.y.array() == 1.0).all();
  bool counts = true;
  for (Eigen::Index i = 0; i < n; ++i)
    counts = counts && out.y[i] >= 0 && out.y[i] == std::floor(out.y[i]);
  out.family_hint = binary  ? Family::Bernoulli
                    : counts ? Family::Poisson
                             : Family::Gaussian;
  return out;
}

std::vector<std::string> product_parenthesization_keys(
    const std::vector<FeaturePtr>& leaves) {
  if (leaves.empty() || leaves.size() > 6)
    throw ConfigError("product enumeration supports 1 to 6 leaves");

  // All binary trees over a leaf index set, deduplicated by canonical key.
  std::function<std::map<std::string, FeaturePtr>(std::vector<std::size_t>)> trees =
      [&](std::vector<std::size_t> idx) {
        std::map<std::string, FeaturePtr> out;
        if (idx.size() == 1) {
          out.emplace(leaves[idx[0]]->key(), leaves[idx[0]]);
          return out;
        }
        const std::size_t k = idx.size();
        // Splits with the first element on the left avoid mirrored pairs.
        for (std::size_t bits = 0; bits < (1u << (k - 1)); ++bits) {
          std::vector<std::size_t> left{idx[0]}, right;
          for (std::size_t i = 1; i < k; ++i)
            ((bits >> (i - 1)) & 1 ? left : right).push_back(idx[i]);
          if (right.empty()) continue;
          for (const auto& [lk, lf] : trees(left))
            for (const auto& [rk, rf] : trees(right)) {
              FeaturePtr f = Feature::multiplication(lf, rf);
              out.emplace(f->key(), f);
            }
        }
        return out;
      };

  std::vector<std::size_t> all(leaves.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::string> keys;
  for (const auto& [key, f] : trees(all)) keys.push_back(key);
  return keys;
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2) throw ConfigError("synthetic n must be at least 2");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticData out;
  Dataset& d = out.data;
  d.family_hint = Family::Gaussian;
  const Eigen::Index n = spec.n;

  if (spec.generator == "kepler") {
    d.X.resize(n, 10);
    const double lp_lo = std::log(1.0), lp_hi = std::log(4000.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double P = std::exp(lp_lo + (lp_hi - lp_lo) * unit(rng));
      const double M = 0.5 + 2.0 * unit(rng);
      const double R = std::pow(M, 0.8) * (1.0 + 0.01 * gauss(rng));
      const double T = 5778.0 * std::pow(M, 0.55) * (1.0 + 0.01 * gauss(rng));
      d.X(i, 0) = P;
      d.X(i, 1) = M;
      d.X(i, 2) = R;
      d.X(i, 3) = T;
      for (int z = 0; z < 6; ++z) d.X(i, 4 + z) = gauss(rng);
    }
    d.column_names = {"P", "M_host", "R_host", "T_host",
                      "z1", "z2", "z3", "z4", "z5", "z6"};
    d.response_name = "a";
    const Eigen::VectorXd law =
        (d.X.col(0).array().square() * d.X.col(1).array())
            .unaryExpr([](double v) { return std::cbrt(v); })
            .matrix();
    apply_noise(d.y, law, spec, rng);

    // One class: the law detected through any of the three correlated
    // host variables, under either parenthesization.
    const Transform& cbrt = transform_by_name("cbrt_abs");
    std::vector<std::string> cls;
    for (int host : {2, 3, 4}) {
      for (const std::string& pk : product_parenthesization_keys(
               {Feature::input(1), Feature::input(1), Feature::input(host)})) {
        cls.push_back(Feature::modification(cbrt, parse_feature_key(pk))->key());
      }
    }
    std::sort(cls.begin(), cls.end());
    cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
    out.truth_classes.push_back(std::move(cls));
    return out;
  }

  if (spec.generator == "mass") {
    d.X.resize(n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      d.X(i, 0) = 0.5 + 2.0 * unit(rng);  // R
      d.X(i, 1) = 0.5 + 2.0 * unit(rng);  // rho
      for (int z = 0; z < 4; ++z) d.X(i, 2 + z) = gauss(rng);
    }
    d.column_names = {"R", "rho", "z1", "z2", "z3", "z4"};
    d.response_name = "mass";
    const Eigen::VectorXd law =
        d.X.col(0).array().cube() * d.X.col(1).array();
    apply_noise(d.y, law, spec, rng);

    out.truth_classes.push_back(product_parenthesization_keys(
        {Feature::input(1), Feature::input(1), Feature::input(1),
         Feature::input(2)}));
    return out;
  }

  if (spec.generator == "logic") {
    if (spec.n < 50) throw ConfigError("logic generator requires n >= 50");
    d.X.resize(n, 50);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < 50; ++j)
        d.X(i, j) = unit(rng) < 0.5 ? 1.0 : 0.0;
    d.column_names.resize(50);
    for (int j = 0; j < 50; ++j) d.column_names[j] = "x" + std::to_string(j + 1);
    d.response_name = "y";

    auto col = [&](int j) { return d.X.col(j - 1).array(); };
    const Eigen::VectorXd law =
        (1.0 + 1.5 * col(7) + 1.5 * col(8) + 6.6 * col(18) * col(21) +
         3.5 * col(2) * col(9) + 9.0 * col(12) * col(20) * col(37) +
         7.0 * col(1) * col(3) * col(27) +
         7.0 * col(4) * col(10) * col(17) * col(30) +
         7.0 * col(11) * col(13) * col(19) * col(50))
            .matrix();
    apply_noise(d.y, law, spec, rng);

    auto leaves = [](std::initializer_list<int> js) {
      std::vector<FeaturePtr> out;
      for (int j : js) out.push_back(Feature::input(j));
      return out;
    };
    out.truth_classes.push_back({"x7"});
    out.truth_classes.push_back({"x8"});
    out.truth_classes.push_back(product_parenthesization_keys(leaves({18, 21})));
    out.truth_classes.push_back(product_parenthesization_keys(leaves({2, 9})));
    out.truth_classes.push_back(product_parenthesization_keys(leaves({12, 20, 37})));
    out.truth_classes.push_back(product_parenthesization_keys(leaves({1, 3, 27})));
    out.truth_classes.push_back(
        product_parenthesization_keys(leaves({4, 10, 17, 30})));
    out.truth_classes.push_back(
        product_parenthesization_keys(leaves({11, 13, 19, 50})));
    return out;
  }

  throw ConfigError("unknown generator '" + spec.generator +
                    "' (expected kepler, mass, or logic)");
}

}  // namespace bgnlm
