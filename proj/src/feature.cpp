#include "bgnlm/feature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

namespace bgnlm {

std::string format_alpha(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

namespace {

std::string projection_key(const Transform& g, const std::vector<FeaturePtr>& children,
                           const Eigen::VectorXd& alpha) {
  std::string k = g.name;
  k += '(';
  k += format_alpha(alpha[0]);
  for (std::size_t i = 0; i < children.size(); ++i) {
    const double a = alpha[static_cast<Eigen::Index>(i) + 1];
    k += (a < 0.0 ? '-' : '+');
    k += format_alpha(std::fabs(a));
    k += '*';
    k += children[i]->key();
  }
  k += ')';
  return k;
}

}  // namespace

FeaturePtr Feature::input(int index) {
  if (index < 1) throw ConfigError("input feature index must be >= 1");
  auto f = std::shared_ptr<Feature>(new Feature());
  f->kind_ = FeatureKind::Input;
  f->input_index_ = index;
  f->depth_ = 0;
  f->local_width_ = 1;
  f->total_width_ = 1;
  f->key_ = "x" + std::to_string(index);
  return f;
}

FeaturePtr Feature::modification(const Transform& g, FeaturePtr child) {
  if (!child) throw ConfigError("modification requires a child feature");
  auto f = std::shared_ptr<Feature>(new Feature());
  f->kind_ = FeatureKind::Modification;
  f->transform_ = &transform_by_name(g.name);
  f->children_.push_back(std::move(child));
  f->depth_ = 1 + f->children_[0]->depth();
  f->local_width_ = 1;
  f->total_width_ = 1 + f->children_[0]->total_width();
  f->contains_projection_ = f->children_[0]->contains_projection();
  f->key_ = std::string(g.name) + "(" + f->children_[0]->key() + ")";
  return f;
}

FeaturePtr Feature::multiplication(FeaturePtr left, FeaturePtr right) {
  if (!left || !right) throw ConfigError("multiplication requires two operands");
  if (right->key() < left->key()) std::swap(left, right);
  auto f = std::shared_ptr<Feature>(new Feature());
  f->kind_ = FeatureKind::Multiplication;
  f->depth_ = 1 + left->depth() + right->depth();
  f->local_width_ = 2;
  f->total_width_ = 2 + left->total_width() + right->total_width();
  f->contains_projection_ = left->contains_projection() || right->contains_projection();
  f->key_ = "(" + left->key() + "*" + right->key() + ")";
  f->children_.push_back(std::move(left));
  f->children_.push_back(std::move(right));
  return f;
}

FeaturePtr Feature::projection(const Transform& g, std::vector<FeaturePtr> children,
                               Eigen::VectorXd alpha) {
  if (children.size() < 2) throw ConfigError("projection requires at least 2 children");
  if (alpha.size() != static_cast<Eigen::Index>(children.size()) + 1)
    throw ConfigError("projection alpha must have one weight per child plus intercept");
  if (!alpha.allFinite()) throw NumericError("projection alpha must be finite");
  for (const auto& c : children)
    if (!c) throw ConfigError("projection child is null");

  // Sort children by key, carrying weights along; reject duplicate children.
  std::vector<std::size_t> order(children.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return children[a]->key() < children[b]->key();
  });
  std::vector<FeaturePtr> sorted;
  Eigen::VectorXd sorted_alpha(alpha.size());
  sorted_alpha[0] = alpha[0];
  sorted.reserve(children.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.push_back(children[order[i]]);
    sorted_alpha[static_cast<Eigen::Index>(i) + 1] =
        alpha[static_cast<Eigen::Index>(order[i]) + 1];
    if (i > 0 && sorted[i]->key() == sorted[i - 1]->key())
      throw ConfigError("projection children must be distinct: " + sorted[i]->key());
  }

  auto f = std::shared_ptr<Feature>(new Feature());
  f->kind_ = FeatureKind::Projection;
  f->transform_ = &transform_by_name(g.name);
  f->children_ = std::move(sorted);
  f->alpha_ = std::move(sorted_alpha);
  int dmax = 0;
  int twsum = 0;
  for (const auto& c : f->children_) {
    dmax = std::max(dmax, c->depth());
    twsum += c->total_width();
  }
  f->depth_ = 1 + dmax;
  f->local_width_ = static_cast<int>(f->children_.size());
  f->total_width_ = f->local_width_ + twsum;
  f->contains_projection_ = true;
  f->key_ = projection_key(*f->transform_, f->children_, f->alpha_);
  return f;
}

FeatureMeasure measure(const Feature& f) {
  return {f.depth(), f.local_width(), f.total_width()};
}

double complexity(const Feature& f) { return static_cast<double>(f.total_width()); }

Eigen::VectorXd Feature::evaluate(const Eigen::MatrixXd& X) const {
  ColumnCache scratch(X);
  // The cache owns the result; copy out so the scratch can die.
  return scratch.column(FeaturePtr(this, [](const Feature*) {}));
}

const Eigen::VectorXd& ColumnCache::column(const FeaturePtr& f) {
  auto it = memo_.find(f->key());
  if (it != memo_.end()) return it->second;

  const Eigen::Index n = X_->rows();
  Eigen::VectorXd col(n);
  switch (f->kind()) {
    case FeatureKind::Input: {
      const int j = f->input_index();
      if (j > X_->cols())
        throw DataError("feature references column x" + std::to_string(j) + " but data has " +
                        std::to_string(X_->cols()) + " columns");
      col = X_->col(j - 1);
      break;
    }
    case FeatureKind::Modification: {
      const Eigen::VectorXd& c = column(f->children()[0]);
      const auto& g = f->transform();
      for (Eigen::Index i = 0; i < n; ++i) col[i] = g.apply(c[i]);
      break;
    }
    case FeatureKind::Multiplication: {
      // Resolve both children before taking references: the recursive call can
      // rehash the memo table and invalidate an earlier reference.
      column(f->children()[0]);
      column(f->children()[1]);
      col = memo_.at(f->children()[0]->key()).cwiseProduct(memo_.at(f->children()[1]->key()));
      break;
    }
    case FeatureKind::Projection: {
      for (const auto& c : f->children()) column(c);
      const Eigen::VectorXd& a = f->alpha();
      Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, a[0]);
      for (std::size_t k = 0; k < f->children().size(); ++k)
        eta += a[static_cast<Eigen::Index>(k) + 1] * memo_.at(f->children()[k]->key());
      const auto& g = f->transform();
      for (Eigen::Index i = 0; i < n; ++i) col[i] = g.apply(eta[i]);
      break;
    }
  }

  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(col[i]))
      throw NumericError("non-finite value at row " + std::to_string(i) + " in feature " +
                         f->key());

  return memo_.emplace(f->key(), std::move(col)).first->second;
}

// ---------------------------------------------------------------------------
// Key parser: recursive descent over the grammar
//   key   := input | mult | mod | proj
//   input := "x" digits
//   mult  := "(" key "*" key ")"
//   mod   := name "(" key ")"
//   proj  := name "(" number (("+"|"-") number "*" key)* ")"
// ---------------------------------------------------------------------------

namespace {

struct KeyParser {
  const std::string& s;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("bad feature key at position " + std::to_string(pos) + " (" + what + "): " + s);
  }

  char peek() const { return pos < s.size() ? s[pos] : '\0'; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }

  double number() {
    const char* start = s.c_str() + pos;
    char* end = nullptr;
    const double v = std::strtod(start, &end);
    if (end == start) fail("expected number");
    pos += static_cast<std::size_t>(end - start);
    return v;
  }

  FeaturePtr parse() {
    const char c = peek();
    if (c == 'x' && pos + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[pos + 1])))
      return parse_input();
    if (c == '(') return parse_mult();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_named();
    fail("expected feature");
  }

  FeaturePtr parse_input() {
    ++pos;  // 'x'
    std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    return Feature::input(std::stoi(s.substr(start, pos - start)));
  }

  FeaturePtr parse_mult() {
    expect('(');
    FeaturePtr left = parse();
    expect('*');
    FeaturePtr right = parse();
    expect(')');
    return Feature::multiplication(std::move(left), std::move(right));
  }

  FeaturePtr parse_named() {
    std::size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    const Transform& g = transform_by_name(s.substr(start, pos - start));
    expect('(');
    // A projection body starts with its numeric intercept; a modification
    // body starts with a feature (never a digit/sign/dot).
    const char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.')
      return parse_projection_body(g);
    FeaturePtr child = parse();
    expect(')');
    return Feature::modification(g, std::move(child));
  }

  FeaturePtr parse_projection_body(const Transform& g) {
    std::vector<double> alphas;
    std::vector<FeaturePtr> children;
    alphas.push_back(number());  // intercept
    while (peek() == '+' || peek() == '-') {
      const double sign = (s[pos] == '-') ? -1.0 : 1.0;
      ++pos;
      const double mag = number();
      expect('*');
      children.push_back(parse());
      alphas.push_back(sign * mag);
    }
    expect(')');
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(alphas.size()));
    for (std::size_t i = 0; i < alphas.size(); ++i)
      alpha[static_cast<Eigen::Index>(i)] = alphas[i];
    return Feature::projection(g, std::move(children), std::move(alpha));
  }
};

}  // namespace

FeaturePtr parse_feature_key(const std::string& key) {
  KeyParser p{key};
  FeaturePtr f = p.parse();
  if (p.pos != key.size()) p.fail("trailing characters");
  return f;
}

}  // namespace bgnlm
