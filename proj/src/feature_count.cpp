#include "bgnlm/feature_count.hpp"

#include <map>
#include <set>
#include <string>

namespace bgnlm {

namespace {

// 2^e - 1 with a guard on e: beyond ~10^7 bits a single term no longer fits in
// memory at any useful scale.
BigInt pow2_minus1(const BigInt& e) {
  if (e > 10'000'000)
    throw NumericError("feature count exceeds supported magnitude (2^" + e.str() + " term)");
  BigInt r = 1;
  r <<= static_cast<unsigned>(e);
  return r - 1;
}

BigInt choose2(const BigInt& n) { return n * (n - 1) / 2; }

}  // namespace

BigInt count_features(int m, int gsize, int d, CountMode mode) {
  if (m < 1) throw ConfigError("count_features requires m >= 1");
  if (gsize < 1) throw ConfigError("count_features requires gsize >= 1");
  if (d < 0) throw ConfigError("count_features requires d >= 0");

  if (mode == CountMode::LowerBound) {
    // Multiplication-free count. Projections draw from cumulative layers
    // through depth 2 and from the newest layer only beyond that.
    std::vector<BigInt> ql(static_cast<std::size_t>(d) + 1);
    ql[0] = m;
    BigInt older = 0;  // sum of ql[1..t-1]
    for (int t = 1; t <= d; ++t) {
      BigInt expo = 0;
      if (t <= 2)
        for (int u = 0; u < t; ++u) expo += ql[static_cast<std::size_t>(u)];
      else
        expo = ql[static_cast<std::size_t>(t) - 1];
      ql[static_cast<std::size_t>(t)] = gsize * pow2_minus1(expo) - older;
      older += ql[static_cast<std::size_t>(t)];
    }
    return ql[static_cast<std::size_t>(d)];
  }

  std::vector<BigInt> q(static_cast<std::size_t>(d) + 1), qp(static_cast<std::size_t>(d) + 1);
  q[0] = m;
  qp[0] = 0;
  for (int t = 1; t <= d; ++t) {
    BigInt expo = 0;
    for (int u = 0; u < t; ++u) expo += q[static_cast<std::size_t>(u)];
    BigInt sub = 0;
    for (int u = 1; u <= t - 2; ++u) sub += q[static_cast<std::size_t>(u)];
    qp[static_cast<std::size_t>(t)] =
        gsize * pow2_minus1(expo) - sub - qp[static_cast<std::size_t>(t) - 1];

    // Multiplications pair operand depths (u, t-1-u); the diagonal pair (odd t
    // only) draws unordered with repetition.
    BigInt qs = 0;
    if (t % 2 == 1) {
      const int s = (t - 1) / 2;
      for (int u = 0; u < s; ++u)
        qs += q[static_cast<std::size_t>(u)] * q[static_cast<std::size_t>(t - 1 - u)];
      qs += choose2(q[static_cast<std::size_t>(s)] + 1);
    } else {
      const int s = (t - 2) / 2;
      for (int u = 0; u <= s; ++u)
        qs += q[static_cast<std::size_t>(u)] * q[static_cast<std::size_t>(t - 1 - u)];
    }
    q[static_cast<std::size_t>(t)] = qp[static_cast<std::size_t>(t)] + qs;
  }
  return q[static_cast<std::size_t>(d)];
}

std::vector<FeaturePtr> enumerate_features(int m, const TransformLibrary& lib, int max_depth) {
  if (m < 1 || m > 2 || max_depth < 0 || max_depth > 2)
    throw ConfigError("enumerate_features is an oracle-scale tool: m <= 2, max_depth <= 2");

  // layers[d] = features of depth exactly d, keyed for deduplication.
  std::vector<std::map<std::string, FeaturePtr>> layers(static_cast<std::size_t>(max_depth) + 1);
  for (int j = 1; j <= m; ++j) {
    FeaturePtr f = Feature::input(j);
    layers[0].emplace(f->key(), f);
  }

  for (int d = 1; d <= max_depth; ++d) {
    auto& layer = layers[static_cast<std::size_t>(d)];

    // Projections/modifications: g over a nonempty subset of shallower
    // features whose maximum depth is exactly d-1.
    std::vector<FeaturePtr> pool;
    std::vector<int> pool_depth;
    for (int t = 0; t < d; ++t)
      for (const auto& [k, f] : layers[static_cast<std::size_t>(t)]) {
        pool.push_back(f);
        pool_depth.push_back(t);
      }
    const std::size_t P = pool.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << P); ++mask) {
      int dmax = 0;
      std::vector<FeaturePtr> subset;
      for (std::size_t i = 0; i < P; ++i)
        if (mask & (std::size_t{1} << i)) {
          subset.push_back(pool[i]);
          dmax = std::max(dmax, pool_depth[i]);
        }
      if (dmax != d - 1) continue;
      for (const auto* g : lib.members()) {
        FeaturePtr f;
        if (subset.size() == 1) {
          f = Feature::modification(*g, subset[0]);
        } else {
          Eigen::VectorXd alpha = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(subset.size()) + 1);
          alpha[0] = 0.0;
          f = Feature::projection(*g, subset, std::move(alpha));
        }
        layer.emplace(f->key(), f);
      }
    }

    // Multiplications: operand depths sum to d-1 (unordered, squares allowed).
    for (int t = 0; t <= d - 1 - t; ++t) {
      const auto& left = layers[static_cast<std::size_t>(t)];
      const auto& right = layers[static_cast<std::size_t>(d - 1 - t)];
      for (const auto& [lk, lf] : left)
        for (const auto& [rk, rf] : right) {
          FeaturePtr f = Feature::multiplication(lf, rf);
          layer.emplace(f->key(), f);
        }
    }
  }

  std::vector<FeaturePtr> out;
  for (const auto& layer : layers)
    for (const auto& [k, f] : layer) out.push_back(f);
  return out;
}

}  // namespace bgnlm
