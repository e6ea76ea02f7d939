#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <vector>

#include "bgnlm/feature.hpp"

namespace bgnlm {

using BigInt = boost::multiprecision::cpp_int;

enum class CountMode { Full, LowerBound };

// Number of distinct features of depth exactly d over m inputs and gsize
// transforms. Full mode counts projections/modifications plus multiplications
// (q_d = q_d^p + q_d^*); LowerBound counts the multiplication-free space.
// Counts explode doubly-exponentially; inputs whose intermediate exponents
// exceed an internal guard raise NumericError rather than exhausting memory.
BigInt count_features(int m, int gsize, int d, CountMode mode);

// Exhaustive structural enumeration (alpha-free: projections carry unit
// weights and zero intercept). Guarded to oracle scale: m <= 2, max_depth <= 2.
std::vector<FeaturePtr> enumerate_features(int m, const TransformLibrary& lib, int max_depth);

}  // namespace bgnlm
