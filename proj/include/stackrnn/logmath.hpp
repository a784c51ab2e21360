#pragma once

#include "stackrnn/common.hpp"

#include <cmath>

namespace stackrnn {

// log(exp(a) + exp(b)) with -inf treated as additive-semiring zero.
inline Scalar log_add_exp(Scalar a, Scalar b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const Scalar m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Max-shifted log(sum(exp(x))) over a whole expression; an all-(-inf)
// input yields -inf, never NaN.
template <typename Derived>
Scalar log_sum_exp(const Eigen::ArrayBase<Derived>& x) {
  if (x.size() == 0) return kNegInf;
  const Scalar m = x.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((x - m).exp().sum());
}

// Reduction over the middle axis of a column space factored as
// outer * mid * inner (column index = (o * mid + m) * inner + i).
// Returns rows x (outer * inner).
inline Array log_sum_exp_mid(const Array& x, Index outer, Index mid, Index inner) {
  if (outer * mid * inner != x.cols()) {
    throw UsageError("log_sum_exp_mid: axis factorization does not match column count");
  }
  const Index rows = x.rows();
  Array shift(rows, outer * inner);
  shift.setConstant(kNegInf);
  for (Index o = 0; o < outer; ++o) {
    for (Index m = 0; m < mid; ++m) {
      for (Index i = 0; i < inner; ++i) {
        shift.col(o * inner + i) = shift.col(o * inner + i).max(x.col((o * mid + m) * inner + i));
      }
    }
  }
  Array acc = Array::Zero(rows, outer * inner);
  for (Index o = 0; o < outer; ++o) {
    for (Index m = 0; m < mid; ++m) {
      for (Index i = 0; i < inner; ++i) {
        const Index oc = o * inner + i;
        acc.col(oc) += (x.col((o * mid + m) * inner + i) - shift.col(oc))
                           .unaryExpr([](Scalar v) { return std::isnan(v) ? Scalar(0) : std::exp(v); });
      }
    }
  }
  // acc == 0 only where every slice entry was -inf: result stays -inf.
  Array out(rows, outer * inner);
  for (Index c = 0; c < out.cols(); ++c) {
    for (Index r = 0; r < rows; ++r) {
      out(r, c) = acc(r, c) > Scalar(0) ? shift(r, c) + std::log(acc(r, c)) : kNegInf;
    }
  }
  return out;
}

}  // namespace stackrnn
