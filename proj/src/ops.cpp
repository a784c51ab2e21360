#include "stackrnn/ops.hpp"

#include "stackrnn/logmath.hpp"

#include <cmath>

namespace stackrnn {

namespace {

void check_same_shape(const Array& a, const Array& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
  check_same_shape(t.val(a), t.val(b), "add");
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.emplace(t.val(a) + t.val(b), rg, "add", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a, b](Tape& tp) {
      const Array& g = tp.grad(out);
      if (tp.requires_grad(a)) tp.grad(a) += g;
      if (tp.requires_grad(b)) tp.grad(b) += g;
    };
  }
  return out;
}

Var sub(Tape& t, Var a, Var b) {
  check_same_shape(t.val(a), t.val(b), "sub");
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.emplace(t.val(a) - t.val(b), rg, "sub", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a, b](Tape& tp) {
      const Array& g = tp.grad(out);
      if (tp.requires_grad(a)) tp.grad(a) += g;
      if (tp.requires_grad(b)) tp.grad(b) -= g;
    };
  }
  return out;
}

Var mul(Tape& t, Var a, Var b) {
  check_same_shape(t.val(a), t.val(b), "mul");
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.emplace(t.val(a) * t.val(b), rg, "mul", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a, b](Tape& tp) {
      const Array& g = tp.grad(out);
      if (tp.requires_grad(a)) tp.grad(a) += g * tp.val(b);
      if (tp.requires_grad(b)) tp.grad(b) += g * tp.val(a);
    };
  }
  return out;
}

Var neg(Tape& t, Var a) { return scale(t, a, Scalar(-1)); }

Var scale(Tape& t, Var a, Scalar c) {
  bool rg = t.requires_grad(a);
  Var out = t.emplace(t.val(a) * c, rg, "scale", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a, c](Tape& tp) { tp.grad(a) += tp.grad(out) * c; };
  }
  return out;
}

Var add_scalar(Tape& t, Var a, Scalar c) {
  bool rg = t.requires_grad(a);
  Var out = t.emplace(t.val(a) + c, rg, "add_scalar", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a](Tape& tp) { tp.grad(a) += tp.grad(out); };
  }
  return out;
}

Var rsub_scalar(Tape& t, Scalar c, Var a) {
  bool rg = t.requires_grad(a);
  Var out = t.emplace(c - t.val(a), rg, "rsub_scalar", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a](Tape& tp) { tp.grad(a) -= tp.grad(out); };
  }
  return out;
}

Var sigmoid(Tape& t, Var a) {
  // 0.5 * (1 + tanh(x/2)) is stable at both tails.
  Array y = (Scalar(0.5) * (Scalar(1) + (t.val(a) * Scalar(0.5)).tanh()));
  bool rg = t.requires_grad(a);
  Var out = t.emplace(std::move(y), rg, "sigmoid", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a](Tape& tp) {
      const Array& y = tp.val(out);
      tp.grad(a) += tp.grad(out) * y * (Scalar(1) - y);
    };
  }
  return out;
}

Var tanh_op(Tape& t, Var a) {
  bool rg = t.requires_grad(a);
  Var out = t.emplace(t.val(a).tanh(), rg, "tanh", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a](Tape& tp) {
      const Array& y = tp.val(out);
      tp.grad(a) += tp.grad(out) * (Scalar(1) - y * y);
    };
  }
  return out;
}

Var exp_op(Tape& t, Var a) {
  bool rg = t.requires_grad(a);
  Var out = t.emplace(t.val(a).exp(), rg, "exp", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a](Tape& tp) {
      tp.grad(a) += tp.grad(out) * tp.val(out);
    };
  }
  return out;
}

Var relu(Tape& t, Var a) {
  bool rg = t.requires_grad(a);
  Var out = t.emplace(t.val(a).max(Scalar(0)), rg, "relu", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a](Tape& tp) {
      tp.grad(a) += tp.grad(out) * (tp.val(a) > Scalar(0)).cast<Scalar>();
    };
  }
  return out;
}

Var min_op(Tape& t, Var a, Var b) {
  check_same_shape(t.val(a), t.val(b), "min");
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.emplace(t.val(a).min(t.val(b)), rg, "min", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a, b](Tape& tp) {
      const Array& g = tp.grad(out);
      Array take_a = (tp.val(a) <= tp.val(b)).cast<Scalar>();
      if (tp.requires_grad(a)) tp.grad(a) += g * take_a;
      if (tp.requires_grad(b)) tp.grad(b) += g * (Scalar(1) - take_a);
    };
  }
  return out;
}

Var row_scale(Tape& t, Var x, Var s) {
  const Array& xs = t.val(x);
  const Array& ss = t.val(s);
  if (ss.cols() != 1 || ss.rows() != xs.rows()) throw UsageError("row_scale: scaler must be B x 1");
  Array y = xs.colwise() * ss.col(0);
  bool rg = t.requires_grad(x) || t.requires_grad(s);
  Var out = t.emplace(std::move(y), rg, "row_scale", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x, s](Tape& tp) {
      const Array& g = tp.grad(out);
      if (tp.requires_grad(x)) tp.grad(x) += g.colwise() * tp.val(s).col(0);
      if (tp.requires_grad(s)) tp.grad(s).col(0) += (g * tp.val(x)).rowwise().sum();
    };
  }
  return out;
}

Var row_sub(Tape& t, Var s, Var x) {
  const Array& xs = t.val(x);
  const Array& ss = t.val(s);
  if (ss.cols() != 1 || ss.rows() != xs.rows()) throw UsageError("row_sub: scaler must be B x 1");
  Array y = (-xs).colwise() + ss.col(0);
  bool rg = t.requires_grad(x) || t.requires_grad(s);
  Var out = t.emplace(std::move(y), rg, "row_sub", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x, s](Tape& tp) {
      const Array& g = tp.grad(out);
      if (tp.requires_grad(s)) tp.grad(s).col(0) += g.rowwise().sum();
      if (tp.requires_grad(x)) tp.grad(x) -= g;
    };
  }
  return out;
}

Var affine(Tape& t, Var x, Var W, Var b) {
  const Array& xv = t.val(x);
  const Array& Wv = t.val(W);
  const Array& bv = t.val(b);
  if (xv.cols() != Wv.rows()) throw UsageError("affine: input width does not match weight rows");
  if (bv.rows() != 1 || bv.cols() != Wv.cols()) throw UsageError("affine: bias must be 1 x out");
  Array y = (xv.matrix() * Wv.matrix()).array().rowwise() + bv.row(0);
  bool rg = t.requires_grad(x) || t.requires_grad(W) || t.requires_grad(b);
  Var out = t.emplace(std::move(y), rg, "affine", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x, W, b](Tape& tp) {
      const Array& g = tp.grad(out);
      if (tp.requires_grad(x)) tp.grad(x).matrix() += g.matrix() * tp.val(W).matrix().transpose();
      if (tp.requires_grad(W)) tp.grad(W).matrix() += tp.val(x).matrix().transpose() * g.matrix();
      if (tp.requires_grad(b)) tp.grad(b).row(0) += g.colwise().sum();
    };
  }
  return out;
}

namespace {

// Row-wise log-softmax per contiguous group; writes both log-probs.
Array log_softmax_value(const Array& x, Index groups) {
  if (x.cols() % groups != 0) throw UsageError("softmax: group count does not divide columns");
  const Index gs = x.cols() / groups;
  Array y(x.rows(), x.cols());
  for (Index g = 0; g < groups; ++g) {
    auto blk = x.middleCols(g * gs, gs);
    ArrayCol m = blk.rowwise().maxCoeff();
    ArrayCol lse = ((blk.colwise() - m).exp().rowwise().sum()).log() + m;
    y.middleCols(g * gs, gs) = blk.colwise() - lse;
  }
  return y;
}

}  // namespace

Var softmax_groups(Tape& t, Var x, Index groups) {
  Array y = log_softmax_value(t.val(x), groups).exp();
  bool rg = t.requires_grad(x);
  const Index gs = t.val(x).cols() / groups;
  Var out = t.emplace(std::move(y), rg, "softmax", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x, groups, gs](Tape& tp) {
      const Array& p = tp.val(out);
      const Array& g = tp.grad(out);
      Array gx(p.rows(), p.cols());
      for (Index gi = 0; gi < groups; ++gi) {
        auto pb = p.middleCols(gi * gs, gs);
        auto gb = g.middleCols(gi * gs, gs);
        ArrayCol dot = (pb * gb).rowwise().sum();
        gx.middleCols(gi * gs, gs) = pb * (gb.colwise() - dot);
      }
      tp.grad(x) += gx;
    };
  }
  return out;
}

Var log_softmax_groups(Tape& t, Var x, Index groups) {
  Array y = log_softmax_value(t.val(x), groups);
  bool rg = t.requires_grad(x);
  const Index gs = t.val(x).cols() / groups;
  Var out = t.emplace(std::move(y), rg, "log_softmax", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x, groups, gs](Tape& tp) {
      const Array& ly = tp.val(out);
      const Array& g = tp.grad(out);
      Array gx(ly.rows(), ly.cols());
      for (Index gi = 0; gi < groups; ++gi) {
        auto lb = ly.middleCols(gi * gs, gs);
        auto gb = g.middleCols(gi * gs, gs);
        ArrayCol gsum = gb.rowwise().sum();
        gx.middleCols(gi * gs, gs) = gb - lb.exp().colwise() * gsum;
      }
      tp.grad(x) += gx;
    };
  }
  return out;
}

Var logsumexp(Tape& t, Var x, Index outer, Index mid, Index inner) {
  Array y = log_sum_exp_mid(t.val(x), outer, mid, inner);
  bool rg = t.requires_grad(x);
  Var out = t.emplace(std::move(y), rg, "logsumexp", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x, outer, mid, inner](Tape& tp) {
      const Array& xv = tp.val(x);
      const Array& yv = tp.val(out);
      const Array& g = tp.grad(out);
      Array& gx = tp.grad(x);
      for (Index o = 0; o < outer; ++o) {
        for (Index m = 0; m < mid; ++m) {
          for (Index i = 0; i < inner; ++i) {
            const Index xc = (o * mid + m) * inner + i;
            const Index oc = o * inner + i;
            // exp(x - y) is the softmax weight; all-(-inf) slices (y = -inf)
            // are constant, so their gradient is defined as zero.
            for (Index r = 0; r < xv.rows(); ++r) {
              const Scalar yy = yv(r, oc);
              if (yy == kNegInf) continue;
              gx(r, xc) += g(r, oc) * std::exp(xv(r, xc) - yy);
            }
          }
        }
      }
    };
  }
  return out;
}

Var logaddexp(Tape& t, Var a, Var b) {
  check_same_shape(t.val(a), t.val(b), "logaddexp");
  const Array& av = t.val(a);
  const Array& bv = t.val(b);
  Array y(av.rows(), av.cols());
  for (Index c = 0; c < av.cols(); ++c)
    for (Index r = 0; r < av.rows(); ++r) y(r, c) = log_add_exp(av(r, c), bv(r, c));
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  Var out = t.emplace(std::move(y), rg, "logaddexp", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, a, b](Tape& tp) {
      const Array& yv = tp.val(out);
      const Array& g = tp.grad(out);
      auto weight = [&](const Array& src) {
        Array w(src.rows(), src.cols());
        for (Index c = 0; c < src.cols(); ++c)
          for (Index r = 0; r < src.rows(); ++r) {
            const Scalar yy = yv(r, c);
            w(r, c) = (yy == kNegInf) ? Scalar(0) : std::exp(src(r, c) - yy);
          }
        return w;
      };
      if (tp.requires_grad(a)) tp.grad(a) += g * weight(tp.val(a));
      if (tp.requires_grad(b)) tp.grad(b) += g * weight(tp.val(b));
    };
  }
  return out;
}

Var concat_cols(Tape& t, const std::vector<Var>& xs) {
  if (xs.empty()) throw UsageError("concat: no inputs");
  Index rows = t.val(xs[0]).rows();
  Index cols = 0;
  bool rg = false;
  for (Var v : xs) {
    if (t.val(v).rows() != rows) throw UsageError("concat: row mismatch");
    cols += t.val(v).cols();
    rg = rg || t.requires_grad(v);
  }
  Array y(rows, cols);
  Index at = 0;
  for (Var v : xs) {
    y.middleCols(at, t.val(v).cols()) = t.val(v);
    at += t.val(v).cols();
  }
  Var out = t.emplace(std::move(y), rg, "concat", nullptr);
  if (rg) {
    std::vector<Var> inputs = xs;
    t.nodes_ref(out).backward = [out, inputs](Tape& tp) {
      const Array& g = tp.grad(out);
      Index at = 0;
      for (Var v : inputs) {
        const Index w = tp.val(v).cols();
        if (tp.requires_grad(v)) tp.grad(v) += g.middleCols(at, w);
        at += w;
      }
    };
  }
  return out;
}

Var slice_cols(Tape& t, Var x, Index start, Index len) {
  const Array& xv = t.val(x);
  if (start < 0 || len < 0 || start + len > xv.cols()) throw UsageError("slice: out of range");
  bool rg = t.requires_grad(x);
  Var out = t.emplace(xv.middleCols(start, len), rg, "slice", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x, start, len](Tape& tp) {
      tp.grad(x).middleCols(start, len) += tp.grad(out);
    };
  }
  return out;
}

Var cumsum_cols(Tape& t, Var x) {
  const Array& xv = t.val(x);
  Array y(xv.rows(), xv.cols());
  ArrayCol acc = ArrayCol::Zero(xv.rows());
  for (Index c = 0; c < xv.cols(); ++c) {
    acc += xv.col(c);
    y.col(c) = acc;
  }
  bool rg = t.requires_grad(x);
  Var out = t.emplace(std::move(y), rg, "cumsum", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x](Tape& tp) {
      const Array& g = tp.grad(out);
      ArrayCol acc = ArrayCol::Zero(g.rows());
      Array& gx = tp.grad(x);
      for (Index c = g.cols() - 1; c >= 0; --c) {
        acc += g.col(c);
        gx.col(c) += acc;
      }
    };
  }
  return out;
}

Var row_sum(Tape& t, Var x) {
  bool rg = t.requires_grad(x);
  Array y = t.val(x).rowwise().sum();
  Var out = t.emplace(std::move(y), rg, "row_sum", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x](Tape& tp) {
      tp.grad(x).colwise() += tp.grad(out).col(0);
    };
  }
  return out;
}

Var sum_all(Tape& t, Var x) {
  bool rg = t.requires_grad(x);
  Array y(1, 1);
  y(0, 0) = t.val(x).sum();
  Var out = t.emplace(std::move(y), rg, "sum_all", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, x](Tape& tp) {
      tp.grad(x) += tp.grad(out)(0, 0);
    };
  }
  return out;
}

Var mean_all(Tape& t, Var x) {
  const Scalar n = static_cast<Scalar>(t.val(x).size());
  return scale(t, sum_all(t, x), Scalar(1) / n);
}

Var pick(Tape& t, Var x, const std::vector<Index>& idx) {
  const Array& xv = t.val(x);
  if (static_cast<Index>(idx.size()) != xv.rows()) throw UsageError("pick: one index per row required");
  Array y(xv.rows(), 1);
  for (Index r = 0; r < xv.rows(); ++r) {
    const Index c = idx[static_cast<std::size_t>(r)];
    if (c < 0 || c >= xv.cols()) throw UsageError("pick: column index out of range");
    y(r, 0) = xv(r, c);
  }
  bool rg = t.requires_grad(x);
  Var out = t.emplace(std::move(y), rg, "pick", nullptr);
  if (rg) {
    std::vector<Index> indices = idx;
    t.nodes_ref(out).backward = [out, x, indices](Tape& tp) {
      const Array& g = tp.grad(out);
      Array& gx = tp.grad(x);
      for (Index r = 0; r < g.rows(); ++r) gx(r, indices[static_cast<std::size_t>(r)]) += g(r, 0);
    };
  }
  return out;
}

Var weighted_sum_blocks(Tape& t, Var coeffs, Var blocks, Index m) {
  const Array& c = t.val(coeffs);
  const Array& v = t.val(blocks);
  if (v.cols() != c.cols() * m) throw UsageError("weighted_sum_blocks: block width mismatch");
  Array y = Array::Zero(c.rows(), m);
  for (Index i = 0; i < c.cols(); ++i) {
    y += v.middleCols(i * m, m).colwise() * c.col(i);
  }
  bool rg = t.requires_grad(coeffs) || t.requires_grad(blocks);
  Var out = t.emplace(std::move(y), rg, "weighted_sum_blocks", nullptr);
  if (rg) {
    t.nodes_ref(out).backward = [out, coeffs, blocks, m](Tape& tp) {
      const Array& g = tp.grad(out);
      const Array& c = tp.val(coeffs);
      const Array& v = tp.val(blocks);
      for (Index i = 0; i < c.cols(); ++i) {
        if (tp.requires_grad(coeffs)) {
          tp.grad(coeffs).col(i) += (g * v.middleCols(i * m, m)).rowwise().sum();
        }
        if (tp.requires_grad(blocks)) {
          tp.grad(blocks).middleCols(i * m, m) += g.colwise() * c.col(i);
        }
      }
    };
  }
  return out;
}

Var detach(Tape& t, Var x) { return t.constant(t.val(x)); }

Var zeros(Tape& t, Index rows, Index cols) { return t.constant(Array::Zero(rows, cols)); }

}  // namespace stackrnn
