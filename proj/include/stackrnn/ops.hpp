#pragma once

#include "stackrnn/tape.hpp"

#include <vector>

namespace stackrnn {

// Tape primitives. Each builds one node; backward closures accumulate into
// input gradients only when the input requires a gradient.

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var neg(Tape& t, Var a);
Var scale(Tape& t, Var a, Scalar c);
Var add_scalar(Tape& t, Var a, Scalar c);
// c - a, elementwise against a scalar constant
Var rsub_scalar(Tape& t, Scalar c, Var a);

Var sigmoid(Tape& t, Var a);
Var tanh_op(Tape& t, Var a);
Var exp_op(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var min_op(Tape& t, Var a, Var b);

// x: B x n, s: B x 1; every column of x combined with the per-row scalar.
Var row_scale(Tape& t, Var x, Var s);
Var row_sub(Tape& t, Var s, Var x);  // s - x, broadcast over columns

// y = x * W + b with x: B x in, W: in x out, b: 1 x out.
Var affine(Tape& t, Var x, Var W, Var b);

// Row-wise softmax / log-softmax within `groups` contiguous column groups of
// equal size. groups == 1 treats the whole row as one distribution.
Var softmax_groups(Tape& t, Var x, Index groups);
Var log_softmax_groups(Tape& t, Var x, Index groups);

// log(sum(exp)) over the middle axis of the column factorization
// outer * mid * inner. All-(-inf) slices give -inf and zero gradient.
Var logsumexp(Tape& t, Var x, Index outer, Index mid, Index inner);
Var logaddexp(Tape& t, Var a, Var b);

Var concat_cols(Tape& t, const std::vector<Var>& xs);
Var slice_cols(Tape& t, Var x, Index start, Index len);
Var cumsum_cols(Tape& t, Var x);
Var row_sum(Tape& t, Var x);    // B x n -> B x 1
Var sum_all(Tape& t, Var x);    // -> 1 x 1
Var mean_all(Tape& t, Var x);   // -> 1 x 1

// out[b, 0] = x(b, idx[b]) — per-row column gather.
Var pick(Tape& t, Var x, const std::vector<Index>& idx);

// coeffs: B x k, blocks: B x (k*m); out[b, j] = sum_i coeffs(b,i) * blocks(b, i*m+j).
Var weighted_sum_blocks(Tape& t, Var coeffs, Var blocks, Index m);

// Value passthrough that stops gradient flow.
Var detach(Tape& t, Var x);

Var zeros(Tape& t, Index rows, Index cols);

}  // namespace stackrnn
