#include "stackrnn/gradcheck.hpp"

#include <cmath>

namespace stackrnn {

namespace {

Scalar eval_scalar(const TapeFunction& f, ParamStore& point) {
  Tape tape;
  Var loss = f(tape, point);
  const Array& v = tape.val(loss);
  if (v.size() != 1) throw UsageError("check_gradients: function must be scalar-valued");
  const Scalar y = v(0, 0);
  if (!std::isfinite(y)) throw NumericalError("check_gradients: non-finite function value at probe");
  return y;
}

}  // namespace

Scalar check_gradients(const TapeFunction& f, ParamStore& point, Scalar step) {
  if (!(step > Scalar(0))) throw UsageError("check_gradients: step must be positive");

  Tape tape;
  Var loss = f(tape, point);
  if (tape.val(loss).size() != 1) throw UsageError("check_gradients: function must be scalar-valued");
  if (!std::isfinite(tape.val(loss)(0, 0))) {
    throw NumericalError("check_gradients: non-finite function value at probe");
  }
  GradientMap grads = tape.backward(loss, point);

  Scalar worst = Scalar(0);
  for (const auto& name : point.names()) {
    Array& p = point.at(name);
    const Array& g = grads.at(name);
    for (Index c = 0; c < p.cols(); ++c) {
      for (Index r = 0; r < p.rows(); ++r) {
        const Scalar saved = p(r, c);
        p(r, c) = saved + step;
        const Scalar up = eval_scalar(f, point);
        p(r, c) = saved - step;
        const Scalar down = eval_scalar(f, point);
        p(r, c) = saved;
        const Scalar numeric = (up - down) / (Scalar(2) * step);
        const Scalar analytic = g(r, c);
        const Scalar mag = std::max(std::abs(numeric), std::abs(analytic));
        const Scalar err = mag < Scalar(1e-8) ? std::abs(numeric - analytic)
                                              : std::abs(numeric - analytic) / mag;
        if (err > worst) worst = err;
      }
    }
  }
  return worst;
}

}  // namespace stackrnn
