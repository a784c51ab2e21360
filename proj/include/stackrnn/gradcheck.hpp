#pragma once

#include "stackrnn/ops.hpp"

#include <functional>

namespace stackrnn {

// Scalar-valued function recorded on a fresh tape at the given parameters.
using TapeFunction = std::function<Var(Tape&, ParamStore&)>;

// Compares tape gradients against central finite differences coordinate by
// coordinate over every parameter in `point`. Returns the worst relative
// error; below 1e-8 magnitude the comparison falls back to absolute error.
Scalar check_gradients(const TapeFunction& f, ParamStore& point, Scalar step);

}  // namespace stackrnn
