#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ensers/autodiff/ops.hpp"

namespace ensers::ad {

/// d(output)/d(target) for each target, as plain tensors. The tape is not
/// extended. Targets may be leaves or intermediate nodes; a target that the
/// output does not depend on yields zeros of its shape.
std::vector<Tensor> gradient(Var output, std::span<const Var> targets);

/// Same derivatives, recorded on the tape as new nodes so they can be
/// differentiated again (backward rules are emitted as recorded ops).
std::vector<Var> gradient_graph(Var output, std::span<const Var> targets);

inline Tensor gradient(Var output, Var target) { return gradient(output, std::span<const Var>(&target, 1))[0]; }
inline Var gradient_graph(Var output, Var target) {
  return gradient_graph(output, std::span<const Var>(&target, 1))[0];
}

/// A scalar function recorded onto a fresh tape from a differentiable input.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Max over components of |analytic - central difference| / (|central difference| + 1e-12).
double check_gradient(const ScalarFn& f, const Tensor& at, double step);

/// Hessian-vector product H(at) v via gradient-of-gradient.
Tensor hessian_vector(const ScalarFn& f, const Tensor& at, const Tensor& v);

/// Compares hessian_vector against central differences of the analytic
/// gradient along v; same relative error measure as check_gradient.
double check_hessian_vector(const ScalarFn& f, const Tensor& at, const Tensor& v, double step);

/// Analytic gradient of f at a point (helper for oracles and tests).
Tensor gradient_at(const ScalarFn& f, const Tensor& at);
/// Value of f at a point.
double value_at(const ScalarFn& f, const Tensor& at);

/// Max over components of |a - b| / (|b| + 1e-12).
double max_relative_error(const Tensor& analytic, const Tensor& reference);

}  // namespace ensers::ad
