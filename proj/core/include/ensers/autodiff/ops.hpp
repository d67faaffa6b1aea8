#pragma once

// Recorded counterparts of the kernels in kernels.hpp.

#include "ensers/autodiff/tape.hpp"

namespace ensers::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
Var matvec(Var a, Var x);
Var add_row_broadcast(Var a, Var b);
Var repeat_rows(Var v, std::size_t n);
Var sum_rows(Var a);
Var transpose(Var a);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t offset, std::size_t width);
Var embed_cols(Var a, std::size_t offset, std::size_t total);
Var gather(Var x, const IndexList& idx, const Shape& out_shape = {});
Var scatter_add(Var g, const IndexList& idx, const Shape& shape);
Var reshape(Var x, const Shape& shape);
Var slice(Var x, std::size_t offset, const Shape& shape);
Var embed(Var x, std::size_t offset, const Shape& shape);
Var sum(Var x);
Var mean(Var x);
Var expand(Var s, const Shape& shape);
Var square(Var x);
Var pow(Var x, double exponent);
Var sin(Var x);
Var cos(Var x);
Var tanh(Var x);
Var softplus(Var x);
Var sigmoid(Var x);
Var clamp(Var x, double bound);
Var mse(Var a, Var b);
Var huber(Var a, Var b, double delta = 1.0);
Var stencil(Var x, const Stencil5& k, bool periodic, bool adjoint = false);
Var stencil(Var x, const std::shared_ptr<const Stencil5>& k, bool periodic, bool adjoint = false);

/// Constant copy of a node's value; gradients do not flow through it.
Var detach(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }

}  // namespace ensers::ad
