#include "ensers/autodiff/ops.hpp"

namespace ensers::ad {
namespace {

Attrs with_scalar(double s) {
  Attrs a;
  a.scalar = s;
  return a;
}

Attrs with_shape(Shape shape) {
  Attrs a;
  a.shape = std::move(shape);
  return a;
}

Attrs with_range(std::size_t offset, std::size_t count) {
  Attrs a;
  a.offset = offset;
  a.count = count;
  return a;
}

}  // namespace

Var add(Var a, Var b) { return a.tape().record(Op::Add, {}, {a, b}); }
Var sub(Var a, Var b) { return a.tape().record(Op::Sub, {}, {a, b}); }
Var mul(Var a, Var b) { return a.tape().record(Op::Mul, {}, {a, b}); }
Var neg(Var a) { return a.tape().record(Op::Neg, {}, {a}); }
Var scale(Var a, double s) { return a.tape().record(Op::Scale, with_scalar(s), {a}); }
Var add_scalar(Var a, double s) { return a.tape().record(Op::AddScalar, with_scalar(s), {a}); }

Var matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  Attrs at;
  at.flag_a = transpose_a;
  at.flag_b = transpose_b;
  return a.tape().record(Op::MatMul, std::move(at), {a, b});
}

Var matvec(Var a, Var x) { return a.tape().record(Op::MatVec, {}, {a, x}); }
Var add_row_broadcast(Var a, Var b) { return a.tape().record(Op::AddRowBroadcast, {}, {a, b}); }
Var repeat_rows(Var v, std::size_t n) { return v.tape().record(Op::RepeatRows, with_range(0, n), {v}); }
Var sum_rows(Var a) { return a.tape().record(Op::SumRows, {}, {a}); }
Var transpose(Var a) { return a.tape().record(Op::Transpose, {}, {a}); }
Var concat_cols(Var a, Var b) { return a.tape().record(Op::ConcatCols, {}, {a, b}); }

Var slice_cols(Var a, std::size_t offset, std::size_t width) {
  return a.tape().record(Op::SliceCols, with_range(offset, width), {a});
}

Var embed_cols(Var a, std::size_t offset, std::size_t total) {
  return a.tape().record(Op::EmbedCols, with_range(offset, total), {a});
}

Var gather(Var x, const IndexList& idx, const Shape& out_shape) {
  Attrs at = with_shape(out_shape);
  at.index = idx;
  return x.tape().record(Op::Gather, std::move(at), {x});
}

Var scatter_add(Var g, const IndexList& idx, const Shape& shape) {
  Attrs at = with_shape(shape);
  at.index = idx;
  return g.tape().record(Op::ScatterAdd, std::move(at), {g});
}

Var reshape(Var x, const Shape& shape) { return x.tape().record(Op::Reshape, with_shape(shape), {x}); }

Var slice(Var x, std::size_t offset, const Shape& shape) {
  Attrs at = with_shape(shape);
  at.offset = offset;
  return x.tape().record(Op::Slice, std::move(at), {x});
}

Var embed(Var x, std::size_t offset, const Shape& shape) {
  Attrs at = with_shape(shape);
  at.offset = offset;
  return x.tape().record(Op::Embed, std::move(at), {x});
}

Var sum(Var x) { return x.tape().record(Op::Sum, {}, {x}); }
Var mean(Var x) { return x.tape().record(Op::Mean, {}, {x}); }
Var expand(Var s, const Shape& shape) { return s.tape().record(Op::Expand, with_shape(shape), {s}); }
Var square(Var x) { return x.tape().record(Op::Square, {}, {x}); }
Var pow(Var x, double exponent) { return x.tape().record(Op::Pow, with_scalar(exponent), {x}); }
Var sin(Var x) { return x.tape().record(Op::Sin, {}, {x}); }
Var cos(Var x) { return x.tape().record(Op::Cos, {}, {x}); }
Var tanh(Var x) { return x.tape().record(Op::Tanh, {}, {x}); }
Var softplus(Var x) { return x.tape().record(Op::Softplus, {}, {x}); }
Var sigmoid(Var x) { return x.tape().record(Op::Sigmoid, {}, {x}); }
Var clamp(Var x, double bound) { return x.tape().record(Op::Clamp, with_scalar(bound), {x}); }
Var mse(Var a, Var b) { return a.tape().record(Op::Mse, {}, {a, b}); }
Var huber(Var a, Var b, double delta) { return a.tape().record(Op::Huber, with_scalar(delta), {a, b}); }

Var stencil(Var x, const std::shared_ptr<const Stencil5>& k, bool periodic, bool adjoint) {
  Attrs at;
  at.kernel = k;
  at.flag_a = periodic;
  at.flag_b = adjoint;
  return x.tape().record(Op::Stencil, std::move(at), {x});
}

Var stencil(Var x, const Stencil5& k, bool periodic, bool adjoint) {
  return stencil(x, std::make_shared<const Stencil5>(k), periodic, adjoint);
}

Var detach(Var x) { return x.tape().constant(x.value()); }

}  // namespace ensers::ad
