#pragma once

// Numeric tensor kernels. Every differentiable operation on the tape has a
// kernel here with the same name, so backward rules can be written once and
// instantiated either on plain tensors or on recorded variables.

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "ensers/tensor.hpp"

namespace ensers::ad {

/// 5x5 cross-correlation weights, row-major [dy + 2][dx + 2].
using Stencil5 = std::array<double, 25>;
using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

IndexList make_index(std::vector<std::size_t> indices);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// op(a) * op(b) for rank-2 operands, op = transpose when the flag is set.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);
Tensor matvec(const Tensor& a, const Tensor& x);

/// a (n x k) + b (k) added to every row.
Tensor add_row_broadcast(const Tensor& a, const Tensor& b);
/// Vector v (k) stacked n times into an n x k matrix.
Tensor repeat_rows(const Tensor& v, std::size_t n);
/// Column sums of an n x k matrix.
Tensor sum_rows(const Tensor& a);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t offset, std::size_t width);
/// Inverse of slice_cols: place a into zero columns [offset, offset + width) of a total-wide matrix.
Tensor embed_cols(const Tensor& a, std::size_t offset, std::size_t total);

/// out[j] = x.flat[idx[j]], reshaped to out_shape (1-D when empty).
Tensor gather(const Tensor& x, const IndexList& idx, const Shape& out_shape = {});
/// out.flat[idx[j]] += g.flat[j] on a zero tensor of the given shape.
Tensor scatter_add(const Tensor& g, const IndexList& idx, const Shape& shape);

Tensor reshape(const Tensor& x, const Shape& shape);
/// Contiguous flat range [offset, offset + numel(shape)) viewed as shape.
Tensor slice(const Tensor& x, std::size_t offset, const Shape& shape);
/// Inverse of slice: x placed at flat offset inside zeros of the given shape.
Tensor embed(const Tensor& x, std::size_t offset, const Shape& shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Broadcast a single-element tensor to a shape.
Tensor expand(const Tensor& s, const Shape& shape);

Tensor square(const Tensor& x);
Tensor pow(const Tensor& x, double exponent);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor clamp(const Tensor& x, double bound);
/// 1 where |x| <= bound, else 0.
Tensor clamp_mask(const Tensor& x, double bound);

Tensor mse(const Tensor& a, const Tensor& b);
Tensor huber(const Tensor& a, const Tensor& b, double delta);

/// 5x5 cross-correlation of a rank-2 field.
///   periodic: output has the input shape, indices wrap.
///   otherwise: "valid" interior, output (H-4) x (W-4).
/// With adjoint set, applies the transpose of that linear map instead.
Tensor stencil(const Tensor& x, const Stencil5& k, bool periodic, bool adjoint = false);

}  // namespace ensers::ad
