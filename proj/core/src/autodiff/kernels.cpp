#include "ensers/autodiff/kernels.hpp"

#include <cmath>
#include <string>

#include "ensers/error.hpp"

namespace ensers::ad {
namespace {

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     to_string(t.shape()));
  }
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch(op, a.shape(), b.shape());
}

template <class F>
Tensor unary(const Tensor& x, F&& f) {
  Tensor out(x.shape());
  const double* in = x.raw();
  double* o = out.raw();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = f(in[i]);
  return out;
}

template <class F>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F&& f) {
  require_same(op, a, b);
  Tensor out(a.shape());
  const double* x = a.raw();
  const double* y = b.raw();
  double* o = out.raw();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = f(x[i], y[i]);
  return out;
}

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

}  // namespace

IndexList make_index(std::vector<std::size_t> indices) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(indices));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("subtract", a, b, [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("multiply", a, b, [](double x, double y) { return x * y; });
}
Tensor neg(const Tensor& a) {
  return unary(a, [](double x) { return -x; });
}
Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; });
}
Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t ka = transpose_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (ka != kb) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + (transpose_a ? "^T" : "") +
                     " x " + to_string(b.shape()) + (transpose_b ? "^T" : ""));
  }
  // Every output element accumulates over k in ascending order, whatever the
  // row count, so a batched product equals the row-by-row products exactly.
  Tensor out(Shape{m, n});
  const double* A = a.raw();
  const double* B = b.raw();
  double* C = out.raw();
  const std::size_t k = ka;
  if (!transpose_a && !transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* c = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
      }
    }
  } else if (transpose_a && !transpose_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = A + p * m;
      const double* brow = B + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = arow[i];
        double* c = C + i * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
      }
    }
  } else if (!transpose_a && transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = A + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = B + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        C[i * n + j] = acc;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += A[p * m + i] * B[j * k + p];
        C[i * n + j] = acc;
      }
    }
  }
  return out;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_rank("matvec", a, 2);
  require_rank("matvec", x, 1);
  if (a.dim(1) != x.dim(0)) mismatch("matvec", a.shape(), x.shape());
  const std::size_t m = a.dim(0), k = a.dim(1);
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a.raw() + i * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += row[p] * x[p];
    out[i] = acc;
  }
  return out;
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& b) {
  require_rank("add_row_broadcast", a, 2);
  require_rank("add_row_broadcast", b, 1);
  if (a.dim(1) != b.dim(0)) mismatch("add_row_broadcast", a.shape(), b.shape());
  Tensor out = a;
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.raw() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += b[c];
  }
  return out;
}

Tensor repeat_rows(const Tensor& v, std::size_t n) {
  require_rank("repeat_rows", v, 1);
  const std::size_t k = v.dim(0);
  Tensor out(Shape{n, k});
  for (std::size_t r = 0; r < n; ++r) std::copy(v.raw(), v.raw() + k, out.raw() + r * k);
  return out;
}

Tensor sum_rows(const Tensor& a) {
  require_rank("sum_rows", a, 2);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor out(Shape{cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a.raw() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor out(Shape{cols, rows});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  if (a.dim(0) != b.dim(0)) mismatch("concat_cols", a.shape(), b.shape());
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor out(Shape{rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(a.raw() + r * ca, a.raw() + (r + 1) * ca, out.raw() + r * (ca + cb));
    std::copy(b.raw() + r * cb, b.raw() + (r + 1) * cb, out.raw() + r * (ca + cb) + ca);
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t offset, std::size_t width) {
  require_rank("slice_cols", a, 2);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (offset + width > cols) {
    throw ShapeError("slice_cols: columns [" + std::to_string(offset) + ", " + std::to_string(offset + width) +
                     ") exceed shape " + to_string(a.shape()));
  }
  Tensor out(Shape{rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(a.raw() + r * cols + offset, a.raw() + r * cols + offset + width, out.raw() + r * width);
  }
  return out;
}

Tensor embed_cols(const Tensor& a, std::size_t offset, std::size_t total) {
  require_rank("embed_cols", a, 2);
  const std::size_t rows = a.dim(0), width = a.dim(1);
  if (offset + width > total) {
    throw ShapeError("embed_cols: " + to_string(a.shape()) + " at column " + std::to_string(offset) +
                     " does not fit in width " + std::to_string(total));
  }
  Tensor out(Shape{rows, total});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(a.raw() + r * width, a.raw() + (r + 1) * width, out.raw() + r * total + offset);
  }
  return out;
}

Tensor gather(const Tensor& x, const IndexList& idx, const Shape& out_shape) {
  const auto& ix = *idx;
  Shape shape = out_shape.empty() ? Shape{ix.size()} : out_shape;
  if (numel(shape) != ix.size()) {
    throw ShapeError("gather: " + std::to_string(ix.size()) + " indices cannot fill shape " + to_string(shape));
  }
  Tensor out(std::move(shape));
  const std::size_t n = x.size();
  for (std::size_t j = 0; j < ix.size(); ++j) {
    if (ix[j] >= n) {
      throw ShapeError("gather: index " + std::to_string(ix[j]) + " out of range for shape " + to_string(x.shape()));
    }
    out[j] = x[ix[j]];
  }
  return out;
}

Tensor scatter_add(const Tensor& g, const IndexList& idx, const Shape& shape) {
  const auto& ix = *idx;
  if (g.size() != ix.size()) {
    throw ShapeError("scatter_add: " + std::to_string(g.size()) + " values for " + std::to_string(ix.size()) +
                     " indices");
  }
  Tensor out(shape);
  for (std::size_t j = 0; j < ix.size(); ++j) {
    if (ix[j] >= out.size()) {
      throw ShapeError("scatter_add: index " + std::to_string(ix[j]) + " out of range for shape " +
                       to_string(shape));
    }
    out[ix[j]] += g[j];
  }
  return out;
}

Tensor reshape(const Tensor& x, const Shape& shape) { return x.reshaped(shape); }

Tensor slice(const Tensor& x, std::size_t offset, const Shape& shape) {
  const std::size_t n = numel(shape);
  if (offset + n > x.size()) {
    throw ShapeError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + n) +
                     ") exceeds shape " + to_string(x.shape()));
  }
  return Tensor(shape, std::vector<double>(x.raw() + offset, x.raw() + offset + n));
}

Tensor embed(const Tensor& x, std::size_t offset, const Shape& shape) {
  Tensor out(shape);
  if (offset + x.size() > out.size()) {
    throw ShapeError("embed: " + to_string(x.shape()) + " at offset " + std::to_string(offset) +
                     " does not fit in " + to_string(shape));
  }
  std::copy(x.raw(), x.raw() + x.size(), out.raw() + offset);
  return out;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::scalar(s);
}

Tensor mean(const Tensor& x) {
  if (x.empty()) throw ShapeError("mean: empty tensor");
  return Tensor::scalar(sum(x)[0] / static_cast<double>(x.size()));
}

Tensor expand(const Tensor& s, const Shape& shape) {
  if (s.size() != 1) throw ShapeError("expand: source must hold one value, got shape " + to_string(s.shape()));
  return Tensor(shape, s[0]);
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; });
}
Tensor pow(const Tensor& x, double exponent) {
  return unary(x, [exponent](double v) { return std::pow(v, exponent); });
}
Tensor sin(const Tensor& x) {
  return unary(x, [](double v) { return std::sin(v); });
}
Tensor cos(const Tensor& x) {
  return unary(x, [](double v) { return std::cos(v); });
}
Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); });
}
Tensor softplus(const Tensor& x) {
  // log(1 + e^v) without overflow for large |v|.
  return unary(x, [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
}
Tensor sigmoid(const Tensor& x) {
  return unary(x, [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}
Tensor clamp(const Tensor& x, double bound) {
  return unary(x, [bound](double v) { return std::clamp(v, -bound, bound); });
}
Tensor clamp_mask(const Tensor& x, double bound) {
  return unary(x, [bound](double v) { return std::abs(v) <= bound ? 1.0 : 0.0; });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same("mse", a, b);
  if (a.empty()) throw ShapeError("mse: empty operands");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    s += r * r;
  }
  return Tensor::scalar(s / static_cast<double>(a.size()));
}

Tensor huber(const Tensor& a, const Tensor& b, double delta) {
  require_same("huber", a, b);
  if (a.empty()) throw ShapeError("huber: empty operands");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = std::abs(a[i] - b[i]);
    s += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
  }
  return Tensor::scalar(s / static_cast<double>(a.size()));
}

Tensor stencil(const Tensor& x, const Stencil5& k, bool periodic, bool adjoint) {
  require_rank("stencil", x, 2);
  const std::size_t h = x.dim(0), w = x.dim(1);
  // Difference stencils are applied as sum k_i (x_i - x_centre) so that
  // constant fields map to exactly zero.
  double ksum = 0.0, kabs = 0.0;
  for (double v : k) {
    ksum += v;
    kabs += std::abs(v);
  }
  const bool centred = std::abs(ksum) <= 1e-12 * kabs;
  if (periodic) {
    if (h < 5 || w < 5) throw ShapeError("stencil: field " + to_string(x.shape()) + " smaller than 5x5 stencil");
    Tensor out(Shape{h, w});
    const int sign = adjoint ? -1 : 1;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double centre = centred ? x[r * w + c] : 0.0;
        double acc = 0.0;
        for (int dy = -2; dy <= 2; ++dy) {
          const double* row = x.raw() + wrap(static_cast<std::ptrdiff_t>(r) + sign * dy, h) * w;
          for (int dx = -2; dx <= 2; ++dx) {
            const double kv = k[static_cast<std::size_t>((dy + 2) * 5 + dx + 2)];
            if (kv != 0.0) acc += kv * (row[wrap(static_cast<std::ptrdiff_t>(c) + sign * dx, w)] - centre);
          }
        }
        out[r * w + c] = acc;
      }
    }
    return out;
  }
  if (!adjoint) {
    if (h < 5 || w < 5) throw ShapeError("stencil: field " + to_string(x.shape()) + " smaller than 5x5 stencil");
    const std::size_t oh = h - 4, ow = w - 4;
    Tensor out(Shape{oh, ow});
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        const double centre = centred ? x[(r + 2) * w + c + 2] : 0.0;
        double acc = 0.0;
        for (std::size_t dy = 0; dy < 5; ++dy) {
          const double* row = x.raw() + (r + dy) * w + c;
          for (std::size_t dx = 0; dx < 5; ++dx) acc += k[dy * 5 + dx] * (row[dx] - centre);
        }
        out[r * ow + c] = acc;
      }
    }
    return out;
  }
  // Transpose of the valid cross-correlation: scatter each interior value back.
  const std::size_t oh = h + 4, ow = w + 4;
  Tensor out(Shape{oh, ow});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double g = x[r * w + c];
      if (g == 0.0) continue;
      for (std::size_t dy = 0; dy < 5; ++dy) {
        double* row = out.raw() + (r + dy) * ow + c;
        for (std::size_t dx = 0; dx < 5; ++dx) row[dx] += k[dy * 5 + dx] * g;
      }
      if (centred) out[(r + 2) * ow + c + 2] -= ksum * g;
    }
  }
  return out;
}

}  // namespace ensers::ad
