#include "ensers/autodiff/gradient.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "ensers/error.hpp"

namespace ensers::ad {
namespace {

Tensor stencil(const Tensor& x, const std::shared_ptr<const Stencil5>& k, bool periodic, bool adjoint) {
  return ad::stencil(x, *k, periodic, adjoint);
}

// Backward rules run against one of two backends: plain tensors (numeric
// adjoints) or recorded variables (adjoints that are themselves on the tape).
struct TensorBackend {
  using T = Tensor;
  const Tape& tape;

  const Tensor& in(const Node& n, int k) const { return tape.node(n.inputs[static_cast<std::size_t>(k)]).value; }
  const Tensor& out(NodeId id) const { return tape.node(id).value; }
  const Tensor& value_of(const Tensor& t) const { return t; }
  Tensor constant(Tensor t) const { return t; }

  static void accumulate(std::optional<Tensor>& slot, Tensor&& c) {
    if (!slot) {
      slot = std::move(c);
      return;
    }
    double* s = slot->raw();
    const double* v = c.raw();
    for (std::size_t i = 0; i < c.size(); ++i) s[i] += v[i];
  }
};

struct VarBackend {
  using T = Var;
  Tape& tape;

  Var in(const Node& n, int k) const { return Var(&tape, n.inputs[static_cast<std::size_t>(k)]); }
  Var out(NodeId id) const { return Var(&tape, id); }
  const Tensor& value_of(const Var& v) const { return v.value(); }
  Var constant(Tensor t) const { return tape.constant(std::move(t)); }

  static void accumulate(std::optional<Var>& slot, Var&& c) { slot = slot ? add(*slot, c) : c; }
};

template <class B, class T = typename B::T>
void backward_rule(const B& be, NodeId id, const Node& n, const T& g, std::array<bool, 2> need,
                   std::array<std::optional<T>, 2>& res) {
  const Attrs& at = n.attrs;
  auto x = [&](int k) -> decltype(auto) { return be.in(n, k); };
  auto in_shape = [&](int k) -> const Shape& { return be.value_of(be.in(n, k)).shape(); };

  switch (n.op) {
    case Op::Leaf:
    case Op::Constant: return;
    case Op::Add:
      if (need[0]) res[0] = g;
      if (need[1]) res[1] = g;
      return;
    case Op::Sub:
      if (need[0]) res[0] = g;
      if (need[1]) res[1] = neg(g);
      return;
    case Op::Mul:
      if (need[0]) res[0] = mul(g, x(1));
      if (need[1]) res[1] = mul(g, x(0));
      return;
    case Op::Neg: res[0] = neg(g); return;
    case Op::Scale: res[0] = scale(g, at.scalar); return;
    case Op::AddScalar: res[0] = g; return;
    case Op::MatMul: {
      const bool ta = at.flag_a, tb = at.flag_b;
      if (!ta && !tb) {
        if (need[0]) res[0] = matmul(g, x(1), false, true);
        if (need[1]) res[1] = matmul(x(0), g, true, false);
      } else if (!ta && tb) {
        if (need[0]) res[0] = matmul(g, x(1), false, false);
        if (need[1]) res[1] = matmul(g, x(0), true, false);
      } else if (ta && !tb) {
        if (need[0]) res[0] = matmul(x(1), g, false, true);
        if (need[1]) res[1] = matmul(x(0), g, false, false);
      } else {
        if (need[0]) res[0] = matmul(x(1), g, true, true);
        if (need[1]) res[1] = matmul(g, x(0), true, true);
      }
      return;
    }
    case Op::MatVec: {
      const std::size_t m = in_shape(0)[0], k = in_shape(0)[1];
      if (need[0]) res[0] = matmul(reshape(g, Shape{m, 1}), reshape(x(1), Shape{1, k}));
      if (need[1]) res[1] = reshape(matmul(reshape(g, Shape{1, m}), x(0)), Shape{k});
      return;
    }
    case Op::AddRowBroadcast:
      if (need[0]) res[0] = g;
      if (need[1]) res[1] = sum_rows(g);
      return;
    case Op::RepeatRows: res[0] = sum_rows(g); return;
    case Op::SumRows: res[0] = repeat_rows(g, in_shape(0)[0]); return;
    case Op::Transpose: res[0] = transpose(g); return;
    case Op::ConcatCols: {
      const std::size_t ca = in_shape(0)[1], cb = in_shape(1)[1];
      if (need[0]) res[0] = slice_cols(g, 0, ca);
      if (need[1]) res[1] = slice_cols(g, ca, cb);
      return;
    }
    case Op::SliceCols: res[0] = embed_cols(g, at.offset, in_shape(0)[1]); return;
    case Op::EmbedCols: res[0] = slice_cols(g, at.offset, in_shape(0)[1]); return;
    case Op::Gather: res[0] = scatter_add(g, at.index, in_shape(0)); return;
    case Op::ScatterAdd: res[0] = gather(g, at.index, in_shape(0)); return;
    case Op::Reshape: res[0] = reshape(g, in_shape(0)); return;
    case Op::Slice: res[0] = embed(g, at.offset, in_shape(0)); return;
    case Op::Embed: res[0] = slice(g, at.offset, in_shape(0)); return;
    case Op::Sum: res[0] = expand(g, in_shape(0)); return;
    case Op::Mean:
      res[0] = scale(expand(g, in_shape(0)), 1.0 / static_cast<double>(numel(in_shape(0))));
      return;
    case Op::Expand: res[0] = reshape(sum(g), in_shape(0)); return;
    case Op::Square: res[0] = mul(g, scale(x(0), 2.0)); return;
    case Op::Pow: res[0] = mul(g, scale(pow(x(0), at.scalar - 1.0), at.scalar)); return;
    case Op::Sin: res[0] = mul(g, cos(x(0))); return;
    case Op::Cos: res[0] = neg(mul(g, sin(x(0)))); return;
    case Op::Tanh: res[0] = mul(g, add_scalar(neg(square(be.out(id))), 1.0)); return;
    case Op::Softplus: res[0] = mul(g, sigmoid(x(0))); return;
    case Op::Sigmoid: {
      decltype(auto) y = be.out(id);
      res[0] = mul(g, mul(y, add_scalar(neg(y), 1.0)));
      return;
    }
    case Op::Clamp: res[0] = mul(g, be.constant(clamp_mask(be.value_of(x(0)), at.scalar))); return;
    case Op::Mse:
    case Op::Huber: {
      const Shape& shape = in_shape(0);
      const double inv_n = 1.0 / static_cast<double>(numel(shape));
      auto r = sub(x(0), x(1));
      auto d = n.op == Op::Mse ? mul(expand(g, shape), scale(r, 2.0 * inv_n))
                               : mul(expand(g, shape), scale(clamp(r, at.scalar), inv_n));
      if (need[1]) res[1] = neg(d);
      if (need[0]) res[0] = std::move(d);
      return;
    }
    case Op::Stencil: res[0] = stencil(g, at.kernel, at.flag_a, !at.flag_b); return;
  }
}

template <class B, class T = typename B::T>
std::vector<T> reverse_sweep(const B& be, const Tape& tape, Var output, std::span<const Var> targets) {
  if (output.value().size() != 1) {
    throw ShapeError("gradient: output must be scalar, got shape " + to_string(output.shape()));
  }
  const NodeId out = output.id();
  NodeId lo = out;
  for (const Var& t : targets) {
    if (&t.tape() != &tape) throw Error("gradient: target belongs to a different tape");
    if (!t.requires_grad()) {
      throw Error("gradient: target node " + std::to_string(t.id()) + " does not require grad");
    }
    lo = std::min(lo, t.id());
  }

  std::vector<char> depends(out + 1, 0);
  for (const Var& t : targets) {
    if (t.id() <= out) depends[t.id()] = 1;
  }
  for (NodeId i = lo; i <= out; ++i) {
    if (depends[i]) continue;
    const Node& n = tape.node(i);
    for (std::uint8_t k = 0; k < n.arity; ++k) {
      if (n.inputs[k] >= lo && depends[n.inputs[k]]) {
        depends[i] = 1;
        break;
      }
    }
  }
  std::vector<char> is_target(out + 1, 0);
  for (const Var& t : targets) {
    if (t.id() <= out) is_target[t.id()] = 1;
  }

  std::vector<std::optional<T>> adj(out + 1);
  if (depends[out]) adj[out] = be.constant(Tensor(output.shape(), 1.0));

  for (NodeId i = out + 1; i-- > lo;) {
    if (!adj[i]) continue;
    const Node& n = tape.node(i);
    std::array<bool, 2> need{false, false};
    bool any = false;
    for (std::uint8_t k = 0; k < n.arity; ++k) {
      need[k] = n.inputs[k] >= lo && depends[n.inputs[k]];
      any = any || need[k];
    }
    if (any) {
      std::array<std::optional<T>, 2> res;
      backward_rule(be, i, n, *adj[i], need, res);
      for (std::uint8_t k = 0; k < n.arity; ++k) {
        if (need[k] && res[k]) B::accumulate(adj[n.inputs[k]], std::move(*res[k]));
      }
    }
    if (!is_target[i]) adj[i].reset();
  }

  std::vector<T> result;
  result.reserve(targets.size());
  for (const Var& t : targets) {
    if (t.id() <= out && adj[t.id()]) {
      result.push_back(*adj[t.id()]);
    } else {
      result.push_back(be.constant(Tensor(t.shape(), 0.0)));
    }
  }
  return result;
}

}  // namespace

std::vector<Tensor> gradient(Var output, std::span<const Var> targets) {
  TensorBackend be{output.tape()};
  return reverse_sweep(be, output.tape(), output, targets);
}

std::vector<Var> gradient_graph(Var output, std::span<const Var> targets) {
  VarBackend be{output.tape()};
  return reverse_sweep(be, output.tape(), output, targets);
}

double max_relative_error(const Tensor& analytic, const Tensor& reference) {
  if (analytic.size() != reference.size()) {
    throw ShapeError("max_relative_error: " + to_string(analytic.shape()) + " vs " + to_string(reference.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - reference[i]) / (std::abs(reference[i]) + 1e-12));
  }
  return worst;
}

double value_at(const ScalarFn& f, const Tensor& at) {
  Tape tape;
  Var x = tape.leaf(at);
  const double v = f(tape, x).value().item();
  if (!std::isfinite(v)) throw NonFiniteError("check_gradient: function is not finite at probe point");
  return v;
}

Tensor gradient_at(const ScalarFn& f, const Tensor& at) {
  Tape tape;
  Var x = tape.leaf(at);
  Var y = f(tape, x);
  return gradient(y, x);
}

double check_gradient(const ScalarFn& f, const Tensor& at, double step) {
  const Tensor analytic = gradient_at(f, at);
  Tensor central(at.shape());
  for (std::size_t i = 0; i < at.size(); ++i) {
    Tensor plus = at, minus = at;
    plus[i] += step;
    minus[i] -= step;
    central[i] = (value_at(f, plus) - value_at(f, minus)) / (2.0 * step);
  }
  return max_relative_error(analytic, central);
}

Tensor hessian_vector(const ScalarFn& f, const Tensor& at, const Tensor& v) {
  Tape tape;
  Var x = tape.leaf(at);
  Var y = f(tape, x);
  Var g = gradient_graph(y, x);
  Var gv = sum(mul(g, tape.constant(v)));
  if (!gv.requires_grad()) return Tensor(at.shape(), 0.0);
  return gradient(gv, x);
}

double check_hessian_vector(const ScalarFn& f, const Tensor& at, const Tensor& v, double step) {
  const Tensor hv = hessian_vector(f, at, v);
  Tensor plus = at, minus = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    plus[i] += step * v[i];
    minus[i] -= step * v[i];
  }
  const Tensor gp = gradient_at(f, plus), gm = gradient_at(f, minus);
  Tensor central(at.shape());
  for (std::size_t i = 0; i < at.size(); ++i) central[i] = (gp[i] - gm[i]) / (2.0 * step);
  return max_relative_error(hv, central);
}

}  // namespace ensers::ad
