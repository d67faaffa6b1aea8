#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "ensers/autodiff/kernels.hpp"
#include "ensers/tensor.hpp"

namespace ensers::ad {

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Neg,
  Scale,
  AddScalar,
  MatMul,
  MatVec,
  AddRowBroadcast,
  RepeatRows,
  SumRows,
  Transpose,
  ConcatCols,
  SliceCols,
  EmbedCols,
  Gather,
  ScatterAdd,
  Reshape,
  Slice,
  Embed,
  Sum,
  Mean,
  Expand,
  Square,
  Pow,
  Sin,
  Cos,
  Tanh,
  Softplus,
  Sigmoid,
  Clamp,
  Mse,
  Huber,
  Stencil,
};

const char* op_name(Op op) noexcept;

/// Non-tensor parameters of an operation. Unused fields stay defaulted.
struct Attrs {
  double scalar = 0.0;
  bool flag_a = false;
  bool flag_b = false;
  std::size_t offset = 0;
  std::size_t count = 0;
  Shape shape;
  IndexList index;
  std::shared_ptr<const Stencil5> kernel;
};

using NodeId = std::size_t;

struct Node {
  Op op = Op::Constant;
  std::uint8_t arity = 0;
  std::array<NodeId, 2> inputs{};
  Attrs attrs;
  Tensor value;
  bool requires_grad = false;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Append-only record of operations. Nodes are stored in creation order,
/// which is a topological order of the graph.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input. A non-empty name registers it for lookup.
  Var leaf(Tensor value, std::string name = {});
  /// Non-differentiable input.
  Var constant(Tensor value);
  Var record(Op op, Attrs attrs, std::initializer_list<Var> inputs);

  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  std::optional<Var> find_leaf(std::string_view name) const;
  const std::map<std::string, NodeId, std::less<>>& leaves() const noexcept { return named_; }

  /// Replace the value of a leaf or constant; call replay() to propagate.
  void set_value(Var input, Tensor value);
  /// Recompute every derived node from the current inputs, in tape order.
  void replay();

 private:
  Tensor evaluate(const Node& node) const;

  std::deque<Node> nodes_;
  std::map<std::string, NodeId, std::less<>> named_;
};

/// Forward value of an op applied to input values.
Tensor evaluate_op(Op op, const Attrs& attrs, const Tensor* a, const Tensor* b);

}  // namespace ensers::ad
