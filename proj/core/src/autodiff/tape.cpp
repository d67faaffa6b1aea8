#include "ensers/autodiff/tape.hpp"

#include "ensers/error.hpp"

namespace ensers::ad {

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "subtract";
    case Op::Mul: return "multiply";
    case Op::Neg: return "negate";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MatMul: return "matmul";
    case Op::MatVec: return "matvec";
    case Op::AddRowBroadcast: return "add_row_broadcast";
    case Op::RepeatRows: return "repeat_rows";
    case Op::SumRows: return "sum_rows";
    case Op::Transpose: return "transpose";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceCols: return "slice_cols";
    case Op::EmbedCols: return "embed_cols";
    case Op::Gather: return "gather";
    case Op::ScatterAdd: return "scatter_add";
    case Op::Reshape: return "reshape";
    case Op::Slice: return "slice";
    case Op::Embed: return "embed";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Expand: return "expand";
    case Op::Square: return "square";
    case Op::Pow: return "pow";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tanh: return "tanh";
    case Op::Softplus: return "softplus";
    case Op::Sigmoid: return "sigmoid";
    case Op::Clamp: return "clamp";
    case Op::Mse: return "mse";
    case Op::Huber: return "huber";
    case Op::Stencil: return "stencil";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->node(id_).value; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Tensor evaluate_op(Op op, const Attrs& at, const Tensor* a, const Tensor* b) {
  switch (op) {
    case Op::Leaf:
    case Op::Constant: throw Error("evaluate_op: inputs have no forward rule");
    case Op::Add: return add(*a, *b);
    case Op::Sub: return sub(*a, *b);
    case Op::Mul: return mul(*a, *b);
    case Op::Neg: return neg(*a);
    case Op::Scale: return scale(*a, at.scalar);
    case Op::AddScalar: return add_scalar(*a, at.scalar);
    case Op::MatMul: return matmul(*a, *b, at.flag_a, at.flag_b);
    case Op::MatVec: return matvec(*a, *b);
    case Op::AddRowBroadcast: return add_row_broadcast(*a, *b);
    case Op::RepeatRows: return repeat_rows(*a, at.count);
    case Op::SumRows: return sum_rows(*a);
    case Op::Transpose: return transpose(*a);
    case Op::ConcatCols: return concat_cols(*a, *b);
    case Op::SliceCols: return slice_cols(*a, at.offset, at.count);
    case Op::EmbedCols: return embed_cols(*a, at.offset, at.count);
    case Op::Gather: return gather(*a, at.index, at.shape);
    case Op::ScatterAdd: return scatter_add(*a, at.index, at.shape);
    case Op::Reshape: return reshape(*a, at.shape);
    case Op::Slice: return slice(*a, at.offset, at.shape);
    case Op::Embed: return embed(*a, at.offset, at.shape);
    case Op::Sum: return sum(*a);
    case Op::Mean: return mean(*a);
    case Op::Expand: return expand(*a, at.shape);
    case Op::Square: return square(*a);
    case Op::Pow: return pow(*a, at.scalar);
    case Op::Sin: return sin(*a);
    case Op::Cos: return cos(*a);
    case Op::Tanh: return tanh(*a);
    case Op::Softplus: return softplus(*a);
    case Op::Sigmoid: return sigmoid(*a);
    case Op::Clamp: return clamp(*a, at.scalar);
    case Op::Mse: return mse(*a, *b);
    case Op::Huber: return huber(*a, *b, at.scalar);
    case Op::Stencil: return stencil(*a, *at.kernel, at.flag_a, at.flag_b);
  }
  throw Error("evaluate_op: unknown op");
}

Var Tape::leaf(Tensor value, std::string name) {
  if (!value.all_finite()) throw NonFiniteError("leaf '" + name + "' holds non-finite values");
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const NodeId id = nodes_.size() - 1;
  if (!name.empty()) named_[std::move(name)] = id;
  return Var(this, id);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Op op, Attrs attrs, std::initializer_list<Var> inputs) {
  Node n;
  n.op = op;
  n.arity = static_cast<std::uint8_t>(inputs.size());
  std::size_t k = 0;
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw Error(std::string(op_name(op)) + ": input belongs to a different tape");
    n.inputs[k++] = v.id();
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  n.attrs = std::move(attrs);
  n.value = evaluate(n);
  if (!n.value.all_finite()) {
    throw NonFiniteError(std::string(op_name(op)) + ": produced non-finite values (node " +
                         std::to_string(nodes_.size()) + ")");
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::evaluate(const Node& n) const {
  const Tensor* a = n.arity > 0 ? &nodes_[n.inputs[0]].value : nullptr;
  const Tensor* b = n.arity > 1 ? &nodes_[n.inputs[1]].value : nullptr;
  return evaluate_op(n.op, n.attrs, a, b);
}

std::optional<Var> Tape::find_leaf(std::string_view name) const {
  auto it = named_.find(name);
  if (it == named_.end()) return std::nullopt;
  return Var(const_cast<Tape*>(this), it->second);
}

void Tape::set_value(Var input, Tensor value) {
  Node& n = nodes_.at(input.id());
  if (n.op != Op::Leaf && n.op != Op::Constant) throw Error("set_value: node is not an input");
  if (n.value.shape() != value.shape()) {
    throw ShapeError("set_value: shape " + to_string(value.shape()) + " does not match " + to_string(n.value.shape()));
  }
  n.value = std::move(value);
}

void Tape::replay() {
  for (Node& n : nodes_) {
    if (n.op == Op::Leaf || n.op == Op::Constant) continue;
    n.value = evaluate(n);
    if (!n.value.all_finite()) throw NonFiniteError(std::string(op_name(n.op)) + ": non-finite value on replay");
  }
}

}  // namespace ensers::ad
