#include "numerics/tape.hpp"

#include "common/errors.hpp"

namespace lesion {

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant contains non-finite values");
  nodes_.push_back(Node{"constant", std::move(value), {}, {}, {}, false});
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NumericError("variable contains non-finite values");
  nodes_.push_back(Node{"variable", std::move(value), {}, {}, {}, recording_});
  return {this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward_fn) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite output from op '") + op + "'");
  bool needs = false;
  if (recording_) {
    for (auto id : inputs) {
      if (id >= nodes_.size()) throw DimensionError("op input is not on this tape");
      needs = needs || nodes_[id].requires_grad;
    }
  }
  Node node{op, std::move(value), {}, std::move(inputs), {}, needs};
  if (needs) node.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& node = nodes_.at(id);
  if (!backward_done_) throw std::logic_error("gradients requested before backward()");
  if (!node.requires_grad) throw std::logic_error("node " + std::to_string(id) + " does not require grad");
  return node.grad;
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.numel() == 0) node.grad = Tensor::zeros(node.value.shape());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this || loss.id() >= nodes_.size()) throw std::invalid_argument("loss is not on this tape");
  Node& root = nodes_[loss.id()];
  if (root.value.numel() != 1)
    throw DimensionError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  if (!root.requires_grad) throw std::invalid_argument("loss does not depend on any variable");

  for (auto& node : nodes_)
    if (node.requires_grad) node.grad = Tensor::zeros(node.value.shape());
  root.grad[0] = Scalar(1);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.requires_grad && node.backward_fn) node.backward_fn(*this, node.grad);
  }
  backward_done_ = true;
}

}  // namespace lesion
