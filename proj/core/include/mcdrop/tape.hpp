#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mcdrop/tensor.hpp"

namespace mcdrop {

class GradTape;

/// Handle to a value recorded on a GradTape.
class Var {
public:
  std::size_t index() const noexcept { return index_; }

private:
  friend class GradTape;
  Var(const GradTape *tape, std::size_t index) : tape_(tape), index_(index) {}
  const GradTape *tape_;
  std::size_t index_;
};

/// Reverse-mode autodiff tape over Tensor2 values.
///
/// Every operation appends one node holding its forward value. `grad` walks
/// the nodes from the output back to the first record in exact reverse order.
/// Leaves can be overwritten with `set_leaf` and the recorded program
/// re-executed with `replay`, which is how finite-difference checks perturb
/// parameters without rebuilding the graph.
///
/// Single-threaded; one tape per training step.
class GradTape {
public:
  enum class Op { leaf, matmul, add, sub, hadamard, scale, add_row, mul_row, elementwise, sum };

  Var leaf(Tensor2 value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  /// a + row broadcast over rows (bias addition).
  Var add_row(Var a, Var row);
  /// a ∘ row broadcast over rows (dropout mask application).
  Var mul_row(Var a, Var row);
  Var elementwise(Elementwise kind, Var a);
  /// Reduces to a 1×1 tensor.
  Var sum(Var a);

  const Tensor2 &value(Var v) const;
  double scalar(Var v) const;

  /// d(output)/d(input) for each input. Inputs the output does not depend on
  /// get zero tensors. `on_visit`, when set, observes the node indices in the
  /// order the backward sweep processes them.
  std::vector<Tensor2> grad(Var output, std::span<const Var> inputs,
                            const std::function<void(std::size_t)> &on_visit = {}) const;

  void set_leaf(Var v, Tensor2 value);
  /// Recomputes every non-leaf node in recording order.
  void replay();

  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(Var v) const;
  void clear() noexcept { nodes_.clear(); }

private:
  struct Node {
    Op op;
    std::size_t a = 0;
    std::size_t b = 0;
    double param = 0.0;
    Elementwise kind = Elementwise::relu;
    Tensor2 value;
  };

  Var push(Node node);
  std::size_t check(Var v) const;
  Tensor2 evaluate(const Node &n) const;

  std::vector<Node> nodes_;
};

} // namespace mcdrop
