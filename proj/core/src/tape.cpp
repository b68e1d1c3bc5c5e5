#include "mcdrop/tape.hpp"

#include <cmath>
#include <optional>

namespace mcdrop {

namespace {

void accumulate(std::optional<Tensor2> &slot, const Tensor2 &g) {
  if (!slot) {
    slot = g;
    return;
  }
  auto s = slot->mutable_data();
  auto d = g.data();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += d[i];
}

} // namespace

Var GradTape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::size_t GradTape::check(Var v) const {
  if (v.tape_ != this || v.index_ >= nodes_.size()) {
    throw ContractError("GradTape: variable does not belong to this tape");
  }
  return v.index_;
}

Tensor2 GradTape::evaluate(const Node &n) const {
  const Tensor2 &a = nodes_[n.a].value;
  switch (n.op) {
  case Op::leaf: return n.value;
  case Op::matmul: return mcdrop::matmul(a, nodes_[n.b].value);
  case Op::add: return mcdrop::add(a, nodes_[n.b].value);
  case Op::sub: return mcdrop::sub(a, nodes_[n.b].value);
  case Op::hadamard: return mcdrop::hadamard(a, nodes_[n.b].value);
  case Op::scale: return mcdrop::scale(a, n.param);
  case Op::add_row: return mcdrop::add_row(a, nodes_[n.b].value);
  case Op::mul_row: return mcdrop::mul_row(a, nodes_[n.b].value);
  case Op::elementwise: return mcdrop::elementwise(n.kind, a);
  case Op::sum: return Tensor2(1, 1, mcdrop::sum(a));
  }
  throw ContractError("GradTape: unknown op");
}

Var GradTape::leaf(Tensor2 value) { return push(Node{Op::leaf, 0, 0, 0.0, {}, std::move(value)}); }

#define MCDROP_BINARY(name, opcode)                                                        \
  Var GradTape::name(Var a, Var b) {                                                       \
    Node n{opcode, check(a), check(b), 0.0, {}, Tensor2(1, 1)};                            \
    n.value = evaluate(n);                                                                 \
    return push(std::move(n));                                                             \
  }

MCDROP_BINARY(matmul, Op::matmul)
MCDROP_BINARY(add, Op::add)
MCDROP_BINARY(sub, Op::sub)
MCDROP_BINARY(hadamard, Op::hadamard)
MCDROP_BINARY(add_row, Op::add_row)
MCDROP_BINARY(mul_row, Op::mul_row)

#undef MCDROP_BINARY

Var GradTape::scale(Var a, double s) {
  Node n{Op::scale, check(a), 0, s, {}, Tensor2(1, 1)};
  n.value = evaluate(n);
  return push(std::move(n));
}

Var GradTape::elementwise(Elementwise kind, Var a) {
  Node n{Op::elementwise, check(a), 0, 0.0, kind, Tensor2(1, 1)};
  n.value = evaluate(n);
  return push(std::move(n));
}

Var GradTape::sum(Var a) {
  Node n{Op::sum, check(a), 0, 0.0, {}, Tensor2(1, 1)};
  n.value = evaluate(n);
  return push(std::move(n));
}

const Tensor2 &GradTape::value(Var v) const { return nodes_[check(v)].value; }

double GradTape::scalar(Var v) const {
  const Tensor2 &t = value(v);
  if (t.size() != 1) throw ContractError("GradTape::scalar: value is " + t.shape_string());
  return t(0, 0);
}

GradTape::Op GradTape::op(Var v) const { return nodes_[check(v)].op; }

void GradTape::set_leaf(Var v, Tensor2 value) {
  Node &n = nodes_[check(v)];
  if (n.op != Op::leaf) throw ContractError("GradTape::set_leaf: not a leaf");
  if (!n.value.same_shape(value)) {
    throw ShapeError("GradTape::set_leaf: shape " + value.shape_string() + " != " +
                     n.value.shape_string());
  }
  n.value = std::move(value);
}

void GradTape::replay() {
  for (Node &n : nodes_) {
    if (n.op != Op::leaf) n.value = evaluate(n);
  }
}

std::vector<Tensor2> GradTape::grad(Var output, std::span<const Var> inputs,
                                    const std::function<void(std::size_t)> &on_visit) const {
  const std::size_t out = check(output);
  if (nodes_[out].value.size() != 1) {
    throw ContractError("grad: output must be scalar, got " + nodes_[out].value.shape_string());
  }
  for (Var in : inputs) check(in);

  std::vector<std::optional<Tensor2>> adj(out + 1);
  adj[out] = Tensor2(1, 1, 1.0);

  for (std::size_t i = out + 1; i-- > 0;) {
    if (on_visit) on_visit(i);
    if (!adj[i]) continue;
    const Node &n = nodes_[i];
    const Tensor2 &g = *adj[i];
    switch (n.op) {
    case Op::leaf: break;
    case Op::matmul: {
      const Tensor2 &a = nodes_[n.a].value;
      const Tensor2 &b = nodes_[n.b].value;
      accumulate(adj[n.a], matmul_nt(g, b));
      accumulate(adj[n.b], matmul_tn(a, g));
      break;
    }
    case Op::add:
      accumulate(adj[n.a], g);
      accumulate(adj[n.b], g);
      break;
    case Op::sub:
      accumulate(adj[n.a], g);
      accumulate(adj[n.b], mcdrop::scale(g, -1.0));
      break;
    case Op::hadamard:
      accumulate(adj[n.a], mcdrop::hadamard(g, nodes_[n.b].value));
      accumulate(adj[n.b], mcdrop::hadamard(g, nodes_[n.a].value));
      break;
    case Op::scale: accumulate(adj[n.a], mcdrop::scale(g, n.param)); break;
    case Op::add_row:
      accumulate(adj[n.a], g);
      accumulate(adj[n.b], sum_rows(g));
      break;
    case Op::mul_row:
      accumulate(adj[n.a], mcdrop::mul_row(g, nodes_[n.b].value));
      accumulate(adj[n.b], sum_rows(mcdrop::hadamard(g, nodes_[n.a].value)));
      break;
    case Op::elementwise: {
      const Tensor2 &x = nodes_[n.a].value;
      const Tensor2 &y = n.value;
      Tensor2 local(x.rows(), x.cols());
      auto l = local.mutable_data();
      auto xd = x.data();
      auto yd = y.data();
      switch (n.kind) {
      // Subgradient 0 at the kink.
      case Elementwise::relu:
        for (std::size_t k = 0; k < l.size(); ++k) l[k] = xd[k] > 0.0 ? 1.0 : 0.0;
        break;
      case Elementwise::tanh:
        for (std::size_t k = 0; k < l.size(); ++k) l[k] = 1.0 - yd[k] * yd[k];
        break;
      case Elementwise::exp:
        for (std::size_t k = 0; k < l.size(); ++k) l[k] = yd[k];
        break;
      case Elementwise::log:
        for (std::size_t k = 0; k < l.size(); ++k) l[k] = 1.0 / xd[k];
        break;
      case Elementwise::square:
        for (std::size_t k = 0; k < l.size(); ++k) l[k] = 2.0 * xd[k];
        break;
      }
      accumulate(adj[n.a], mcdrop::hadamard(g, local));
      break;
    }
    case Op::sum: {
      const Tensor2 &a = nodes_[n.a].value;
      accumulate(adj[n.a], Tensor2(a.rows(), a.cols(), g(0, 0)));
      break;
    }
    }
  }

  std::vector<Tensor2> result;
  result.reserve(inputs.size());
  for (Var in : inputs) {
    const std::size_t k = in.index();
    if (k <= out && adj[k]) {
      result.push_back(*adj[k]);
    } else {
      const Tensor2 &v = nodes_[k].value;
      result.emplace_back(v.rows(), v.cols());
    }
  }
  return result;
}

} // namespace mcdrop
