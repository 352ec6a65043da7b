#include "ccmia/tape.hpp"

#include <atomic>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace ccmia::tape {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

NodePtr make_node(Eigen::MatrixXd value, std::vector<Var> inputs,
                  std::function<std::vector<Var>(const Var&, const Var&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  n->backward = std::move(backward);
  for (const auto& in : n->inputs)
    if (in.defined() && in.node()->requires_grad) n->requires_grad = true;
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
    throw std::invalid_argument(std::string("tape: shape mismatch in ") + op);
}

}  // namespace

const Eigen::MatrixXd& Var::value() const {
  if (!node_) throw std::logic_error("tape: undefined var");
  return node_->value;
}

Var constant(Eigen::MatrixXd v) {
  return Var(make_node(std::move(v), {}, nullptr));
}

Var leaf(Eigen::MatrixXd v) {
  auto n = make_node(std::move(v), {}, nullptr);
  n->requires_grad = true;
  return Var(n);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return Var(make_node(a.value() + b.value(), {a, b},
                       [](const Var&, const Var& g) {
                         return std::vector<Var>{g, g};
                       }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return Var(make_node(a.value() - b.value(), {a, b},
                       [](const Var&, const Var& g) {
                         return std::vector<Var>{g, neg(g)};
                       }));
}

Var neg(const Var& a) {
  return Var(make_node(-a.value(), {a}, [](const Var&, const Var& g) {
    return std::vector<Var>{neg(g)};
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return Var(make_node(a.value().cwiseProduct(b.value()), {a, b},
                       [a, b](const Var&, const Var& g) {
                         return std::vector<Var>{mul(g, b), mul(g, a)};
                       }));
}

Var matmul(const Var& a, const Var& b) {
  if (a.value().cols() != b.value().rows())
    throw std::invalid_argument("tape: shape mismatch in matmul");
  return Var(make_node(a.value() * b.value(), {a, b},
                       [a, b](const Var&, const Var& g) {
                         return std::vector<Var>{matmul(g, transpose(b)),
                                                 matmul(transpose(a), g)};
                       }));
}

Var transpose(const Var& a) {
  return Var(make_node(a.value().transpose(), {a}, [](const Var&, const Var& g) {
    return std::vector<Var>{transpose(g)};
  }));
}

Var relu(const Var& a) {
  // The 0/1 mask is detached; relu' is piecewise constant.
  Eigen::MatrixXd mask = (a.value().array() > 0.0).cast<double>();
  return Var(make_node(a.value().cwiseMax(0.0), {a},
                       [mask](const Var&, const Var& g) {
                         return std::vector<Var>{mul(g, constant(mask))};
                       }));
}

Var exp(const Var& a) {
  return Var(make_node(a.value().array().exp().matrix(), {a},
                       [](const Var& self, const Var& g) {
                         return std::vector<Var>{mul(g, self)};
                       }));
}

Var log(const Var& a) {
  return Var(make_node(a.value().array().log().matrix(), {a},
                       [a](const Var&, const Var& g) {
                         return std::vector<Var>{mul(g, pow_scalar(a, -1.0))};
                       }));
}

Var pow_scalar(const Var& a, double p) {
  return Var(make_node(a.value().array().pow(p).matrix(), {a},
                       [a, p](const Var&, const Var& g) {
                         return std::vector<Var>{
                             mul(g, scalar_mul(pow_scalar(a, p - 1.0), p))};
                       }));
}

Var scalar_mul(const Var& a, double s) {
  return Var(make_node(a.value() * s, {a}, [s](const Var&, const Var& g) {
    return std::vector<Var>{scalar_mul(g, s)};
  }));
}

Var add_scalar(const Var& a, double s) {
  return Var(make_node((a.value().array() + s).matrix(), {a},
                       [](const Var&, const Var& g) {
                         return std::vector<Var>{g};
                       }));
}

Var sum_all(const Var& a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().sum();
  Eigen::Index r = a.value().rows(), c = a.value().cols();
  return Var(make_node(std::move(v), {a}, [r, c](const Var&, const Var& g) {
    return std::vector<Var>{bcast_scalar(g, r, c)};
  }));
}

Var sum_rows(const Var& a) {
  Eigen::Index c = a.value().cols();
  return Var(make_node(a.value().rowwise().sum(), {a},
                       [c](const Var&, const Var& g) {
                         return std::vector<Var>{bcast_col(g, c)};
                       }));
}

Var sum_cols(const Var& a) {
  Eigen::Index r = a.value().rows();
  return Var(make_node(a.value().colwise().sum(), {a},
                       [r](const Var&, const Var& g) {
                         return std::vector<Var>{bcast_row(g, r)};
                       }));
}

Var bcast_col(const Var& a, Eigen::Index cols) {
  if (a.value().cols() != 1) throw std::invalid_argument("tape: bcast_col needs Nx1");
  return Var(make_node(a.value().replicate(1, cols), {a},
                       [](const Var&, const Var& g) {
                         return std::vector<Var>{sum_rows(g)};
                       }));
}

Var bcast_row(const Var& a, Eigen::Index rows) {
  if (a.value().rows() != 1) throw std::invalid_argument("tape: bcast_row needs 1xM");
  return Var(make_node(a.value().replicate(rows, 1), {a},
                       [](const Var&, const Var& g) {
                         return std::vector<Var>{sum_cols(g)};
                       }));
}

Var bcast_scalar(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (a.value().size() != 1) throw std::invalid_argument("tape: bcast_scalar needs 1x1");
  return Var(make_node(Eigen::MatrixXd::Constant(rows, cols, a.value()(0, 0)), {a},
                       [](const Var&, const Var& g) {
                         return std::vector<Var>{sum_all(g)};
                       }));
}

Var dot(const Var& a, const Var& b) { return sum_all(mul(a, b)); }
Var frob2(const Var& a) { return sum_all(mul(a, a)); }

double scalar(const Var& a) {
  if (a.value().size() != 1) throw std::invalid_argument("tape: not a scalar");
  return a.value()(0, 0);
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt) {
  if (!output.defined()) throw std::logic_error("tape: grad of undefined var");

  // Reachable subgraph, then sweep in descending id order (= reverse topo).
  std::vector<NodePtr> topo;
  std::unordered_set<const Node*> seen;
  std::vector<NodePtr> stack{output.node()};
  while (!stack.empty()) {
    NodePtr n = stack.back();
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    topo.push_back(n);
    for (const auto& in : n->inputs)
      if (in.defined()) stack.push_back(in.node());
  }
  std::sort(topo.begin(), topo.end(),
            [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });

  std::unordered_map<const Node*, Var> adjoint;
  adjoint[output.node().get()] = constant(
      Eigen::MatrixXd::Ones(output.value().rows(), output.value().cols()));

  for (const auto& n : topo) {
    if (!n->requires_grad) continue;
    auto it = adjoint.find(n.get());
    if (it == adjoint.end()) continue;
    if (!n->backward) continue;
    Var g = it->second;
    std::vector<Var> contribs = n->backward(Var(n), g);
    for (std::size_t i = 0; i < n->inputs.size(); ++i) {
      const Var& in = n->inputs[i];
      if (!in.defined() || !in.node()->requires_grad) continue;
      if (!contribs[i].defined()) continue;
      auto jt = adjoint.find(in.node().get());
      if (jt == adjoint.end())
        adjoint[in.node().get()] = contribs[i];
      else
        jt->second = add(jt->second, contribs[i]);
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto it = adjoint.find(w.node().get());
    if (it != adjoint.end())
      out.push_back(it->second);
    else
      out.push_back(constant(
          Eigen::MatrixXd::Zero(w.value().rows(), w.value().cols())));
  }
  return out;
}

}  // namespace ccmia::tape
