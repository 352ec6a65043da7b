#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace ccmia::tape {

// Minimal reverse-mode autodiff over dense matrices. Every op's backward
// rule is itself expressed in tape ops, so gradients are differentiable
// again: grad() of a grad() output is exact. This is what the inversion
// objective needs, since it differentiates a loss that contains a gradient.
//
// Values are computed eagerly at construction. Node ids increase in creation
// order, which is a valid topological order for the backward sweep.

struct Node;
using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}
  bool defined() const { return node_ != nullptr; }
  const Eigen::MatrixXd& value() const;
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

struct Node {
  Eigen::MatrixXd value;
  std::vector<Var> inputs;
  // Returns one adjoint per input; entries for inputs that do not require
  // gradients may be left undefined.
  std::function<std::vector<Var>(const Var& self, const Var& grad_out)> backward;
  bool requires_grad = false;
  std::uint64_t id = 0;
};

Var constant(Eigen::MatrixXd v);
Var leaf(Eigen::MatrixXd v);  // differentiable input

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var mul(const Var& a, const Var& b);  // elementwise
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var pow_scalar(const Var& a, double p);  // entries must stay in the domain
Var scalar_mul(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sum_all(const Var& a);               // -> 1x1
Var sum_rows(const Var& a);              // N x M -> N x 1
Var sum_cols(const Var& a);              // N x M -> 1 x M
Var bcast_col(const Var& a, Eigen::Index cols);    // N x 1 -> N x cols
Var bcast_row(const Var& a, Eigen::Index rows);    // 1 x M -> rows x M
Var bcast_scalar(const Var& a, Eigen::Index rows, Eigen::Index cols);

// Compositions
Var dot(const Var& a, const Var& b);    // sum(a .* b), 1x1
Var frob2(const Var& a);                // sum(a .* a), 1x1
double scalar(const Var& a);            // value of a 1x1 var

// Adjoints of `output` (any shape; seeded with ones) w.r.t. each var in
// `wrt`. Vars not connected to the output get zero adjoints. The returned
// adjoints are tape vars and can be differentiated again.
std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt);

}  // namespace ccmia::tape
