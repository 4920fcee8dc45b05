#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "motiondiff/params.hpp"
#include "motiondiff/tensor.hpp"

namespace motiondiff {

class Tape;

// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a single
// reverse sweep visits every node after all of its consumers.
//
// Only parameters of the ModelParams instance passed at construction are
// differentiated; every other leaf is a constant. A tape with no trainable
// set records no backward closures.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_value, const Tensor& out_grad)>;

  explicit Tape(const ModelParams* trainable = nullptr) : trainable_(trainable) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf for a named parameter. Repeated calls return the same node.
  Var param(const ModelParams& params, const std::string& name);

  // Records an op output. `parents` are consulted for requires-grad
  // propagation; `fn` is dropped when no parent requires a gradient.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward fn);
  Var record(const char* op, Tensor value, const std::vector<Var>& parents, Backward fn);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape. `loss` must be 1x1.
  void backward(Var loss);

  // Gradient w.r.t. the trainable set, laid out like ModelParams::flatten.
  // Parameters never touched by the forward pass contribute zeros.
  std::vector<double> param_gradient() const;

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Accumulates into the gradient slot of node `id` (no-op for constants).
  void accumulate(int id, const Tensor& g);
  Tensor& grad_slot(int id);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    const char* op = "";
    bool requires_grad = false;
  };

  const ModelParams* trainable_;
  std::vector<Node> nodes_;
  std::map<std::pair<const ModelParams*, std::string>, int> param_nodes_;
};

// Differentiable ops. Shapes are checked eagerly and reported with the op
// name; non-finite outputs raise NumericError naming the op.
namespace ag {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// a (n x m) + row vector b (1 x m) broadcast over rows.
Var add_row(Var a, Var b);
Var gelu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
// Row-wise layer normalisation with gain/bias rows (1 x m).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Multi-head self-attention on pre-projected q, k, v. Rows are partitioned
// into consecutive groups of `group` tokens; attention never crosses groups.
Var grouped_attention(Var q, Var k, Var v, std::size_t group, std::size_t heads);
// out.flat[i] = x.flat[index[i]]; the gradient scatters back with addition.
Var gather(Var x, std::vector<std::size_t> index, std::size_t rows, std::size_t cols);
Var gather_rows(Var x, const std::vector<std::size_t>& rows);
Var reshape(Var x, std::size_t rows, std::size_t cols);
Var concat_cols(const std::vector<Var>& parts);
// Left-multiplies every consecutive block of `group` rows of h by a (group x group).
Var group_left_mul(Var a, Var h, std::size_t group);
Var sum(Var a);
Var sum_squares(Var a);
// Column of per-row sums of squares.
Var row_sum_squares(Var a);
// (n x n) matrix of squared Euclidean distances between rows of a.
Var pairwise_sq_dist(Var a);
// Smallest entry; the gradient flows to the first minimiser only.
Var min_entry(Var a);

// Linear layer x * w + b with w (in x out) and b (1 x out).
Var linear(Var x, Var w, Var b);

}  // namespace ag

// Softmax attention weights for one group/head layout, exposed for tests.
// Returns (groups * heads) stacked (group x group) blocks.
Tensor attention_weights(const Tensor& q, const Tensor& k, std::size_t group, std::size_t heads);

// Exact reverse-mode gradient of a scalar closure of `params`.
std::vector<double> gradient(const ModelParams& params,
                             const std::function<Var(Tape&)>& loss_closure, double* loss_value = nullptr);

}  // namespace motiondiff
