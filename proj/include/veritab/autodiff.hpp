#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace veritab::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a tape node. Values are computed eagerly when the node is
// created; gradients become available after Tape::backward.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  const Mat& grad() const;
  double scalar() const;  // 1x1 nodes
};

// Reverse-mode tape over dense f64 matrices. The op set is fixed: matmul,
// add, concat, gather, sigmoid, ELU, LeakyReLU, softmax, mean/sum pooling,
// hinge, log, softplus and the logit BCE used as training loss.
class Tape {
 public:
  Var leaf(Mat value, bool requires_grad, std::string name = {});
  Var constant(Mat value) { return leaf(std::move(value), false); }
  Var constant(double value) { return leaf(Mat::Constant(1, 1, value), false); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_n(const std::vector<Var>& xs);
  Var sub(Var a, Var b);
  Var scale(Var a, double c);
  Var mul(Var a, Var b);  // elementwise, same shape
  Var dot(Var a, Var b);  // column vectors -> 1x1
  Var concat_rows(const std::vector<Var>& xs);
  Var gather_cols(Var a, std::vector<int> cols);
  Var mean(const std::vector<Var>& xs);  // same-shape average

  Var sigmoid(Var a);
  Var elu(Var a);
  Var leaky_relu(Var a, double slope = 0.2);
  Var log(Var a);
  Var hinge(Var a);  // max(x, 0) elementwise
  Var softmax(Var a);  // column vector
  Var softplus(Var a);
  // Numerically stable -[y log sigmoid(z) + (1-y) log(1 - sigmoid(z))].
  Var bce_with_logits(Var logit, double target);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients in reverse order.
  // `loss` must be 1x1. Gradients of earlier backward calls are cleared.
  void backward(Var loss);

  const Mat& value(int id) const { return nodes_[id].value; }
  const Mat& grad(int id) const;
  const std::string& name(int id) const { return nodes_[id].name; }
  int size() const { return static_cast<int>(nodes_.size()); }
  bool evaluated() const { return evaluated_; }

  // All leaves created with requires_grad, in creation order.
  const std::vector<int>& params() const { return param_ids_; }

 private:
  enum class Op {
    Leaf, MatMul, Add, AddN, Sub, Scale, Mul, Dot, ConcatRows, GatherCols,
    Sigmoid, Elu, LeakyRelu, Log, Hinge, Softmax, Softplus, BceLogits,
  };

  struct Node {
    Op op;
    Mat value;
    Mat grad;
    std::vector<int> inputs;
    double aux = 0;  // scale factor / slope / bce target
    std::vector<int> cols;
    std::string name;
    bool requires_grad = false;
  };

  int push(Node n);
  Var wrap(int id) { return Var{this, id}; }

  std::vector<Node> nodes_;
  std::vector<int> param_ids_;
  bool evaluated_ = false;
};

}  // namespace veritab::ad
