#include "veritab/autodiff.hpp"

#include <cmath>

#include "veritab/errors.hpp"

namespace veritab::ad {

const Mat& Var::value() const { return tape->value(id); }
const Mat& Var::grad() const { return tape->grad(id); }
double Var::scalar() const { return tape->value(id)(0, 0); }

const Mat& Tape::grad(int id) const {
  if (!evaluated_) fail(Err::GraphNotEvaluated, "backward has not run");
  return nodes_[id].grad;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Mat value, bool requires_grad, std::string name) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  int id = push(std::move(n));
  if (nodes_[id].requires_grad) param_ids_.push_back(id);
  return wrap(id);
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.id, b.id};
  n.value = nodes_[a.id].value * nodes_[b.id].value;
  return wrap(push(std::move(n)));
}

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::Add;
  n.inputs = {a.id, b.id};
  n.value = nodes_[a.id].value + nodes_[b.id].value;
  return wrap(push(std::move(n)));
}

Var Tape::add_n(const std::vector<Var>& xs) {
  Node n;
  n.op = Op::AddN;
  n.value = nodes_[xs.front().id].value;
  n.inputs.push_back(xs.front().id);
  for (size_t i = 1; i < xs.size(); ++i) {
    n.value += nodes_[xs[i].id].value;
    n.inputs.push_back(xs[i].id);
  }
  return wrap(push(std::move(n)));
}

Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::Sub;
  n.inputs = {a.id, b.id};
  n.value = nodes_[a.id].value - nodes_[b.id].value;
  return wrap(push(std::move(n)));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.inputs = {a.id};
  n.aux = c;
  n.value = nodes_[a.id].value * c;
  return wrap(push(std::move(n)));
}

Var Tape::mul(Var a, Var b) {
  Node n;
  n.op = Op::Mul;
  n.inputs = {a.id, b.id};
  n.value = nodes_[a.id].value.cwiseProduct(nodes_[b.id].value);
  return wrap(push(std::move(n)));
}

Var Tape::dot(Var a, Var b) {
  Node n;
  n.op = Op::Dot;
  n.inputs = {a.id, b.id};
  Mat out(1, 1);
  out(0, 0) = (nodes_[a.id].value.array() * nodes_[b.id].value.array()).sum();
  n.value = std::move(out);
  return wrap(push(std::move(n)));
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
  Node n;
  n.op = Op::ConcatRows;
  Eigen::Index rows = 0, cols = nodes_[xs.front().id].value.cols();
  for (const auto& x : xs) {
    rows += nodes_[x.id].value.rows();
    n.inputs.push_back(x.id);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    const Mat& v = nodes_[x.id].value;
    out.middleRows(at, v.rows()) = v;
    at += v.rows();
  }
  n.value = std::move(out);
  return wrap(push(std::move(n)));
}

Var Tape::gather_cols(Var a, std::vector<int> cols) {
  Node n;
  n.op = Op::GatherCols;
  n.inputs = {a.id};
  const Mat& v = nodes_[a.id].value;
  Mat out(v.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = v.col(cols[i]);
  n.cols = std::move(cols);
  n.value = std::move(out);
  return wrap(push(std::move(n)));
}

Var Tape::mean(const std::vector<Var>& xs) {
  return scale(add_n(xs), 1.0 / static_cast<double>(xs.size()));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.inputs = {a.id};
  n.value = nodes_[a.id].value.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return wrap(push(std::move(n)));
}

Var Tape::elu(Var a) {
  Node n;
  n.op = Op::Elu;
  n.inputs = {a.id};
  n.value = nodes_[a.id].value.unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); });
  return wrap(push(std::move(n)));
}

Var Tape::leaky_relu(Var a, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.inputs = {a.id};
  n.aux = slope;
  n.value = nodes_[a.id].value.unaryExpr([slope](double x) { return x > 0 ? x : slope * x; });
  return wrap(push(std::move(n)));
}

Var Tape::log(Var a) {
  Node n;
  n.op = Op::Log;
  n.inputs = {a.id};
  n.value = nodes_[a.id].value.array().log().matrix();
  return wrap(push(std::move(n)));
}

Var Tape::hinge(Var a) {
  Node n;
  n.op = Op::Hinge;
  n.inputs = {a.id};
  n.value = nodes_[a.id].value.cwiseMax(0.0);
  return wrap(push(std::move(n)));
}

Var Tape::softmax(Var a) {
  Node n;
  n.op = Op::Softmax;
  n.inputs = {a.id};
  const Mat& v = nodes_[a.id].value;
  double m = v.maxCoeff();
  Mat e = (v.array() - m).exp().matrix();
  n.value = e / e.sum();
  return wrap(push(std::move(n)));
}

Var Tape::softplus(Var a) {
  Node n;
  n.op = Op::Softplus;
  n.inputs = {a.id};
  n.value = nodes_[a.id].value.unaryExpr(
      [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
  return wrap(push(std::move(n)));
}

Var Tape::bce_with_logits(Var logit, double target) {
  Node n;
  n.op = Op::BceLogits;
  n.inputs = {logit.id};
  n.aux = target;
  double z = nodes_[logit.id].value(0, 0);
  // softplus(z) - z*y, stable for large |z|
  double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  n.value = Mat::Constant(1, 1, sp - z * target);
  return wrap(push(std::move(n)));
}

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) fail(Err::KindMismatch, "backward needs a scalar loss");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad(0, 0) = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.op == Op::Leaf) continue;
    if (n.grad.cwiseAbs().maxCoeff() == 0.0 && n.op != Op::Leaf) {
      // no gradient flowed here; skip the chain rule
      continue;
    }
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::Leaf: break;
      case Op::MatMul: {
        Node& a = nodes_[n.inputs[0]];
        Node& b = nodes_[n.inputs[1]];
        a.grad.noalias() += g * b.value.transpose();
        b.grad.noalias() += a.value.transpose() * g;
        break;
      }
      case Op::Add:
        nodes_[n.inputs[0]].grad += g;
        nodes_[n.inputs[1]].grad += g;
        break;
      case Op::AddN:
        for (int in : n.inputs) nodes_[in].grad += g;
        break;
      case Op::Sub:
        nodes_[n.inputs[0]].grad += g;
        nodes_[n.inputs[1]].grad -= g;
        break;
      case Op::Scale:
        nodes_[n.inputs[0]].grad += g * n.aux;
        break;
      case Op::Mul:
        nodes_[n.inputs[0]].grad += g.cwiseProduct(nodes_[n.inputs[1]].value);
        nodes_[n.inputs[1]].grad += g.cwiseProduct(nodes_[n.inputs[0]].value);
        break;
      case Op::Dot: {
        double s = g(0, 0);
        nodes_[n.inputs[0]].grad += s * nodes_[n.inputs[1]].value;
        nodes_[n.inputs[1]].grad += s * nodes_[n.inputs[0]].value;
        break;
      }
      case Op::ConcatRows: {
        Eigen::Index at = 0;
        for (int in : n.inputs) {
          Node& c = nodes_[in];
          c.grad += g.middleRows(at, c.value.rows());
          at += c.value.rows();
        }
        break;
      }
      case Op::GatherCols: {
        Node& a = nodes_[n.inputs[0]];
        for (size_t i = 0; i < n.cols.size(); ++i)
          a.grad.col(n.cols[i]) += g.col(static_cast<Eigen::Index>(i));
        break;
      }
      case Op::Sigmoid: {
        const Mat& y = n.value;
        nodes_[n.inputs[0]].grad +=
            g.cwiseProduct(y.cwiseProduct(Mat::Ones(y.rows(), y.cols()) - y));
        break;
      }
      case Op::Elu: {
        const Mat& x = nodes_[n.inputs[0]].value;
        nodes_[n.inputs[0]].grad += g.cwiseProduct(
            x.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); }));
        break;
      }
      case Op::LeakyRelu: {
        const Mat& x = nodes_[n.inputs[0]].value;
        double slope = n.aux;
        nodes_[n.inputs[0]].grad += g.cwiseProduct(
            x.unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; }));
        break;
      }
      case Op::Log:
        nodes_[n.inputs[0]].grad +=
            g.cwiseProduct(nodes_[n.inputs[0]].value.cwiseInverse());
        break;
      case Op::Hinge: {
        const Mat& x = nodes_[n.inputs[0]].value;
        nodes_[n.inputs[0]].grad += g.cwiseProduct(
            x.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }));
        break;
      }
      case Op::Softmax: {
        const Mat& y = n.value;
        double inner = (y.array() * g.array()).sum();
        nodes_[n.inputs[0]].grad += (y.array() * (g.array() - inner)).matrix();
        break;
      }
      case Op::Softplus: {
        const Mat& x = nodes_[n.inputs[0]].value;
        nodes_[n.inputs[0]].grad += g.cwiseProduct(
            x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }));
        break;
      }
      case Op::BceLogits: {
        double z = nodes_[n.inputs[0]].value(0, 0);
        double s = 1.0 / (1.0 + std::exp(-z));
        nodes_[n.inputs[0]].grad(0, 0) += g(0, 0) * (s - n.aux);
        break;
      }
    }
  }
  evaluated_ = true;
}

}  // namespace veritab::ad
