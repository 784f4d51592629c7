// Copyright 2026 The incrca Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "incrca/graddsl.hpp"

#include <cmath>
#include <string>

#include "incrca/errors.hpp"

namespace incrca::graddsl {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const char* op, const Matrix& a,
                              const Matrix& b) {
  throw ArgumentError(std::string(op) + ": incompatible shapes " + shape(a) +
                      " and " + shape(b));
}

Tape& tape_of(Var a) {
  if (a.tape() == nullptr) throw ArgumentError("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw ArgumentError("operands belong to different tapes");
  }
  return *a.tape();
}

template <typename F>
Matrix map(const Matrix& m, F f) {
  return m.unaryExpr(f);
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSubtract: return "subtract";
    case Op::kHadamard: return "hadamard";
    case Op::kTranspose: return "transpose";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kFrobeniusSq: return "frobenius_sq";
    case Op::kL1Sum: return "l1_sum";
    case Op::kScale: return "scale";
    case Op::kExpmTrace: return "expm_trace";
  }
  return "unknown";
}

double odd_tanh(double x) {
  const double t = std::tanh(std::fabs(x));
  return x < 0.0 ? -t : t;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const Matrix& Var::value() const { return tape_->node(id_).value; }
const Matrix& Var::grad() const { return tape_->node(id_).grad; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ArgumentError("scalar() on a " + shape(v) + " node");
  }
  return v(0, 0);
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, Op op, std::vector<std::size_t> parents,
               std::function<void(Tape&, std::size_t)> backward) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (auto p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ArgumentError("loss is not on this tape");
  const Matrix& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ArgumentError("backward needs a scalar loss, got " + shape(lv));
  }
  for (auto& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  nodes_[loss.id()].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.op == Op::kLeaf || !n.requires_grad || !n.backward) continue;
    n.backward(*this, i);
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), Op::kMatmul, {ia, ib},
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_of(self);
                  if (tp.requires_grad(ia))
                    tp.grad_of(ia).noalias() += g * tp.value_of(ib).transpose();
                  if (tp.requires_grad(ib))
                    tp.grad_of(ib).noalias() += tp.value_of(ia).transpose() * g;
                });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    shape_error("add", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), Op::kAdd, {ia, ib},
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_of(self);
                  if (tp.requires_grad(ia)) tp.grad_of(ia) += g;
                  if (tp.requires_grad(ib)) tp.grad_of(ib) += g;
                });
}

Var subtract(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    shape_error("subtract", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), Op::kSubtract, {ia, ib},
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_of(self);
                  if (tp.requires_grad(ia)) tp.grad_of(ia) += g;
                  if (tp.requires_grad(ib)) tp.grad_of(ib) -= g;
                });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    shape_error("hadamard", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), Op::kHadamard, {ia, ib},
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_of(self);
                  if (tp.requires_grad(ia))
                    tp.grad_of(ia) += g.cwiseProduct(tp.value_of(ib));
                  if (tp.requires_grad(ib))
                    tp.grad_of(ib) += g.cwiseProduct(tp.value_of(ia));
                });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.push(a.value().transpose(), Op::kTranspose, {ia},
                [ia](Tape& tp, std::size_t self) {
                  tp.grad_of(ia) += tp.grad_of(self).transpose();
                });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows()) shape_error("concat_cols", a.value(), b.value());
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const auto ia = a.id(), ib = b.id();
  const Index split = a.cols();
  return t.push(std::move(out), Op::kConcatCols, {ia, ib},
                [ia, ib, split](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_of(self);
                  if (tp.requires_grad(ia)) tp.grad_of(ia) += g.leftCols(split);
                  if (tp.requires_grad(ib))
                    tp.grad_of(ib) += g.rightCols(g.cols() - split);
                });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.push(map(a.value(), logistic), Op::kSigmoid, {ia},
                [ia](Tape& tp, std::size_t self) {
                  const Matrix& s = tp.value_of(self);
                  tp.grad_of(ia).array() += tp.grad_of(self).array() *
                                            s.array() * (1.0 - s.array());
                });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.push(map(a.value(), odd_tanh), Op::kTanh, {ia},
                [ia](Tape& tp, std::size_t self) {
                  const Matrix& y = tp.value_of(self);
                  tp.grad_of(ia).array() +=
                      tp.grad_of(self).array() * (1.0 - y.array().square());
                });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.push(map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }),
                Op::kRelu, {ia}, [ia](Tape& tp, std::size_t self) {
                  const Matrix& x = tp.value_of(ia);
                  // Subgradient at 0 is 0.
                  tp.grad_of(ia).array() +=
                      (x.array() > 0.0).select(tp.grad_of(self).array(), 0.0);
                });
}

Var frobenius_sq(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return t.push(std::move(out), Op::kFrobeniusSq, {ia},
                [ia](Tape& tp, std::size_t self) {
                  tp.grad_of(ia) += (2.0 * tp.grad_of(self)(0, 0)) *
                                    tp.value_of(ia);
                });
}

Var l1_sum(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseAbs().sum();
  return t.push(std::move(out), Op::kL1Sum, {ia},
                [ia](Tape& tp, std::size_t self) {
                  const double g = tp.grad_of(self)(0, 0);
                  tp.grad_of(ia) += tp.value_of(ia).unaryExpr([g](double x) {
                    return x > 0.0 ? g : (x < 0.0 ? -g : 0.0);
                  });
                });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.push(a.value() * factor, Op::kScale, {ia},
                [ia, factor](Tape& tp, std::size_t self) {
                  tp.grad_of(ia) += factor * tp.grad_of(self);
                });
}

Matrix expm(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw ArgumentError("expm: matrix must be square, got " + shape(m));
  }
  const Index n = m.rows();
  if (n == 0) return Matrix(0, 0);

  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 1.0) squarings = static_cast<int>(std::ceil(std::log2(norm1)));
  const Matrix scaled = m / std::ldexp(1.0, squarings);

  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k < 200; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
    if (term.norm() < 1e-14) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

double acyclicity(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw ArgumentError("acyclicity: matrix must be square, got " + shape(a));
  }
  return expm(a.cwiseProduct(a)).trace() - static_cast<double>(a.rows());
}

Var expm_trace(Var a) {
  Tape& t = tape_of(a);
  if (a.rows() != a.cols()) {
    throw ArgumentError("expm_trace: matrix must be square, got " +
                        shape(a.value()));
  }
  Matrix e = expm(a.value().cwiseProduct(a.value()));
  Matrix out(1, 1);
  out(0, 0) = e.trace() - static_cast<double>(a.rows());
  const auto ia = a.id();
  return t.push(std::move(out), Op::kExpmTrace, {ia},
                [ia, e = std::move(e)](Tape& tp, std::size_t self) {
                  const double g = tp.grad_of(self)(0, 0);
                  tp.grad_of(ia).array() += g * e.transpose().array() * 2.0 *
                                            tp.value_of(ia).array();
                });
}

LstmOutput lstm_cell(Var x, Var hidden, Var cell, const LstmParams& params) {
  auto gate = [&](int k) {
    return add(add(matmul(x, params.input_weight[k]),
                   matmul(hidden, params.recurrent_weight[k])),
               params.bias[k]);
  };
  Var input_gate = sigmoid(gate(0));
  Var forget_gate = sigmoid(gate(1));
  Var candidate = tanh(gate(2));
  Var output_gate = sigmoid(gate(3));
  Var next_cell =
      add(hadamard(forget_gate, cell), hadamard(input_gate, candidate));
  Var next_hidden = hadamard(output_gate, tanh(next_cell));
  return {next_hidden, next_cell};
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
               AdamState& state, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (params.size() != grads.size()) {
    throw ArgumentError("adam_step: " + std::to_string(params.size()) +
                        " parameters but " + std::to_string(grads.size()) +
                        " gradients");
  }
  if (state.first_moment.empty()) {
    for (Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ArgumentError("adam_step: optimizer state tracks a different "
                        "parameter count");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    if (p.rows() != g.rows() || p.cols() != g.cols()) {
      shape_error("adam_step", p, g);
    }
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }
}

}  // namespace incrca::graddsl
