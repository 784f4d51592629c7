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

#ifndef INCRCA_GRADDSL_HPP_
#define INCRCA_GRADDSL_HPP_

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "incrca/datamodel.hpp"

namespace incrca::graddsl {

enum class Op {
  kLeaf,
  kMatmul,
  kAdd,
  kSubtract,
  kHadamard,
  kTranspose,
  kConcatCols,
  kSigmoid,
  kTanh,
  kRelu,
  kFrobeniusSq,
  kL1Sum,
  kScale,
  kExpmTrace,
};

const char* op_name(Op op);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape over dense double matrices.
///
/// Nodes are appended in evaluation order, so every parent precedes its
/// child and backward() can sweep the node list in reverse. Leaves are either
/// variables (gradients are tracked) or constants (gradient flow stops).
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    Op op = Op::kLeaf;
    std::vector<std::size_t> parents;
    bool requires_grad = false;
    // Adds this node's grad into its parents' grads.
    std::function<void(Tape&, std::size_t)> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Matrix value);
  Var constant(Matrix value);

  /// Zeroes every gradient, seeds d(loss)/d(loss) = 1 and sweeps the tape.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  const Node& node(Var v) const { return nodes_[v.id()]; }

  // Used by the primitive implementations.
  Var push(Matrix value, Op op, std::vector<std::size_t> parents,
           std::function<void(Tape&, std::size_t)> backward);
  Matrix& grad_of(std::size_t id) { return nodes_[id].grad; }
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  std::vector<Node> nodes_;
};

// Primitives. Shapes must match exactly; there is no broadcasting.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var hadamard(Var a, Var b);
Var transpose(Var a);
Var concat_cols(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var frobenius_sq(Var a);
Var l1_sum(Var a);
Var scale(Var a, double factor);

/// tr(exp(A o A)) - n for square A.
Var expm_trace(Var a);

/// Matrix exponential via Taylor series with scaling and squaring. Terms are
/// summed until their Frobenius norm drops below 1e-14.
Matrix expm(const Matrix& m);

/// tr(exp(A o A)) - n evaluated on plain values.
double acyclicity(const Matrix& a);

// Elementwise functions shared with non-tape code. odd_tanh is exactly odd,
// which the graph fusion layer relies on.
double odd_tanh(double x);
double logistic(double x);

struct LstmParams {
  // Gate order: input, forget, cell candidate, output. Row-vector
  // convention: gate = act(x * input_weight + h * recurrent_weight + bias).
  std::array<Var, 4> input_weight;      // n x d
  std::array<Var, 4> recurrent_weight;  // d x d
  std::array<Var, 4> bias;              // 1 x d
};

struct LstmOutput {
  Var hidden;
  Var cell;
};

/// One step of a standard LSTM cell.
LstmOutput lstm_cell(Var x, Var hidden, Var cell, const LstmParams& params);

/// Adam (beta1=0.9, beta2=0.999, eps=1e-8) with bias correction.
struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;
};

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
               AdamState& state, double lr);

}  // namespace incrca::graddsl

#endif  // INCRCA_GRADDSL_HPP_
