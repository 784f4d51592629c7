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

// Finite-difference sweeps shared by the unit tests and the acceptance run.
#ifndef INCRCA_TESTS_GRADIENT_SUITE_HPP_
#define INCRCA_TESTS_GRADIENT_SUITE_HPP_

#include <random>

#include "incrca/disentangle.hpp"
#include "oracles.hpp"

namespace oracle {

using incrca::graddsl::Tape;
using incrca::graddsl::Var;

// Turns a matrix node into a scalar with a fixed random weighting so every
// output entry reaches the loss with a distinct coefficient.
inline Var weigh(Tape& tape, Var v, std::mt19937_64& rng) {
  namespace g = incrca::graddsl;
  return g::frobenius_sq(
      g::hadamard(v, tape.constant(random_matrix(v.rows(), v.cols(), rng))));
}

// Entries bounded away from the relu / abs kink.
inline Matrix away_from_zero(Index r, Index c, std::mt19937_64& rng) {
  Matrix m = random_matrix(r, c, rng, 0.05, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (Index i = 0; i < m.size(); ++i)
    if (flip(rng)) m.data()[i] = -m.data()[i];
  return m;
}

// Worst relative error over every tape primitive on `trials` random shapes.
inline double primitive_sweep(int trials, std::uint64_t seed) {
  namespace g = incrca::graddsl;
  using Leaves = std::vector<Matrix>;
  using Vars = std::vector<Var>;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 5);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const Index r = dim(rng), k = dim(rng), c = dim(rng);
    auto check = [&](Leaves leaves, auto body) {
      Builder f = [&, body](Tape& t, const Vars& v) {
        std::mt19937_64 local(static_cast<unsigned>(trial) + 99);
        return weigh(t, body(t, v), local);
      };
      worst = std::max(worst, gradient_error(f, leaves));
    };
    check({random_matrix(r, k, rng), random_matrix(k, c, rng)},
          [](Tape&, const Vars& v) { return g::matmul(v[0], v[1]); });
    check({random_matrix(r, c, rng), random_matrix(r, c, rng)},
          [](Tape&, const Vars& v) { return g::add(v[0], v[1]); });
    check({random_matrix(r, c, rng), random_matrix(r, c, rng)},
          [](Tape&, const Vars& v) { return g::subtract(v[0], v[1]); });
    check({random_matrix(r, c, rng), random_matrix(r, c, rng)},
          [](Tape&, const Vars& v) { return g::hadamard(v[0], v[1]); });
    check({random_matrix(r, c, rng)},
          [](Tape&, const Vars& v) { return g::transpose(v[0]); });
    check({random_matrix(r, c, rng), random_matrix(r, k, rng)},
          [](Tape&, const Vars& v) { return g::concat_cols(v[0], v[1]); });
    check({random_matrix(r, c, rng, -3, 3)},
          [](Tape&, const Vars& v) { return g::sigmoid(v[0]); });
    check({random_matrix(r, c, rng, -2, 2)},
          [](Tape&, const Vars& v) { return g::tanh(v[0]); });
    check({away_from_zero(r, c, rng)},
          [](Tape&, const Vars& v) { return g::relu(v[0]); });
    check({random_matrix(r, c, rng)},
          [](Tape&, const Vars& v) { return g::scale(v[0], -1.7); });
    check({random_matrix(r, c, rng)}, [](Tape& t, const Vars& v) {
      return g::scale(g::frobenius_sq(v[0]), 1.0 / (1.0 + static_cast<double>(t.size())));
    });
    check({away_from_zero(r, c, rng)},
          [](Tape&, const Vars& v) { return g::l1_sum(v[0]); });
    check({random_matrix(r, r, rng, -1.5, 1.5)},
          [](Tape&, const Vars& v) { return g::expm_trace(v[0]); });

    // LSTM cell. Leaves: x, h, c, 4 input, 4 recurrent, 4 bias.
    const Index n = r, d = c;
    Leaves leaves{random_matrix(1, n, rng), random_matrix(1, d, rng),
                  random_matrix(1, d, rng)};
    for (int q = 0; q < 4; ++q) leaves.push_back(random_matrix(n, d, rng));
    for (int q = 0; q < 4; ++q) leaves.push_back(random_matrix(d, d, rng));
    for (int q = 0; q < 4; ++q) leaves.push_back(random_matrix(1, d, rng));
    check(leaves, [](Tape& t, const Vars& v) {
      g::LstmParams p;
      for (std::size_t q = 0; q < 4; ++q) {
        p.input_weight[q] = v[3 + q];
        p.recurrent_weight[q] = v[7 + q];
        p.bias[q] = v[11 + q];
      }
      auto out = g::lstm_cell(v[0], v[1], v[2], p);
      return g::concat_cols(out.hidden, out.cell);
      (void)t;
    });
  }
  return worst;
}

// Tape gradients of the full learner objective against central differences
// over every parameter entry. The objective is in the hundreds, so a step of
// 1e-5 already loses ~1e-8 to cancellation on the smallest gradients; 1e-4
// keeps both truncation and rounding below 1e-9.
inline double learner_gradient_error(incrca::disentangle::LearnerState& state,
                                     const incrca::datamodel::Batch& batch,
                                     double eps = 1e-4) {
  using incrca::disentangle::evaluate_loss;
  const auto analytic = evaluate_loss(state, batch, true);
  const auto params = state.params.all();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix numeric(params[k]->rows(), params[k]->cols());
    for (Index i = 0; i < params[k]->size(); ++i) {
      const double saved = params[k]->data()[i];
      params[k]->data()[i] = saved + eps;
      const double up = evaluate_loss(state, batch, false).terms.total;
      params[k]->data()[i] = saved - eps;
      const double down = evaluate_loss(state, batch, false).terms.total;
      params[k]->data()[i] = saved;
      numeric.data()[i] = (up - down) / (2 * eps);
    }
    worst = std::max(worst, relative_error(analytic.gradients[k], numeric, 1e-9));
  }
  return worst;
}

}  // namespace oracle

#endif  // INCRCA_TESTS_GRADIENT_SUITE_HPP_
