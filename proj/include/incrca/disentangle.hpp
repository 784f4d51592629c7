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

#ifndef INCRCA_DISENTANGLE_HPP_
#define INCRCA_DISENTANGLE_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "incrca/datamodel.hpp"
#include "incrca/graddsl.hpp"

namespace incrca::disentangle {

struct LearnerConfig {
  int lag = 1;           // q
  int embed_u = 16;      // columns of U_p
  int hidden_h = 16;     // per-node features derived from the LSTM state
  int embed_z = 16;      // graph embedding width
  int gcn_hidden = 16;   // first graph-convolution layer width
  int epochs = 200;
  double lr = 1e-2;
  double lambda1 = 1e-2;
  double lambda2 = 1.0;
  std::uint64_t seed = 0;
  int rho_max = 512;          // retained rows of previous-state data
  double edge_threshold = 0.3;
  int bootstrap_epochs = 600;
  double bootstrap_lr = 5e-2;

  void validate() const;
};

/// Every trainable matrix of the disentangled learner.
struct LearnerParams {
  Matrix enc_weight;  // W_p: rho x embed_u
  Matrix enc_bias;    // b_p: 1 x embed_u
  std::array<Matrix, 4> lstm_input;      // n x n
  std::array<Matrix, 4> lstm_recurrent;  // n x n
  std::array<Matrix, 4> lstm_bias;       // 1 x n
  Matrix node_scale;  // n x hidden_h, per-node 1 -> hidden_h projection
  Matrix node_shift;  // n x hidden_h
  Matrix inv_gcn1;    // (embed_u + hidden_h) x gcn_hidden
  Matrix inv_gcn2;    // gcn_hidden x embed_z
  Matrix dep_gcn1;    // hidden_h x gcn_hidden
  Matrix dep_gcn2;    // gcn_hidden x embed_z
  Matrix lag_inv;     // D-hat: (q*n) x n
  Matrix lag_dep;     // D-check: (q*n) x n

  std::vector<Matrix*> all();
  std::vector<const Matrix*> all() const;
  void set_zero();
};

/// Everything carried from batch k-1 to batch k.
struct LearnerState {
  LearnerConfig config;
  LearnerParams params;
  graddsl::AdamState optimizer;
  Matrix hidden;  // 1 x n
  Matrix cell;    // 1 x n
  datamodel::CausalGraph prev_graph;
  Matrix prev_state_data;  // rho x n
  int batches_seen = 0;

  Index nodes() const { return prev_graph.size(); }
  /// Starts a new system state: zero recurrent state, new previous-state
  /// data (the last rho rows of `history`).
  void begin_state(const Matrix& history);
};

struct Embeddings {
  Matrix z_hat;    // n x embed_z, state-invariant
  Matrix z_check;  // n x embed_z, state-dependent
  Matrix hidden;   // LSTM state after the batch
  Matrix cell;
};

struct LossTerms {
  double recon_invariant = 0;
  double recon_dependent = 0;
  double predict_previous = 0;
  double predict_invariant = 0;
  double predict_dependent = 0;
  double sparsity = 0;    // ||A_hat||_1 + ||A_check||_1
  double acyclicity = 0;  // h(A_fused)
  double total = 0;
};

struct BatchArtifacts {
  Matrix z_hat;
  Matrix z_check;
  Matrix a_hat;
  Matrix a_check;
  Matrix a_fused;
  LossTerms terms;
  std::vector<double> loss_trace;
};

/// Runs the state encoder on `batch` and advances the recurrent state.
Embeddings encode(LearnerState& state, const datamodel::Batch& batch);

/// sigmoid(Z Z^T) with the diagonal set to zero.
Matrix decode(const Matrix& embedding);
inline Matrix decode_invariant(const Matrix& z_hat) { return decode(z_hat); }
inline Matrix decode_dependent(const Matrix& z_check) { return decode(z_check); }

/// relu(tanh(A_hat A_check^T - A_check A_hat^T)).
Matrix fuse(const Matrix& a_hat, const Matrix& a_check);

/// (1 - A) off the diagonal, 0 on it.
Matrix complement_target(const Matrix& adjacency);

/// Symmetric-normalized D^-1/2 (max(A, A^T) + I) D^-1/2 used by the graph
/// convolutions.
Matrix normalized_propagation(const Matrix& adjacency);

struct LossEvaluation {
  LossTerms terms;
  std::vector<Matrix> gradients;  // aligned with LearnerParams::all()
};

/// Evaluates the joint objective for `batch` at the current parameters
/// without changing the state. Gradients are filled when requested.
LossEvaluation evaluate_loss(const LearnerState& state,
                             const datamodel::Batch& batch,
                             bool with_gradients);

struct TrainResult {
  datamodel::CausalGraph graph;
  BatchArtifacts artifacts;
};

/// Optimizes the joint objective on `batch` for config.epochs Adam steps,
/// releases the thresholded acyclic fused graph and carries it, the
/// recurrent state and the optimizer state forward. Throws DivergenceError on
/// a non-finite loss, leaving `state` untouched.
TrainResult train_batch(LearnerState& state, const datamodel::Batch& batch);

struct BootstrapResult {
  datamodel::CausalGraph graph;
  LearnerState state;
  std::vector<double> loss_trace;
  Matrix raw_adjacency;  // sigmoid-parameterized estimate before pruning
};

/// Fits a single SVAR graph (sigmoid-parameterized, L1 + acyclicity
/// penalized) on the history and initializes a fresh learner around it.
BootstrapResult bootstrap_initial(const datamodel::MetricFrame& history,
                                  const LearnerConfig& config);

/// Zeroes weights below `threshold`, then repeatedly drops the lightest edge
/// of a remaining cycle until h(A) <= 1e-6.
Matrix prune_to_dag(const Matrix& weights, double threshold);

/// Directed cycle in the support of `adjacency` as a node sequence, or empty.
std::vector<int> find_cycle(const Matrix& adjacency);

}  // namespace incrca::disentangle

#endif  // INCRCA_DISENTANGLE_HPP_
