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

#include "incrca/disentangle.hpp"

#include <cmath>
#include <random>
#include <string>

#include "incrca/errors.hpp"

namespace incrca::disentangle {

namespace g = graddsl;
using datamodel::Batch;
using datamodel::CausalGraph;

namespace {

constexpr double kDagTolerance = 1e-6;

Matrix xavier(Index rows, Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

Matrix off_diagonal_mask(Index n) {
  return Matrix::Ones(n, n) - Matrix::Identity(n, n);
}

struct ParamVars {
  g::Var enc_weight, enc_bias;
  g::LstmParams lstm;
  g::Var node_scale, node_shift;
  g::Var inv_gcn1, inv_gcn2, dep_gcn1, dep_gcn2;
  g::Var lag_inv, lag_dep;
  std::vector<g::Var> all;
};

ParamVars bind(g::Tape& tape, const LearnerParams& p) {
  ParamVars v;
  auto var = [&](const Matrix& m) {
    g::Var x = tape.variable(m);
    v.all.push_back(x);
    return x;
  };
  // Same order as LearnerParams::all().
  v.enc_weight = var(p.enc_weight);
  v.enc_bias = var(p.enc_bias);
  for (int k = 0; k < 4; ++k) v.lstm.input_weight[k] = var(p.lstm_input[k]);
  for (int k = 0; k < 4; ++k)
    v.lstm.recurrent_weight[k] = var(p.lstm_recurrent[k]);
  for (int k = 0; k < 4; ++k) v.lstm.bias[k] = var(p.lstm_bias[k]);
  v.node_scale = var(p.node_scale);
  v.node_shift = var(p.node_shift);
  v.inv_gcn1 = var(p.inv_gcn1);
  v.inv_gcn2 = var(p.inv_gcn2);
  v.dep_gcn1 = var(p.dep_gcn1);
  v.dep_gcn2 = var(p.dep_gcn2);
  v.lag_inv = var(p.lag_inv);
  v.lag_dep = var(p.lag_dep);
  return v;
}

// Plain-matrix inputs shared by every epoch of one batch.
struct BatchInputs {
  Matrix propagation;
  Matrix prev_adjacency;
  Matrix complement;
  Matrix mask;
  Matrix prev_state_t;  // rho x n, transposed: n x rho
  datamodel::LagEmbedding prev_embed;
  Matrix batch;
  datamodel::LagEmbedding batch_embed;
};

BatchInputs prepare(const LearnerState& state, const Batch& batch) {
  const Index n = state.nodes();
  if (batch.values.cols() != n) {
    throw ArgumentError("batch has " + std::to_string(batch.values.cols()) +
                        " channels, learner expects " + std::to_string(n));
  }
  if (batch.values.rows() <= state.config.lag) {
    throw ArgumentError("batch of " + std::to_string(batch.values.rows()) +
                        " rows is too short for lag order " +
                        std::to_string(state.config.lag));
  }
  BatchInputs in;
  in.propagation = normalized_propagation(state.prev_graph.adjacency);
  in.prev_adjacency = state.prev_graph.adjacency;
  in.complement = complement_target(state.prev_graph.adjacency);
  in.mask = off_diagonal_mask(n);
  in.prev_state_t = state.prev_state_data.transpose();
  in.prev_embed = datamodel::lag_embed(state.prev_state_data, state.config.lag);
  in.batch = batch.values;
  in.batch_embed = datamodel::lag_embed(batch.values, state.config.lag);
  return in;
}

struct ForwardVars {
  g::Var z_hat, z_check, a_hat, a_check, a_fused;
  g::Var hidden, cell;
  g::Var recon_inv, recon_dep, pred_prev, pred_inv, pred_dep, sparsity, acyc;
  g::Var loss;
};

g::Var svar_residual(g::Tape& tape, const datamodel::LagEmbedding& data,
                     g::Var adjacency, g::Var lag_weights) {
  g::Var current = tape.constant(data.current);
  g::Var lagged = tape.constant(data.lagged);
  g::Var prediction =
      g::add(g::matmul(current, adjacency), g::matmul(lagged, lag_weights));
  return g::frobenius_sq(g::subtract(current, prediction));
}

g::Var graph_conv(g::Tape& tape, const Matrix& propagation, g::Var features,
                  g::Var w1, g::Var w2) {
  g::Var s = tape.constant(propagation);
  g::Var h1 = g::relu(g::matmul(g::matmul(s, features), w1));
  return g::matmul(s, g::matmul(h1, w2));
}

ForwardVars forward(g::Tape& tape, const ParamVars& p, const BatchInputs& in,
                    const Matrix& hidden0, const Matrix& cell0,
                    const LearnerConfig& cfg) {
  const Index n = in.mask.rows();
  ForwardVars f;

  // U_p: one row per node from its own previous-state series.
  g::Var u = g::add(g::matmul(tape.constant(in.prev_state_t), p.enc_weight),
                    g::matmul(tape.constant(Matrix::Ones(n, 1)), p.enc_bias));

  g::Var h = tape.constant(hidden0);
  g::Var c = tape.constant(cell0);
  for (Index t = 0; t < in.batch.rows(); ++t) {
    auto step = g::lstm_cell(tape.constant(in.batch.row(t)), h, c, p.lstm);
    h = step.hidden;
    c = step.cell;
  }
  f.hidden = h;
  f.cell = c;

  // Hidden unit i belongs to node i; lift it to hidden_h features.
  g::Var spread =
      g::matmul(g::transpose(h), tape.constant(Matrix::Ones(1, cfg.hidden_h)));
  g::Var node_features =
      g::add(g::hadamard(spread, p.node_scale), p.node_shift);

  f.z_hat = graph_conv(tape, in.propagation, g::concat_cols(u, node_features),
                       p.inv_gcn1, p.inv_gcn2);
  f.z_check = graph_conv(tape, in.propagation, node_features, p.dep_gcn1,
                         p.dep_gcn2);

  g::Var mask = tape.constant(in.mask);
  f.a_hat = g::hadamard(g::sigmoid(g::matmul(f.z_hat, g::transpose(f.z_hat))),
                        mask);
  f.a_check = g::hadamard(
      g::sigmoid(g::matmul(f.z_check, g::transpose(f.z_check))), mask);

  g::Var cross = g::matmul(f.a_hat, g::transpose(f.a_check));
  f.a_fused = g::relu(g::tanh(g::subtract(cross, g::transpose(cross))));

  f.recon_inv =
      g::frobenius_sq(g::subtract(f.a_hat, tape.constant(in.prev_adjacency)));
  f.recon_dep =
      g::frobenius_sq(g::subtract(f.a_check, tape.constant(in.complement)));
  f.pred_prev = svar_residual(tape, in.prev_embed, f.a_hat, p.lag_inv);
  f.pred_inv = svar_residual(tape, in.batch_embed, f.a_hat, p.lag_inv);
  f.pred_dep = svar_residual(tape, in.batch_embed, f.a_check, p.lag_dep);
  f.sparsity = g::add(g::l1_sum(f.a_hat), g::l1_sum(f.a_check));
  f.acyc = g::expm_trace(f.a_fused);

  g::Var loss = g::add(f.recon_inv, f.recon_dep);
  loss = g::add(loss, f.pred_prev);
  loss = g::add(loss, f.pred_inv);
  loss = g::add(loss, f.pred_dep);
  loss = g::add(loss, g::scale(f.sparsity, cfg.lambda1));
  loss = g::add(loss, g::scale(f.acyc, cfg.lambda2));
  f.loss = loss;
  return f;
}

LossTerms collect_terms(const ForwardVars& f, const LearnerConfig& cfg) {
  LossTerms t;
  t.recon_invariant = f.recon_inv.scalar();
  t.recon_dependent = f.recon_dep.scalar();
  t.predict_previous = f.pred_prev.scalar();
  t.predict_invariant = f.pred_inv.scalar();
  t.predict_dependent = f.pred_dep.scalar();
  t.sparsity = f.sparsity.scalar();
  t.acyclicity = f.acyc.scalar();
  t.total = f.loss.scalar();
  (void)cfg;
  return t;
}

void init_params(LearnerParams& p, Index n, Index rho, const LearnerConfig& c,
                 std::mt19937_64& rng) {
  p.enc_weight = xavier(rho, c.embed_u, rng);
  p.enc_bias = Matrix::Zero(1, c.embed_u);
  for (int k = 0; k < 4; ++k) {
    p.lstm_input[k] = xavier(n, n, rng);
    p.lstm_recurrent[k] = xavier(n, n, rng);
    p.lstm_bias[k] = Matrix::Zero(1, n);
  }
  p.lstm_bias[1].setOnes();  // forget gate starts open
  p.node_scale = xavier(n, c.hidden_h, rng);
  p.node_shift = xavier(n, c.hidden_h, rng);
  p.inv_gcn1 = xavier(c.embed_u + c.hidden_h, c.gcn_hidden, rng);
  p.inv_gcn2 = xavier(c.gcn_hidden, c.embed_z, rng);
  p.dep_gcn1 = xavier(c.hidden_h, c.gcn_hidden, rng);
  p.dep_gcn2 = xavier(c.gcn_hidden, c.embed_z, rng);
  p.lag_inv = Matrix::Zero(c.lag * n, n);
  p.lag_dep = Matrix::Zero(c.lag * n, n);
}

}  // namespace

void LearnerConfig::validate() const {
  if (lag < 1) throw ConfigError("learner.lag must be >= 1");
  if (embed_u < 1 || hidden_h < 1 || embed_z < 1 || gcn_hidden < 1)
    throw ConfigError("learner embedding sizes must be >= 1");
  if (epochs < 1) throw ConfigError("learner.epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("learner.lr must be > 0");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw ConfigError("learner.lambda1 and learner.lambda2 must be >= 0");
  if (rho_max < 2 * lag + 2)
    throw ConfigError("learner.rho_max must be >= 2 * lag + 2");
  if (!(edge_threshold >= 0.0))
    throw ConfigError("learner.edge_threshold must be >= 0");
  if (bootstrap_epochs < 1)
    throw ConfigError("learner.bootstrap_epochs must be >= 1");
  if (!(bootstrap_lr > 0.0))
    throw ConfigError("learner.bootstrap_lr must be > 0");
}

std::vector<Matrix*> LearnerParams::all() {
  std::vector<Matrix*> out{&enc_weight, &enc_bias};
  for (auto& m : lstm_input) out.push_back(&m);
  for (auto& m : lstm_recurrent) out.push_back(&m);
  for (auto& m : lstm_bias) out.push_back(&m);
  for (Matrix* m : {&node_scale, &node_shift, &inv_gcn1, &inv_gcn2, &dep_gcn1,
                    &dep_gcn2, &lag_inv, &lag_dep}) {
    out.push_back(m);
  }
  return out;
}

std::vector<const Matrix*> LearnerParams::all() const {
  auto* self = const_cast<LearnerParams*>(this);
  std::vector<const Matrix*> out;
  for (Matrix* m : self->all()) out.push_back(m);
  return out;
}

void LearnerParams::set_zero() {
  for (Matrix* m : all()) m->setZero();
}

void LearnerState::begin_state(const Matrix& history) {
  const Index rho = params.enc_weight.rows();
  if (history.rows() < rho) {
    throw ArgumentError("previous-state data needs " + std::to_string(rho) +
                        " rows, got " + std::to_string(history.rows()));
  }
  prev_state_data = history.bottomRows(rho);
  hidden = Matrix::Zero(1, nodes());
  cell = Matrix::Zero(1, nodes());
  batches_seen = 0;
}

Matrix decode(const Matrix& embedding) {
  Matrix a = (embedding * embedding.transpose()).unaryExpr(&g::logistic);
  a.diagonal().setZero();
  return a;
}

Matrix fuse(const Matrix& a_hat, const Matrix& a_check) {
  if (a_hat.rows() != a_check.rows() || a_hat.cols() != a_check.cols() ||
      a_hat.rows() != a_hat.cols()) {
    throw ArgumentError("fuse: shapes " + std::to_string(a_hat.rows()) + "x" +
                        std::to_string(a_hat.cols()) + " and " +
                        std::to_string(a_check.rows()) + "x" +
                        std::to_string(a_check.cols()) +
                        " are not the same square shape");
  }
  const Matrix cross = a_hat * a_check.transpose();
  const Matrix skew = cross - cross.transpose();
  return skew.unaryExpr([](double x) {
    const double t = g::odd_tanh(x);
    return t > 0.0 ? t : 0.0;
  });
}

Matrix complement_target(const Matrix& adjacency) {
  Matrix c = Matrix::Ones(adjacency.rows(), adjacency.cols()) - adjacency;
  c.diagonal().setZero();
  return c;
}

Matrix normalized_propagation(const Matrix& adjacency) {
  const Index n = adjacency.rows();
  Matrix s = adjacency.cwiseMax(adjacency.transpose());
  s.diagonal().setOnes();
  const Vector inv_sqrt = s.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * s * inv_sqrt.asDiagonal();
  (void)n;
}

Embeddings encode(LearnerState& state, const Batch& batch) {
  const BatchInputs in = prepare(state, batch);
  g::Tape tape;
  const ParamVars p = bind(tape, state.params);
  const ForwardVars f =
      forward(tape, p, in, state.hidden, state.cell, state.config);
  Embeddings out{f.z_hat.value(), f.z_check.value(), f.hidden.value(),
                 f.cell.value()};
  state.hidden = out.hidden;
  state.cell = out.cell;
  return out;
}

LossEvaluation evaluate_loss(const LearnerState& state, const Batch& batch,
                             bool with_gradients) {
  const BatchInputs in = prepare(state, batch);
  g::Tape tape;
  const ParamVars p = bind(tape, state.params);
  const ForwardVars f =
      forward(tape, p, in, state.hidden, state.cell, state.config);
  LossEvaluation out;
  out.terms = collect_terms(f, state.config);
  if (with_gradients) {
    tape.backward(f.loss);
    for (const auto& v : p.all) out.gradients.push_back(v.grad());
  }
  return out;
}

Matrix prune_to_dag(const Matrix& weights, double threshold) {
  Matrix a = weights;
  a.diagonal().setZero();
  a = (a.array() >= threshold).select(a, 0.0);
  while (g::acyclicity(a) > kDagTolerance) {
    const std::vector<int> cycle = find_cycle(a);
    if (cycle.empty()) break;
    int best_i = cycle[0], best_j = cycle[1 % cycle.size()];
    double best = a(best_i, best_j);
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      const int i = cycle[k];
      const int j = cycle[(k + 1) % cycle.size()];
      if (a(i, j) < best) {
        best = a(i, j);
        best_i = i;
        best_j = j;
      }
    }
    a(best_i, best_j) = 0.0;
  }
  return a;
}

std::vector<int> find_cycle(const Matrix& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  std::vector<int> color(static_cast<std::size_t>(n), 0);  // 0 new, 1 open, 2 done
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  for (int root = 0; root < n; ++root) {
    if (color[static_cast<std::size_t>(root)] != 0) continue;
    // Iterative DFS keeping the next neighbour to try per node.
    std::vector<std::pair<int, int>> stack{{root, 0}};
    color[static_cast<std::size_t>(root)] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next >= n) {
        color[static_cast<std::size_t>(u)] = 2;
        stack.pop_back();
        continue;
      }
      const int v = next++;
      if (v == u || !(adjacency(u, v) > 0.0)) continue;
      if (color[static_cast<std::size_t>(v)] == 1) {
        std::vector<int> cycle{v};
        for (int w = u; w != v; w = parent[static_cast<std::size_t>(w)]) {
          cycle.push_back(w);
        }
        // Collected backwards: v <- u <- ... ; reverse into edge order.
        std::reverse(cycle.begin() + 1, cycle.end());
        return cycle;
      }
      if (color[static_cast<std::size_t>(v)] == 0) {
        color[static_cast<std::size_t>(v)] = 1;
        parent[static_cast<std::size_t>(v)] = u;
        stack.emplace_back(v, 0);
      }
    }
  }
  return {};
}

TrainResult train_batch(LearnerState& state, const Batch& batch) {
  LearnerState work = state;
  const BatchInputs in = prepare(work, batch);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(work.config.epochs));

  for (int epoch = 0; epoch < work.config.epochs; ++epoch) {
    g::Tape tape;
    const ParamVars p = bind(tape, work.params);
    const ForwardVars f =
        forward(tape, p, in, work.hidden, work.cell, work.config);
    const double loss = f.loss.scalar();
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite loss at epoch " +
                            std::to_string(epoch) + " of batch " +
                            std::to_string(batch.index));
    }
    trace.push_back(loss);
    tape.backward(f.loss);
    std::vector<Matrix> grads;
    grads.reserve(p.all.size());
    for (const auto& v : p.all) grads.push_back(v.grad());
    const auto params = work.params.all();
    g::adam_step(params, grads, work.optimizer, work.config.lr);
  }

  g::Tape tape;
  const ParamVars p = bind(tape, work.params);
  const ForwardVars f =
      forward(tape, p, in, work.hidden, work.cell, work.config);
  if (!std::isfinite(f.loss.scalar())) {
    throw DivergenceError("non-finite loss after training batch " +
                          std::to_string(batch.index));
  }

  TrainResult result;
  result.artifacts.z_hat = f.z_hat.value();
  result.artifacts.z_check = f.z_check.value();
  result.artifacts.a_hat = f.a_hat.value();
  result.artifacts.a_check = f.a_check.value();
  result.artifacts.a_fused = f.a_fused.value();
  result.artifacts.terms = collect_terms(f, work.config);
  result.artifacts.loss_trace = std::move(trace);

  result.graph = work.prev_graph;
  result.graph.adjacency =
      prune_to_dag(result.artifacts.a_fused, work.config.edge_threshold);

  work.hidden = f.hidden.value();
  work.cell = f.cell.value();
  work.prev_graph = result.graph;
  ++work.batches_seen;
  state = std::move(work);
  return result;
}

BootstrapResult bootstrap_initial(const datamodel::MetricFrame& history,
                                  const LearnerConfig& config) {
  config.validate();
  const Index n = history.channels();
  const Index rows = history.rows();
  if (rows < 2 * config.lag + 2) {
    throw ArgumentError("bootstrap needs at least " +
                        std::to_string(2 * config.lag + 2) +
                        " history rows, got " + std::to_string(rows));
  }
  const auto embed = datamodel::lag_embed(history.values, config.lag);
  const Matrix mask = off_diagonal_mask(n);

  Matrix logits = Matrix::Constant(n, n, -2.0);
  Matrix lag = Matrix::Zero(config.lag * n, n);
  g::AdamState opt;
  BootstrapResult out;
  out.loss_trace.reserve(static_cast<std::size_t>(config.bootstrap_epochs));

  auto build = [&](g::Tape& tape, g::Var& adjacency) {
    g::Var theta = tape.variable(logits);
    g::Var d = tape.variable(lag);
    adjacency = g::hadamard(g::sigmoid(theta), tape.constant(mask));
    g::Var fit = svar_residual(tape, embed, adjacency, d);
    g::Var loss = g::add(fit, g::scale(g::l1_sum(adjacency), config.lambda1));
    loss = g::add(loss, g::scale(g::expm_trace(adjacency), config.lambda2));
    return std::make_tuple(theta, d, loss);
  };

  for (int epoch = 0; epoch < config.bootstrap_epochs; ++epoch) {
    g::Tape tape;
    g::Var adjacency;
    auto [theta, d, loss] = build(tape, adjacency);
    if (!std::isfinite(loss.scalar())) {
      throw DivergenceError("bootstrap loss became non-finite at epoch " +
                            std::to_string(epoch));
    }
    out.loss_trace.push_back(loss.scalar());
    tape.backward(loss);
    std::vector<Matrix*> params{&logits, &lag};
    std::vector<Matrix> grads{theta.grad(), d.grad()};
    g::adam_step(params, grads, opt, config.bootstrap_lr);
  }

  out.raw_adjacency = logits.unaryExpr(&g::logistic).cwiseProduct(mask);
  out.graph.node_labels = history.entity_names;
  out.graph.kpi_index = history.kpi_index;
  out.graph.adjacency = prune_to_dag(out.raw_adjacency, config.edge_threshold);

  const Index rho = std::min<Index>(config.rho_max, rows);
  std::mt19937_64 rng(config.seed);
  LearnerState& st = out.state;
  st.config = config;
  init_params(st.params, n, rho, config, rng);
  st.params.lag_inv = lag;
  st.params.lag_dep = lag;
  st.prev_graph = out.graph;
  st.begin_state(history.values);
  return out;
}

}  // namespace incrca::disentangle
