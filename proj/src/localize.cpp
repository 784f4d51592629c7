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

#include "incrca/localize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "incrca/errors.hpp"

namespace incrca::localize {

void LocalizeConfig::validate() const {
  if (!(phi_jump >= 0.0 && phi_jump <= 1.0))
    throw ConfigError("localize.phi_jump must be in [0, 1]");
  if (!(restart > 0.0 && restart <= 1.0))
    throw ConfigError("localize.restart must be in (0, 1]");
  if (!(tolerance > 0.0)) throw ConfigError("localize.tol must be > 0");
  if (max_iterations < 1) throw ConfigError("localize.max_iter must be >= 1");
  if (top_k < 1) throw ConfigError("localize.k must be >= 1");
}

std::vector<int> RankedCauses::ids() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.node);
  return out;
}

Matrix transition_matrix(const datamodel::CausalGraph& graph,
                         double phi_jump) {
  if (!(phi_jump >= 0.0 && phi_jump <= 1.0)) {
    throw ArgumentError("phi_jump must be in [0, 1]");
  }
  const Index n = graph.size();
  if ((graph.adjacency.array() < 0.0).any()) {
    throw ArgumentError("causal graph has a negative edge weight");
  }
  // Row i of the transposed adjacency lists the parents of i.
  const Matrix at = graph.adjacency.transpose();
  Matrix h = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    double out_mass = 0.0;
    for (Index k = 0; k < n; ++k) {
      if (k != i) out_mass += at(i, k);
    }
    double off_diagonal = 0.0;
    if (out_mass > 0.0) {
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        h(i, j) = (1.0 - phi_jump) * at(i, j) / out_mass;
        off_diagonal += h(i, j);
      }
    }
    h(i, i) = 1.0 - off_diagonal;
  }
  return h;
}

RwrResult rwr(const Matrix& transition, double restart, const Vector& q_init,
              double tolerance, int max_iterations) {
  const Index n = transition.rows();
  if (transition.cols() != n || q_init.size() != n) {
    throw ArgumentError("transition matrix and start distribution disagree "
                        "on node count");
  }
  if (!(restart >= 0.0 && restart <= 1.0)) {
    throw ArgumentError("restart probability must be in [0, 1]");
  }
  if ((q_init.array() < 0.0).any() || std::fabs(q_init.sum() - 1.0) > 1e-9) {
    throw ArgumentError("start vector is not a probability distribution");
  }
  RwrResult result;
  Vector q = q_init;
  const Matrix ht = transition.transpose();
  for (int it = 1; it <= max_iterations; ++it) {
    Vector next = (1.0 - restart) * (ht * q) + restart * q_init;
    const double change = (next - q).lpNorm<1>();
    q = std::move(next);
    result.iterations = it;
    if (change < tolerance) {
      result.converged = true;
      break;
    }
  }
  result.scores = q;
  return result;
}

RankedCauses rank_nodes(const Vector& scores,
                        const datamodel::CausalGraph& graph, int k) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  if (scores.size() != graph.size()) {
    throw ArgumentError("score vector length does not match the graph");
  }
  std::vector<int> order;
  for (Index i = 0; i < graph.size(); ++i) {
    if (i != graph.kpi_index) order.push_back(static_cast<int>(i));
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return graph.node_labels[static_cast<std::size_t>(a)] <
           graph.node_labels[static_cast<std::size_t>(b)];
  });
  if (static_cast<int>(order.size()) > k) order.resize(static_cast<std::size_t>(k));
  RankedCauses out;
  for (int id : order) {
    out.entries.push_back(
        {id, graph.node_labels[static_cast<std::size_t>(id)], scores(id)});
  }
  return out;
}

RankedCauses localize(const datamodel::CausalGraph& graph,
                      const LocalizeConfig& config, RwrResult* diagnostics) {
  const Matrix h = transition_matrix(graph, config.phi_jump);
  Vector start = Vector::Zero(graph.size());
  start(graph.kpi_index) = 1.0;
  RwrResult walk =
      rwr(h, config.restart, start, config.tolerance, config.max_iterations);
  RankedCauses ranked = rank_nodes(walk.scores, graph, config.top_k);
  if (diagnostics != nullptr) *diagnostics = std::move(walk);
  return ranked;
}

nlohmann::json causes_to_json(const RankedCauses& causes) {
  auto list = nlohmann::json::array();
  for (const auto& e : causes.entries) {
    list.push_back({{"node", e.label}, {"score", e.score}});
  }
  return {{"causes", std::move(list)}};
}

}  // namespace incrca::localize
