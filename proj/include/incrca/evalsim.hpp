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

#ifndef INCRCA_EVALSIM_HPP_
#define INCRCA_EVALSIM_HPP_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "incrca/datamodel.hpp"
#include "incrca/localize.hpp"

namespace incrca::evalsim {

/// One fault: where it started, the true root causes and the prediction.
struct FaultCase {
  Index trigger_time = 0;
  std::set<int> root_causes;
  std::vector<int> predicted;  // ranked node ids, unique
};

// Retrieval metrics over a set of faults. All throw ArgumentError on an empty
// case list.
double pr_at_k(const std::vector<FaultCase>& cases, int k);
double map_at_k(const std::vector<FaultCase>& cases, int k);
double mrr(const std::vector<FaultCase>& cases);

/// 1-based rank of the first correct prediction, 0 if none.
int first_hit_rank(const FaultCase& fault);

/// (1 - rank / N) * 100, or 0 when no prediction is correct.
double ranking_percentile(const FaultCase& fault, int n_total);

struct SyntheticSpec {
  int m = 10;           // entities; the KPI is node m
  int t_normal = 600;
  int t_fault = 600;
  double edge_prob = 0.2;
  int fault_node = 0;
  double shift_magnitude = 5.0;  // in stationary std units of the fault node
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  // Range of contemporaneous edge weights and of the per-node lag-1
  // autoregressive coefficient.
  double weight_low = 0.5;
  double weight_high = 1.0;
  double ar_low = 0.1;
  double ar_high = 0.5;
  int burn_in = 200;

  void validate() const;
  /// Default edge probability 2/m, as a convenience for callers.
  static double default_edge_prob(int m) { return 2.0 / m; }
};

struct SyntheticData {
  datamodel::MetricFrame frame;  // t_normal + t_fault rows, KPI last
  FaultCase truth;               // predicted is empty
  Matrix contemporaneous;        // A*, (m+1) x (m+1), strictly DAG
  Matrix lagged;                 // D*, diagonal here
  std::vector<int> topological_order;
  double shift = 0.0;  // absolute size of the injected structural offset
};

/// Simulates X_t = X_t A* + X_{t-1} D* + noise over a random DAG in which
/// the fault node reaches the KPI, then adds a constant offset to the fault
/// node's structural equation for the last t_fault steps.
SyntheticData generate(const SyntheticSpec& spec);

/// Steady-state mean shift of every node for a unit offset on `node`:
/// e_node (I - A - D)^{-1}.
Vector propagated_shift(const Matrix& contemporaneous, const Matrix& lagged,
                        int node);

nlohmann::json truth_to_json(const SyntheticData& data);

/// Edge-level precision / recall / F1 of a directed estimate against truth,
/// counting entries with weight > 0.
struct EdgeScore {
  double precision;
  double recall;
  double f1;
};
EdgeScore edge_f1(const Matrix& estimate, const Matrix& truth);

}  // namespace incrca::evalsim

#endif  // INCRCA_EVALSIM_HPP_
