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

#ifndef INCRCA_LOCALIZE_HPP_
#define INCRCA_LOCALIZE_HPP_

#include <string>
#include <vector>

#include "incrca/datamodel.hpp"

namespace incrca::localize {

struct LocalizeConfig {
  double phi_jump = 0.15;  // off-diagonal rows carry (1 - phi_jump) mass
  double restart = 0.3;
  double tolerance = 1e-10;
  int max_iterations = 10000;
  int top_k = 10;

  void validate() const;
};

struct RankedEntry {
  int node = 0;
  std::string label;
  double score = 0.0;
};

/// Root-cause candidates ordered by score (descending, ties by label).
/// Never contains the KPI node.
struct RankedCauses {
  std::vector<RankedEntry> entries;
  bool kpi_excluded = true;

  std::vector<int> ids() const;
};

/// Row-stochastic transition matrix on the transposed graph. Off-diagonal
/// H[i,j] = (1 - phi) * A^T[i,j] / sum_k A^T[i,k]; the remaining mass of each
/// row sits on the diagonal, so rows without outgoing weight are pure
/// self-loops.
Matrix transition_matrix(const datamodel::CausalGraph& graph, double phi_jump);

struct RwrResult {
  Vector scores;
  int iterations = 0;
  bool converged = false;
};

/// Iterates q <- (1 - restart) * H^T q + restart * q_init until the L1 change
/// drops below `tolerance` or `max_iterations` is reached.
RwrResult rwr(const Matrix& transition, double restart, const Vector& q_init,
              double tolerance, int max_iterations);

/// Sorts entity nodes by score, drops the KPI and truncates to k.
RankedCauses rank_nodes(const Vector& scores,
                        const datamodel::CausalGraph& graph, int k);

/// transition_matrix + rwr from a KPI point mass + rank_nodes.
RankedCauses localize(const datamodel::CausalGraph& graph,
                      const LocalizeConfig& config,
                      RwrResult* diagnostics = nullptr);

nlohmann::json causes_to_json(const RankedCauses& causes);

}  // namespace incrca::localize

#endif  // INCRCA_LOCALIZE_HPP_
