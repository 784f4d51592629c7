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

#ifndef INCRCA_CONVERGE_HPP_
#define INCRCA_CONVERGE_HPP_

#include <vector>

#include "incrca/datamodel.hpp"
#include "incrca/localize.hpp"

namespace incrca::converge {

struct ConvergenceConfig {
  double alpha = 0.5;
  double threshold = 0.95;
  double rbo_p = 0.9;

  void validate() const;
};

/// 1 - JS(P(g1) || P(g2)) with base-2 logs, where P(g) is the off-diagonal
/// weight vector plus 1e-12, normalized to sum to one.
double graph_similarity(const datamodel::CausalGraph& g1,
                        const datamodel::CausalGraph& g2);

/// Extrapolated rank-biased overlap with persistence p; handles lists of
/// unequal length. Two empty lists are identical (1.0); one empty list
/// shares nothing (0.0).
double list_similarity(const std::vector<int>& l1, const std::vector<int>& l2,
                       double p);
double list_similarity(const localize::RankedCauses& l1,
                       const localize::RankedCauses& l2, double p);

struct Combined {
  double score;
  bool converged;
};

/// alpha * g_sim + (1 - alpha) * l_sim; converged when strictly above the
/// threshold.
Combined combined(double graph_sim, double list_sim,
                  const ConvergenceConfig& config);

}  // namespace incrca::converge

#endif  // INCRCA_CONVERGE_HPP_
