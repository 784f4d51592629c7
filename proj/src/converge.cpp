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

#include "incrca/converge.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "incrca/errors.hpp"

namespace incrca::converge {

namespace {

constexpr double kSmoothing = 1e-12;

Vector edge_distribution(const datamodel::CausalGraph& g) {
  const Index n = g.size();
  Vector p(n * n - n);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j) p(k++) = g.adjacency(i, j) + kSmoothing;
    }
  }
  return p / p.sum();
}

void require_unique(const std::vector<int>& list) {
  std::unordered_set<int> seen;
  for (int id : list) {
    if (!seen.insert(id).second) {
      throw ArgumentError("ranked list contains duplicate node id " +
                          std::to_string(id));
    }
  }
}

}  // namespace

void ConvergenceConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("converge.alpha must be in [0, 1]");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ConfigError("converge.threshold must be in (0, 1]");
  if (!(rbo_p > 0.0 && rbo_p < 1.0))
    throw ConfigError("converge.rbo_p must be in (0, 1)");
}

double graph_similarity(const datamodel::CausalGraph& g1,
                        const datamodel::CausalGraph& g2) {
  if (g1.size() != g2.size() || g1.node_labels != g2.node_labels) {
    throw ArgumentError("graphs have different node sets");
  }
  if (g1.size() < 2) return 1.0;
  const Vector p = edge_distribution(g1);
  const Vector q = edge_distribution(g2);
  double js = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p(i) + q(i));
    js += 0.5 * p(i) * std::log2(p(i) / m) + 0.5 * q(i) * std::log2(q(i) / m);
  }
  js = std::clamp(js, 0.0, 1.0);
  return 1.0 - js;
}

double list_similarity(const std::vector<int>& l1, const std::vector<int>& l2,
                       double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ArgumentError("RBO persistence must be in (0, 1)");
  }
  require_unique(l1);
  require_unique(l2);
  if (l1.empty() && l2.empty()) return 1.0;
  if (l1.empty() || l2.empty()) return 0.0;

  const auto& longer = l1.size() >= l2.size() ? l1 : l2;
  const auto& shorter = l1.size() >= l2.size() ? l2 : l1;
  const std::size_t s = shorter.size();
  const std::size_t l = longer.size();

  std::unordered_set<int> seen_long, seen_short;
  double overlap = 0.0;
  double overlap_at_s = 0.0;
  double sum = 0.0;
  double weight = 1.0;  // p^d
  for (std::size_t d = 1; d <= l; ++d) {
    weight *= p;
    const int a = longer[d - 1];
    if (d <= s) {
      const int b = shorter[d - 1];
      if (a == b) {
        overlap += 1.0;
      } else {
        if (seen_short.count(a) != 0) overlap += 1.0;
        if (seen_long.count(b) != 0) overlap += 1.0;
      }
      seen_long.insert(a);
      seen_short.insert(b);
      if (d == s) overlap_at_s = overlap;
    } else {
      if (seen_short.count(a) != 0) overlap += 1.0;
      seen_long.insert(a);
      // Overlap of the truncated short list is extrapolated to depth d.
      sum += overlap_at_s * static_cast<double>(d - s) /
             (static_cast<double>(s) * static_cast<double>(d)) * weight;
    }
    sum += overlap / static_cast<double>(d) * weight;
  }
  const double tail = ((overlap - overlap_at_s) / static_cast<double>(l) +
                       overlap_at_s / static_cast<double>(s)) *
                      weight;
  return std::clamp((1.0 - p) / p * sum + tail, 0.0, 1.0);
}

double list_similarity(const localize::RankedCauses& l1,
                       const localize::RankedCauses& l2, double p) {
  return list_similarity(l1.ids(), l2.ids(), p);
}

Combined combined(double graph_sim, double list_sim,
                  const ConvergenceConfig& config) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(graph_sim) || !in_unit(list_sim)) {
    throw ArgumentError("similarities must lie in [0, 1]");
  }
  if (!in_unit(config.alpha)) throw ArgumentError("alpha must lie in [0, 1]");
  const double score =
      config.alpha * graph_sim + (1.0 - config.alpha) * list_sim;
  return {score, score > config.threshold};
}

}  // namespace incrca::converge
