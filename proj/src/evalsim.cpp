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

#include "incrca/evalsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "incrca/errors.hpp"

namespace incrca::evalsim {

namespace {

void require_cases(const std::vector<FaultCase>& cases) {
  if (cases.empty()) throw ArgumentError("metric needs at least one fault");
}

// Hits among the first k predictions divided by min(k, |V|).
double case_precision(const FaultCase& fault, int k) {
  if (fault.root_causes.empty()) {
    throw ArgumentError("fault case has no true root causes");
  }
  int hits = 0;
  const std::size_t limit =
      std::min(fault.predicted.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < limit; ++i) {
    if (fault.root_causes.count(fault.predicted[i]) != 0) ++hits;
  }
  const int denom =
      std::min(k, static_cast<int>(fault.root_causes.size()));
  return static_cast<double>(hits) / static_cast<double>(denom);
}

bool reaches(const Matrix& adjacency, int from, int to) {
  std::vector<int> stack{from};
  std::vector<bool> seen(static_cast<std::size_t>(adjacency.rows()), false);
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    if (u == to) return true;
    if (seen[static_cast<std::size_t>(u)]) continue;
    seen[static_cast<std::size_t>(u)] = true;
    for (Index v = 0; v < adjacency.cols(); ++v) {
      if (adjacency(u, v) != 0.0) stack.push_back(static_cast<int>(v));
    }
  }
  return false;
}

}  // namespace

double pr_at_k(const std::vector<FaultCase>& cases, int k) {
  require_cases(cases);
  if (k < 1) throw ArgumentError("K must be >= 1");
  double total = 0.0;
  for (const auto& c : cases) total += case_precision(c, k);
  return total / static_cast<double>(cases.size());
}

double map_at_k(const std::vector<FaultCase>& cases, int k) {
  require_cases(cases);
  if (k < 1) throw ArgumentError("K must be >= 1");
  double total = 0.0;
  for (const auto& c : cases) {
    for (int j = 1; j <= k; ++j) total += case_precision(c, j);
  }
  return total / (static_cast<double>(k) * static_cast<double>(cases.size()));
}

int first_hit_rank(const FaultCase& fault) {
  for (std::size_t i = 0; i < fault.predicted.size(); ++i) {
    if (fault.root_causes.count(fault.predicted[i]) != 0) {
      return static_cast<int>(i) + 1;
    }
  }
  return 0;
}

double mrr(const std::vector<FaultCase>& cases) {
  require_cases(cases);
  double total = 0.0;
  for (const auto& c : cases) {
    const int rank = first_hit_rank(c);
    if (rank > 0) total += 1.0 / static_cast<double>(rank);
  }
  return total / static_cast<double>(cases.size());
}

double ranking_percentile(const FaultCase& fault, int n_total) {
  const int rank = first_hit_rank(fault);
  if (rank == 0) return 0.0;
  if (n_total < rank) {
    throw ArgumentError("node count " + std::to_string(n_total) +
                        " is smaller than the hit rank " +
                        std::to_string(rank));
  }
  return (1.0 - static_cast<double>(rank) / static_cast<double>(n_total)) *
         100.0;
}

void SyntheticSpec::validate() const {
  if (m < 1) throw ArgumentError("synthetic spec needs m >= 1");
  if (fault_node < 0 || fault_node >= m)
    throw ArgumentError("fault_node must be in [0, m)");
  if (!(edge_prob > 0.0 && edge_prob < 1.0))
    throw ArgumentError("edge_prob must be in (0, 1)");
  if (t_normal < 2 || t_fault < 2)
    throw ArgumentError("t_normal and t_fault must be >= 2");
  if (!(noise_std > 0.0)) throw ArgumentError("noise_std must be > 0");
  if (!(shift_magnitude >= 0.0))
    throw ArgumentError("shift_magnitude must be >= 0");
  if (!(weight_low > 0.0 && weight_low <= weight_high))
    throw ArgumentError("edge weight range must satisfy 0 < low <= high");
  if (!(ar_low >= 0.0 && ar_low <= ar_high && ar_high < 0.95))
    throw ArgumentError("lag coefficient range must satisfy "
                        "0 <= low <= high < 0.95");
  if (burn_in < 0) throw ArgumentError("burn_in must be >= 0");
}

SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  const int n = spec.m + 1;
  const int kpi = spec.m;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> weight(spec.weight_low,
                                                spec.weight_high);
  std::uniform_real_distribution<double> ar(spec.ar_low, spec.ar_high);
  std::normal_distribution<double> noise(0.0, spec.noise_std);

  SyntheticData out;
  Matrix a = Matrix::Zero(n, n);
  std::vector<int> order;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    order.resize(static_cast<std::size_t>(spec.m));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.push_back(kpi);
    a.setZero();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (unit(rng) < spec.edge_prob) {
          a(order[static_cast<std::size_t>(i)],
            order[static_cast<std::size_t>(j)]) = weight(rng);
        }
      }
    }
    if ((a.col(kpi).array() == 0.0).all()) {
      std::uniform_int_distribution<int> pick(0, spec.m - 1);
      a(pick(rng), kpi) = weight(rng);
    }
    ok = reaches(a, spec.fault_node, kpi);
  }
  if (!ok) {
    throw GenerationError("no DAG with a path from the fault node to the KPI "
                          "after 100 draws");
  }
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) d(i, i) = ar(rng);

  const int total = spec.burn_in + spec.t_normal + spec.t_fault;
  Matrix x = Matrix::Zero(total, n);
  double offset = 0.0;
  for (int t = 0; t < total; ++t) {
    if (t == spec.burn_in + spec.t_normal) {
      const auto normal = x.middleRows(spec.burn_in, spec.t_normal)
                              .col(spec.fault_node);
      const double mean = normal.mean();
      const double sd =
          std::sqrt((normal.array() - mean).square().mean());
      offset = spec.shift_magnitude * sd *
               (1.0 - d(spec.fault_node, spec.fault_node));
    }
    for (int j : order) {
      double v = noise(rng);
      if (t > 0) v += d(j, j) * x(t - 1, j);
      for (int i = 0; i < n; ++i) {
        if (a(i, j) != 0.0) v += a(i, j) * x(t, i);
      }
      if (j == spec.fault_node && t >= spec.burn_in + spec.t_normal) v += offset;
      x(t, j) = v;
    }
  }

  datamodel::MetricFrame frame;
  frame.values = x.bottomRows(spec.t_normal + spec.t_fault);
  const std::int64_t start = 1700000000;
  for (int t = 0; t < spec.t_normal + spec.t_fault; ++t) {
    frame.timestamps.push_back(start + 60 * t);
  }
  for (int i = 0; i < spec.m; ++i) {
    frame.entity_names.push_back("e" + std::to_string(i));
  }
  frame.entity_names.push_back("kpi");
  frame.kpi_index = kpi;

  out.frame = std::move(frame);
  out.truth.trigger_time = spec.t_normal;
  out.truth.root_causes = {spec.fault_node};
  out.contemporaneous = a;
  out.lagged = d;
  out.topological_order = order;
  out.shift = offset;
  return out;
}

Vector propagated_shift(const Matrix& contemporaneous, const Matrix& lagged,
                        int node) {
  const Index n = contemporaneous.rows();
  const Matrix system =
      Matrix::Identity(n, n) - contemporaneous - lagged;
  Eigen::RowVectorXd unit = Eigen::RowVectorXd::Zero(n);
  unit(node) = 1.0;
  // Solve s (I - A - D) = e_node for the row vector s.
  return system.transpose().partialPivLu().solve(unit.transpose());
}

nlohmann::json truth_to_json(const SyntheticData& data) {
  const auto& labels = data.frame.entity_names;
  nlohmann::json doc;
  doc["trigger"] = data.truth.trigger_time;
  auto causes = nlohmann::json::array();
  for (int id : data.truth.root_causes) {
    causes.push_back(labels[static_cast<std::size_t>(id)]);
  }
  doc["root_causes"] = causes;
  doc["nodes"] = labels;
  auto edges = nlohmann::json::array();
  const Matrix& a = data.contemporaneous;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) {
        edges.push_back({{"src", labels[static_cast<std::size_t>(i)]},
                         {"dst", labels[static_cast<std::size_t>(j)]},
                         {"weight", a(i, j)}});
      }
    }
  }
  doc["dag"] = edges;
  return doc;
}

EdgeScore edge_f1(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw ArgumentError("edge_f1: estimate and truth differ in shape");
  }
  double tp = 0, fp = 0, fn = 0;
  for (Index i = 0; i < truth.rows(); ++i) {
    for (Index j = 0; j < truth.cols(); ++j) {
      if (i == j) continue;
      const bool e = estimate(i, j) > 0.0;
      const bool t = truth(i, j) != 0.0;
      if (e && t) ++tp;
      if (e && !t) ++fp;
      if (!e && t) ++fn;
    }
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double f1 = precision + recall > 0
                        ? 2 * precision * recall / (precision + recall)
                        : 0.0;
  return {precision, recall, f1};
}

}  // namespace incrca::evalsim
