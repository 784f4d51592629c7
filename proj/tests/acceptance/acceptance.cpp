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

// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--expect-fail 7,...] [--only 1,2,...]
//
// Exits non-zero when a criterion fails that is not listed in --expect-fail.
// An expected failure is still printed as FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <array>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../support/cli_runner.hpp"
#include "../support/gradient_suite.hpp"
#include "../support/oracles.hpp"
#include "../support/streams.hpp"
#include "incrca/converge.hpp"
#include "incrca/disentangle.hpp"
#include "incrca/evalsim.hpp"
#include "incrca/graddsl.hpp"
#include "incrca/localize.hpp"
#include "incrca/trigger.hpp"

using namespace incrca;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

datamodel::CausalGraph labeled(const Matrix& a) {
  datamodel::CausalGraph g;
  g.adjacency = a;
  for (Index i = 0; i + 1 < a.rows(); ++i) g.node_labels.push_back("e" + std::to_string(i));
  g.node_labels.push_back("kpi");
  g.kpi_index = static_cast<int>(a.rows() - 1);
  return g;
}

// ---- 1 -------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const double primitives = oracle::primitive_sweep(20, 1);

  evalsim::SyntheticSpec spec;
  spec.m = 3;  // 4 nodes with the KPI
  spec.t_normal = 80;
  spec.t_fault = 20;
  spec.edge_prob = 0.5;
  spec.seed = 1;
  const auto data = evalsim::generate(spec);
  disentangle::LearnerConfig cfg;
  cfg.embed_u = cfg.hidden_h = cfg.embed_z = cfg.gcn_hidden = 4;
  cfg.bootstrap_epochs = 50;
  cfg.rho_max = 32;
  auto boot = disentangle::bootstrap_initial(data.frame.slice_rows(0, 60), cfg);
  std::mt19937_64 rng(2);
  for (Matrix* p : boot.state.params.all())
    *p = oracle::random_matrix(p->rows(), p->cols(), rng, -0.5, 0.5);
  const double full = oracle::learner_gradient_error(
      boot.state, {data.frame.values.middleRows(60, 16), 1});
  const double secs = seconds_since(t0);
  const double worst = std::max(primitives, full);
  return {worst <= 1e-4 && secs < 30.0,
          fmt("max rel err primitives %.2e, full objective %.2e (tol 1e-4); %.1f s (limit 30 s)",
              primitives, full, secs)};
}

// ---- 2 -------------------------------------------------------------------

Outcome acyclicity() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 10);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_dag = 0.0, least_cycle = 1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = size(rng);
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) a(i, j) = 3.0 * u(rng) - 1.5;
    worst_dag = std::max(worst_dag, graddsl::acyclicity(a));
  }
  for (int trial = 0; trial < 100; ++trial) {
    // DAG background plus one back edge closing a 2-cycle whose weight (the
    // product of its two edges) is at least 0.5.
    const Index n = size(rng);
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        if (u(rng) < 0.3) a(i, j) = u(rng);
    const Index i = static_cast<Index>(rng() % static_cast<std::uint64_t>(n - 1));
    const Index j = i + 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(n - 1 - i));
    const double lo = std::sqrt(0.5);
    a(i, j) = lo + (1.0 - lo) * u(rng);
    a(j, i) = lo + (1.0 - lo) * u(rng);
    least_cycle = std::min(least_cycle, graddsl::acyclicity(a));
  }
  const double closed = graddsl::acyclicity(Matrix{{0, 1}, {1, 0}});
  const double closed_err = std::abs(closed - (2.0 * std::cosh(1.0) - 2.0));
  return {worst_dag <= 1e-12 && least_cycle > 0.1 && closed_err <= 1e-9,
          fmt("max h on DAGs %.1e (tol 1e-12); min h with 2-cycle %.4f (> 0.1); "
              "|h - (2cosh(1)-2)| = %.1e (tol 1e-9)",
              worst_dag, least_cycle, closed_err)};
}

// ---- 3 -------------------------------------------------------------------

Outcome fusion() {
  std::mt19937_64 rng(4);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 2 + trial % 19;
    const Matrix f = disentangle::fuse(oracle::random_matrix(n, n, rng, 0, 1),
                                       oracle::random_matrix(n, n, rng, 0, 1));
    if (!f.cwiseProduct(f.transpose()).isZero(0.0) || !f.diagonal().isZero(0.0))
      ++violations;
  }
  return {violations == 0, fmt("%d of 1000 random pairs violate exact antisymmetry or "
                               "empty diagonal",
                               violations)};
}

// ---- 4 -------------------------------------------------------------------

Outcome rwr_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0.0;
  int rank_changes = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index m = 2 + trial % 19;
    const Index n = m + 1;
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && u(rng) < 2.5 / static_cast<double>(n)) a(i, j) = 0.05 + u(rng);
    localize::LocalizeConfig cfg;
    cfg.tolerance = 1e-14;
    cfg.max_iterations = 100000;
    cfg.top_k = static_cast<int>(m);
    localize::RwrResult diag;
    const auto base = localize::localize(labeled(a), cfg, &diag).ids();
    const Vector expected = oracle::power_iteration(oracle::transition(a, cfg.phi_jump),
                                                    cfg.restart, static_cast<int>(m));
    worst = std::max(worst, (diag.scores - expected).cwiseAbs().maxCoeff());
    for (double gamma : {0.1, 1.0, 10.0})
      if (localize::localize(labeled(gamma * a), cfg).ids() != base) ++rank_changes;
  }
  return {worst <= 1e-10 && rank_changes == 0,
          fmt("max |q - q_oracle| %.1e (tol 1e-10); %d ranking changes under scaling",
              worst, rank_changes)};
}

// ---- 5 -------------------------------------------------------------------

Outcome trigger_detection() {
  const trigger::TriggerConfig cfg;
  const Index change = 400;
  int on_time = 0;
  std::vector<long> delays;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index channels = 3 + static_cast<Index>(seed % 4);
    Matrix x = streams::stationary(channels, 600, 1000 + seed);
    streams::inject_shift(x, static_cast<Index>(seed) % channels, change, 200, 5.0);
    const auto delay = streams::detection_delay(streams::replay(x, cfg), change);
    delays.push_back(delay ? static_cast<long>(*delay) : -1);
    if (delay && *delay <= 3 * cfg.window) ++on_time;
  }
  const Matrix calm = streams::stationary(4, cfg.base_length + 10000, 77);
  const auto r = streams::replay(calm, cfg);
  const double rate = static_cast<double>(r.triggers.size()) / 10000.0;
  const long worst = *std::max_element(delays.begin(), delays.end());
  return {on_time >= 18 && rate <= 0.01,
          fmt("%d/20 shifts detected within %d samples (need 18), worst delay %ld; "
              "false-trigger rate %.4f over 10000 samples (limit 0.01)",
              on_time, 3 * cfg.window, worst, rate)};
}

// ---- 6 -------------------------------------------------------------------

Outcome bootstrap_recovery() {
  double total = 0.0, lowest = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    evalsim::SyntheticSpec spec;
    spec.m = 4;  // 5 nodes with the KPI
    spec.t_normal = 500;
    spec.t_fault = 2;
    spec.edge_prob = 0.5;
    spec.noise_std = 0.01;
    spec.shift_magnitude = 0.0;
    spec.seed = seed;
    const auto data = evalsim::generate(spec);
    const auto boot = disentangle::bootstrap_initial(data.frame.slice_rows(0, 500),
                                                     disentangle::LearnerConfig{});
    const double f1 = evalsim::edge_f1(boot.graph.adjacency, data.contemporaneous).f1;
    total += f1;
    lowest = std::min(lowest, f1);
  }
  const double mean = total / 10.0;
  return {mean >= 0.8, fmt("mean edge F1 %.3f over 10 seeds (need 0.8), lowest seed %.3f",
                           mean, lowest)};
}

// ---- 7 -------------------------------------------------------------------

Outcome end_to_end() {
  cli_runner::Workspace ws("incrca_acceptance_e2e");
  std::ofstream(ws.path("config.json")) << "{}\n";
  double pr5 = 0.0, rr = 0.0, slowest = 0.0;
  int converged = 0, failures = 0;
  const int runs = 20;
  for (int seed = 0; seed < runs; ++seed) {
    const int m = std::array{10, 20, 30}[static_cast<std::size_t>(seed % 3)];
    const int fault = (7 * seed + 3) % m;
    const std::string dir = ws.path("s" + std::to_string(seed));
    const auto t0 = std::chrono::steady_clock::now();
    const auto sim = cli_runner::run(fmt("simulate --m %d --fault-node %d --seed %d --out-dir %s",
                                         m, fault, seed, dir.c_str()));
    const auto run = cli_runner::run("run --config " + ws.path("config.json") + " --input " +
                                     dir + "/data.csv --out-dir " + dir + "/out");
    slowest = std::max(slowest, seconds_since(t0));
    if (sim.code != 0 || run.code != 0) {
      ++failures;
      continue;
    }
    // Score the episode whose trigger is closest to the fault onset.
    const json truth = json::parse(cli_runner::slurp(dir + "/truth.json"));
    const json causes = json::parse(cli_runner::slurp(dir + "/out/causes.json"));
    const long onset = truth["trigger"];
    json chosen;
    long best = -1;
    for (const auto& ep : causes["episodes"]) {
      const long gap = std::labs(ep["trigger"].get<long>() - onset);
      if (best < 0 || gap < best) {
        best = gap;
        chosen = ep;
      }
    }
    if (chosen.is_null()) continue;  // no trigger at all: a miss
    converged += chosen["converged"].get<bool>();
    std::ofstream(dir + "/chosen.json") << json{{"causes", chosen["causes"]}}.dump();
    const auto eval = cli_runner::run("eval --k 5 --predictions " + dir +
                                      "/chosen.json --truth " + dir + "/truth.json");
    if (eval.code != 0) {
      ++failures;
      continue;
    }
    const json metrics = json::parse(eval.out.substr(0, eval.out.find("\n\n")));
    pr5 += metrics["PR@5"].get<double>();
    rr += metrics["MRR"].get<double>();
  }
  pr5 /= runs;
  rr /= runs;
  return {failures == 0 && pr5 >= 0.8 && rr >= 0.5 && slowest < 300.0,
          fmt("PR@5 %.2f (need 0.8), MRR %.3f (need 0.5) over %d faults with m in "
              "{10,20,30}; %d converged; %d tool errors; slowest run %.1f s (limit 300 s)",
              pr5, rr, runs, converged, failures, slowest)};
}

// ---- 8 and 10 share two identical runs -----------------------------------

struct TwinRuns {
  bool ok = false;
  std::string events_a, events_b, conv_a, conv_b;
};

const TwinRuns& twin_runs() {
  static const TwinRuns runs = [] {
    TwinRuns r;
    cli_runner::Workspace ws("incrca_acceptance_twin");
    std::ofstream(ws.path("config.json")) << R"({"learner": {"seed": 11}})" << "\n";
    if (cli_runner::run("simulate --m 10 --fault-node 4 --seed 5 --out-dir " + ws.path("sim"))
            .code != 0)
      return r;
    for (const char* tag : {"a", "b"}) {
      if (cli_runner::run("run --config " + ws.path("config.json") + " --input " +
                          ws.path("sim/data.csv") + " --out-dir " + ws.path(tag))
              .code != 0)
        return r;
    }
    r.events_a = cli_runner::slurp(ws.path("a/events.jsonl"));
    r.events_b = cli_runner::slurp(ws.path("b/events.jsonl"));
    r.conv_a = cli_runner::slurp(ws.path("a/convergence.jsonl"));
    r.conv_b = cli_runner::slurp(ws.path("b/convergence.jsonl"));
    r.ok = true;
    return r;
  }();
  return runs;
}

Outcome convergence_metrics() {
  std::mt19937_64 rng(8);
  double graph_err = 0.0, same_err = 0.0, disjoint = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 20;
    Matrix a = oracle::random_matrix(n, n, rng, 0, 1);
    a.diagonal().setZero();
    graph_err = std::max(graph_err, std::abs(1.0 - converge::graph_similarity(labeled(a),
                                                                              labeled(a))));
    std::vector<int> l(static_cast<std::size_t>(n));
    std::iota(l.begin(), l.end(), 0);
    std::shuffle(l.begin(), l.end(), rng);
    std::vector<int> other;
    for (int v : l) other.push_back(v + 1000);
    same_err = std::max(same_err, std::abs(1.0 - converge::list_similarity(l, l, 0.9)));
    disjoint = std::max(disjoint, converge::list_similarity(l, other, 0.9));
  }
  const auto& twins = twin_runs();
  const bool identical = twins.ok && !twins.conv_a.empty() && twins.conv_a == twins.conv_b;
  const auto records = std::count(twins.conv_a.begin(), twins.conv_a.end(), '\n');
  return {graph_err <= 1e-12 && same_err <= 1e-12 && disjoint == 0.0 && identical,
          fmt("|1 - sim_G(g,g)| %.1e; |1 - RBO(l,l)| %.1e; max RBO on disjoint %.1e; "
              "%ld per-batch scores %s across two seeded runs",
              graph_err, same_err, disjoint, static_cast<long>(records),
              identical ? "bit-identical" : "DIFFER")};
}

// ---- 9 -------------------------------------------------------------------

Outcome metric_formulas() {
  evalsim::FaultCase c;
  c.root_causes = {2};
  c.predicted = {5, 2, 7};
  const std::vector<evalsim::FaultCase> cases{c};
  const double pr3 = evalsim::pr_at_k(cases, 3);
  const double map3 = evalsim::map_at_k(cases, 3);
  const double rr = evalsim::mrr(cases);
  evalsim::FaultCase top;
  top.root_causes = {2};
  top.predicted = {2, 5, 7};
  const double rp = evalsim::ranking_percentile(top, 10);
  const bool ok = std::abs(pr3 - 1.0) <= 1e-12 && std::abs(map3 - 2.0 / 3.0) <= 1e-12 &&
                  std::abs(rr - 0.5) <= 1e-12 && std::abs(rp - 90.0) <= 1e-12;
  return {ok, fmt("PR@3 %.15g, MAP@3 %.15g, MRR %.15g, RP %.15g", pr3, map3, rr, rp)};
}

// ---- 10 ------------------------------------------------------------------

Outcome determinism() {
  const auto& twins = twin_runs();
  const bool same = twins.ok && !twins.events_a.empty() && twins.events_a == twins.events_b;
  const auto lines = std::count(twins.events_a.begin(), twins.events_a.end(), '\n');
  return {same, fmt("two `run` executions: %ld event lines, %s", static_cast<long>(lines),
                    same ? "byte-identical" : "DIFFER")};
}

std::set<int> parse_ids(const std::string& list) {
  std::set<int> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expect_fail, only;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--expect-fail") expect_fail = parse_ids(argv[i + 1]);
    else if (flag == "--only") only = parse_ids(argv[i + 1]);
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradients},
      {"acyclicity oracle", acyclicity},
      {"fusion invariant", fusion},
      {"RWR oracle equivalence", rwr_oracle},
      {"trigger detection", trigger_detection},
      {"bootstrap structure recovery", bootstrap_recovery},
      {"end-to-end root-cause recovery", end_to_end},
      {"convergence metrics", convergence_metrics},
      {"metric formulas", metric_formulas},
      {"determinism", determinism},
  };
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && only.count(id) == 0) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool expected = expect_fail.count(id) != 0;
    std::printf("[%s] %2d %-32s %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str(), seconds_since(t0),
                !o.pass && expected ? " [known failure]" : "");
    std::fflush(stdout);
    if (!o.pass && !expected) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
