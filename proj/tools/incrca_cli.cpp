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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "incrca/config.hpp"
#include "incrca/errors.hpp"
#include "incrca/evalsim.hpp"
#include "incrca/pipeline.hpp"

namespace fs = std::filesystem;
using namespace incrca;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ParseError("'" + path + "' is not valid JSON");
  return doc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

struct DetectArgs {
  std::string input;
  std::string kpi = "kpi";
  trigger::TriggerConfig trigger;
  std::vector<Index> forced;
  bool forward_fill = false;
};

int run_detect(const DetectArgs& args) {
  args.trigger.validate();
  const auto frame =
      datamodel::load_csv(args.input, args.kpi, {args.forward_fill, 0});
  trigger::TriggerMonitor monitor(args.trigger);
  for (Index t : args.forced) monitor.force_at(t);
  for (Index t = 0; t < frame.rows(); ++t) {
    if (auto ev = monitor.push(t, frame.values.row(t))) {
      std::cout << nlohmann::json{{"t", ev->t}, {"y", ev->statistic}}.dump()
                << '\n';
    }
  }
  return 0;
}

struct LearnArgs {
  std::string input;
  std::string kpi = "kpi";
  std::string out_dir = ".";
  int batch_size = 50;
  int history = 200;
  int max_batches = 0;
  bool standardize = false;
  disentangle::LearnerConfig learner;
};

int run_learn(const LearnArgs& args) {
  args.learner.validate();
  if (args.batch_size < 2) throw ConfigError("--batch-size must be >= 2");
  const auto frame = datamodel::load_csv(args.input, args.kpi);
  if (args.history < 2 * args.learner.lag + 2 || args.history >= frame.rows()) {
    throw ConfigError("--history must leave at least one batch and cover " +
                      std::to_string(2 * args.learner.lag + 2) + " rows");
  }
  const auto norm = LearnerNormalizer::fit(
      frame.values.topRows(args.history), args.standardize);
  datamodel::MetricFrame scaled = frame;
  scaled.values = norm.apply(frame.values);

  fs::create_directories(args.out_dir);
  auto boot = disentangle::bootstrap_initial(
      scaled.slice_rows(0, args.history), args.learner);
  datamodel::save_graph(boot.graph,
                        (fs::path(args.out_dir) / "graph_k0.json").string());
  std::cout << nlohmann::json{{"k", 0},
                              {"loss", boot.loss_trace.back()},
                              {"edges", boot.graph.edge_count()}}
                   .dump()
            << '\n';

  auto state = std::move(boot.state);
  for (const auto& batch :
       datamodel::make_batches(scaled, args.history, args.batch_size)) {
    if (args.max_batches > 0 && batch.index > args.max_batches) break;
    const auto result = disentangle::train_batch(state, batch);
    const auto name = "graph_k" + std::to_string(batch.index) + ".json";
    datamodel::save_graph(result.graph, (fs::path(args.out_dir) / name).string());
    std::cout << nlohmann::json{{"k", batch.index},
                                {"loss", result.artifacts.terms.total},
                                {"edges", result.graph.edge_count()}}
                     .dump()
              << '\n';
  }
  return 0;
}

struct LocalizeArgs {
  std::string graph;
  localize::LocalizeConfig config;
};

int run_localize(const LocalizeArgs& args) {
  args.config.validate();
  const auto graph = datamodel::load_graph(args.graph);
  localize::RwrResult diag;
  const auto causes = localize::localize(graph, args.config, &diag);
  if (!diag.converged) {
    std::cerr << "warning: random walk did not converge in "
              << diag.iterations << " iterations\n";
  }
  std::cout << localize::causes_to_json(causes).dump() << '\n';
  return 0;
}

struct SimulateArgs {
  evalsim::SyntheticSpec spec;
  double edge_prob = -1.0;
  std::string out_dir = ".";
};

int run_simulate(SimulateArgs args) {
  if (args.edge_prob < 0) {
    args.spec.edge_prob = evalsim::SyntheticSpec::default_edge_prob(args.spec.m);
  } else {
    args.spec.edge_prob = args.edge_prob;
  }
  try {
    args.spec.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  const auto data = evalsim::generate(args.spec);
  fs::create_directories(args.out_dir);
  datamodel::write_csv(data.frame,
                       (fs::path(args.out_dir) / "data.csv").string());
  auto truth = evalsim::truth_to_json(data);
  truth["kpi"] = data.frame.entity_names[static_cast<std::size_t>(
      data.frame.kpi_index)];
  write_text(fs::path(args.out_dir) / "truth.json", truth.dump(2) + "\n");
  return 0;
}

struct EvalArgs {
  std::string predictions;
  std::string truth;
  std::vector<int> ks{1, 3, 5, 10};
};

std::vector<std::vector<std::string>> prediction_lists(
    const nlohmann::json& doc) {
  auto one = [](const nlohmann::json& causes) {
    std::vector<std::string> labels;
    for (const auto& c : causes) {
      labels.push_back(c.is_string() ? c.get<std::string>()
                                     : c.at("node").get<std::string>());
    }
    return labels;
  };
  std::vector<std::vector<std::string>> out;
  try {
    if (doc.is_object() && doc.contains("episodes")) {
      for (const auto& ep : doc.at("episodes")) out.push_back(one(ep.at("causes")));
    } else if (doc.is_object() && doc.contains("causes")) {
      out.push_back(one(doc.at("causes")));
    } else if (doc.is_array()) {
      for (const auto& item : doc) {
        out.push_back(one(item.is_object() ? item.at("causes") : item));
      }
    } else {
      throw FormatError("");
    }
  } catch (const std::exception&) {
    throw FormatError(
        "predictions must be {\"causes\": [...]}, {\"episodes\": [...]} or a "
        "list of cause lists");
  }
  return out;
}

int run_eval(const EvalArgs& args) {
  const auto truth = read_json(args.truth);
  const auto predicted = prediction_lists(read_json(args.predictions));
  if (!truth.contains("nodes") || !truth.contains("root_causes")) {
    throw FormatError("truth file needs 'nodes' and 'root_causes'");
  }
  std::map<std::string, int> ids;
  for (const auto& label : truth.at("nodes")) {
    ids.emplace(label.get<std::string>(), static_cast<int>(ids.size()));
  }
  auto id_of = [&](const std::string& label, const char* where) {
    auto it = ids.find(label);
    if (it == ids.end()) {
      throw FormatError(std::string(where) + " node '" + label +
                        "' is not in the truth node set");
    }
    return it->second;
  };
  std::set<int> roots;
  for (const auto& label : truth.at("root_causes")) {
    roots.insert(id_of(label.get<std::string>(), "root-cause"));
  }
  std::vector<evalsim::FaultCase> cases;
  for (const auto& list : predicted) {
    evalsim::FaultCase c;
    c.trigger_time = truth.value("trigger", 0);
    c.root_causes = roots;
    for (const auto& label : list) c.predicted.push_back(id_of(label, "predicted"));
    cases.push_back(std::move(c));
  }
  if (cases.empty()) throw FormatError("predictions contain no fault cases");

  int entities = static_cast<int>(ids.size());
  if (truth.contains("kpi")) --entities;
  std::vector<std::pair<std::string, double>> rows;
  for (int k : args.ks) rows.emplace_back("PR@" + std::to_string(k), evalsim::pr_at_k(cases, k));
  for (int k : args.ks) rows.emplace_back("MAP@" + std::to_string(k), evalsim::map_at_k(cases, k));
  rows.emplace_back("MRR", evalsim::mrr(cases));
  double rp = 0.0;
  for (const auto& c : cases) rp += evalsim::ranking_percentile(c, entities);
  rows.emplace_back("RP", rp / static_cast<double>(cases.size()));

  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, value] : rows) doc[name] = value;
  doc["cases"] = cases.size();
  std::cout << doc.dump() << "\n\n";
  std::printf("%-8s %10s\n", "metric", "value");
  for (const auto& [name, value] : rows) {
    std::printf("%-8s %10.4f\n", name.c_str(), value);
  }
  return 0;
}

struct RunArgs {
  std::string config;
  std::string input;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::vector<Index> forced;
};

int run_run(const RunArgs& args) {
  auto config = load_config(args.config);
  for (const auto& o : args.overrides) config.apply_override(o);
  if (!args.input.empty()) config.input = args.input;
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (config.input.empty()) {
    throw ConfigError("no input: pass --input or set io.input");
  }
  config.validate();
  const auto frame =
      datamodel::load_csv(config.input, config.kpi, {config.forward_fill, 0});
  const auto output = run_online(config, frame, args.forced);
  write_run_output(output, config.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming root-cause analysis over metric time series"};
  app.require_subcommand(1);

  DetectArgs detect;
  auto* cmd_detect = app.add_subcommand("detect", "Report trigger points");
  cmd_detect->add_option("--input", detect.input, "metrics CSV")->required();
  cmd_detect->add_option("--kpi", detect.kpi, "KPI column name");
  cmd_detect->add_option("--window", detect.trigger.window, "lag length L");
  cmd_detect->add_option("--energy", detect.trigger.energy, "rank energy");
  cmd_detect->add_option("--c-quantile", detect.trigger.c_quantile);
  cmd_detect->add_option("--kappa", detect.trigger.kappa, "h = kappa * c");
  cmd_detect->add_option("--t0", detect.trigger.base_length, "base length");
  cmd_detect->add_option("--force-trigger", detect.forced, "sample indices");
  cmd_detect->add_flag("--forward-fill", detect.forward_fill);

  LearnArgs learn;
  auto* cmd_learn = app.add_subcommand("learn", "Bootstrap and train per batch");
  cmd_learn->add_option("--input", learn.input, "metrics CSV")->required();
  cmd_learn->add_option("--kpi", learn.kpi);
  cmd_learn->add_option("--out-dir", learn.out_dir);
  cmd_learn->add_option("--batch-size", learn.batch_size);
  cmd_learn->add_option("--history", learn.history, "bootstrap rows");
  cmd_learn->add_option("--max-batches", learn.max_batches, "0 = all");
  cmd_learn->add_option("--epochs", learn.learner.epochs);
  cmd_learn->add_option("--lr", learn.learner.lr);
  cmd_learn->add_option("--lambda1", learn.learner.lambda1);
  cmd_learn->add_option("--lambda2", learn.learner.lambda2);
  cmd_learn->add_option("--seed", learn.learner.seed);
  cmd_learn->add_flag("--standardize", learn.standardize);

  LocalizeArgs loc;
  auto* cmd_localize = app.add_subcommand("localize", "Rank root causes");
  cmd_localize->add_option("--graph", loc.graph, "graph JSON")->required();
  cmd_localize->add_option("--k", loc.config.top_k);
  cmd_localize->add_option("--restart", loc.config.restart);
  cmd_localize->add_option("--phi-jump", loc.config.phi_jump);

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Generate a synthetic fault");
  cmd_sim->add_option("--m", sim.spec.m, "entity count");
  cmd_sim->add_option("--t-normal", sim.spec.t_normal);
  cmd_sim->add_option("--t-fault", sim.spec.t_fault);
  cmd_sim->add_option("--edge-prob", sim.edge_prob, "default 2/m");
  cmd_sim->add_option("--fault-node", sim.spec.fault_node);
  cmd_sim->add_option("--shift", sim.spec.shift_magnitude);
  cmd_sim->add_option("--noise", sim.spec.noise_std);
  cmd_sim->add_option("--seed", sim.spec.seed);
  cmd_sim->add_option("--out-dir", sim.out_dir);

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "Score predictions");
  cmd_eval->add_option("--predictions", ev.predictions)->required();
  cmd_eval->add_option("--truth", ev.truth)->required();
  cmd_eval->add_option("--k", ev.ks, "cutoffs")->delimiter(',');

  RunArgs run;
  auto* cmd_run = app.add_subcommand("run", "Replay a stream online");
  cmd_run->add_option("--config", run.config, "JSON config")->required();
  cmd_run->add_option("--input", run.input);
  cmd_run->add_option("--out-dir", run.out_dir);
  cmd_run->add_option("--set", run.overrides, "key=value override");
  cmd_run->add_option("--force-trigger", run.forced, "sample indices");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*cmd_detect) return run_detect(detect);
    if (*cmd_learn) return run_learn(learn);
    if (*cmd_localize) return run_localize(loc);
    if (*cmd_sim) return run_simulate(sim);
    if (*cmd_eval) return run_eval(ev);
    if (*cmd_run) return run_run(run);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
