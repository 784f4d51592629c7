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

#include "incrca/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "incrca/errors.hpp"

namespace incrca {

namespace {

template <typename T>
T as(const nlohmann::json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!value.is_number()) throw ConfigError("");
    } else {
      if (!value.is_string()) throw ConfigError("");
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " +
                      value.dump());
  }
}

using Setter = std::function<void(const nlohmann::json&, const std::string&)>;

template <typename T>
Setter bind(T& field) {
  return [&field](const nlohmann::json& v, const std::string& key) {
    field = as<T>(v, key);
  };
}

std::map<std::string, Setter> setters(PipelineConfig& c) {
  return {
      {"trigger.window", bind(c.trigger.window)},
      {"trigger.energy", bind(c.trigger.energy)},
      {"trigger.c_quantile", bind(c.trigger.c_quantile)},
      {"trigger.kappa", bind(c.trigger.kappa)},
      {"trigger.t0", bind(c.trigger.base_length)},
      {"learner.batch_size", bind(c.batch_size)},
      {"learner.max_batches", bind(c.max_batches)},
      {"learner.standardize", bind(c.standardize)},
      {"learner.lag", bind(c.learner.lag)},
      {"learner.embed_u", bind(c.learner.embed_u)},
      {"learner.hidden_h", bind(c.learner.hidden_h)},
      {"learner.embed_z", bind(c.learner.embed_z)},
      {"learner.gcn_hidden", bind(c.learner.gcn_hidden)},
      {"learner.epochs", bind(c.learner.epochs)},
      {"learner.lr", bind(c.learner.lr)},
      {"learner.lambda1", bind(c.learner.lambda1)},
      {"learner.lambda2", bind(c.learner.lambda2)},
      {"learner.seed", bind(c.learner.seed)},
      {"learner.rho_max", bind(c.learner.rho_max)},
      {"learner.edge_threshold", bind(c.learner.edge_threshold)},
      {"learner.bootstrap_epochs", bind(c.learner.bootstrap_epochs)},
      {"learner.bootstrap_lr", bind(c.learner.bootstrap_lr)},
      {"converge.alpha", bind(c.converge.alpha)},
      {"converge.threshold", bind(c.converge.threshold)},
      {"converge.rbo_p", bind(c.converge.rbo_p)},
      {"localize.phi_jump", bind(c.localize.phi_jump)},
      {"localize.restart", bind(c.localize.restart)},
      {"localize.tolerance", bind(c.localize.tolerance)},
      {"localize.max_iterations", bind(c.localize.max_iterations)},
      {"localize.k", bind(c.localize.top_k)},
      {"pipeline.channel_capacity", bind(c.channel_capacity)},
      {"io.input", bind(c.input)},
      {"io.kpi", bind(c.kpi)},
      {"io.out_dir", bind(c.out_dir)},
      {"io.forward_fill", bind(c.forward_fill)},
  };
}

void flatten(const nlohmann::json& node, const std::string& prefix,
             std::vector<std::pair<std::string, nlohmann::json>>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else {
    out.emplace_back(prefix, node);
  }
}

}  // namespace

void PipelineConfig::validate() const {
  trigger.validate();
  learner.validate();
  converge.validate();
  localize.validate();
  if (batch_size < 2 * learner.lag + 2) {
    throw ConfigError("learner.batch_size must be >= 2 * learner.lag + 2");
  }
  if (max_batches < 1) throw ConfigError("learner.max_batches must be >= 1");
  if (channel_capacity < 1)
    throw ConfigError("pipeline.channel_capacity must be >= 1");
  if (kpi.empty()) throw ConfigError("io.kpi must not be empty");
}

void PipelineConfig::set(const std::string& key, const nlohmann::json& value) {
  auto table = setters(*this);
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(value, key);
}

void PipelineConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set(key, value);
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json doc;
  doc["trigger.window"] = trigger.window;
  doc["trigger.energy"] = trigger.energy;
  doc["trigger.c_quantile"] = trigger.c_quantile;
  doc["trigger.kappa"] = trigger.kappa;
  doc["trigger.t0"] = trigger.base_length;
  doc["learner.batch_size"] = batch_size;
  doc["learner.max_batches"] = max_batches;
  doc["learner.standardize"] = standardize;
  doc["learner.lag"] = learner.lag;
  doc["learner.embed_u"] = learner.embed_u;
  doc["learner.hidden_h"] = learner.hidden_h;
  doc["learner.embed_z"] = learner.embed_z;
  doc["learner.gcn_hidden"] = learner.gcn_hidden;
  doc["learner.epochs"] = learner.epochs;
  doc["learner.lr"] = learner.lr;
  doc["learner.lambda1"] = learner.lambda1;
  doc["learner.lambda2"] = learner.lambda2;
  doc["learner.seed"] = learner.seed;
  doc["learner.rho_max"] = learner.rho_max;
  doc["learner.edge_threshold"] = learner.edge_threshold;
  doc["learner.bootstrap_epochs"] = learner.bootstrap_epochs;
  doc["learner.bootstrap_lr"] = learner.bootstrap_lr;
  doc["converge.alpha"] = converge.alpha;
  doc["converge.threshold"] = converge.threshold;
  doc["converge.rbo_p"] = converge.rbo_p;
  doc["localize.phi_jump"] = localize.phi_jump;
  doc["localize.restart"] = localize.restart;
  doc["localize.tolerance"] = localize.tolerance;
  doc["localize.max_iterations"] = localize.max_iterations;
  doc["localize.k"] = localize.top_k;
  doc["pipeline.channel_capacity"] = channel_capacity;
  doc["io.input"] = input;
  doc["io.kpi"] = kpi;
  doc["io.out_dir"] = out_dir;
  doc["io.forward_fill"] = forward_fill;
  return doc;
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig config;
  std::vector<std::pair<std::string, nlohmann::json>> entries;
  flatten(doc, "", entries);
  for (const auto& [key, value] : entries) config.set(key, value);
  return config;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw ConfigError("config file '" + path + "' is not valid JSON");
  }
  return config_from_json(doc);
}

}  // namespace incrca
