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

#ifndef INCRCA_CONFIG_HPP_
#define INCRCA_CONFIG_HPP_

#include <string>
#include <vector>

#include "incrca/converge.hpp"
#include "incrca/disentangle.hpp"
#include "incrca/localize.hpp"
#include "incrca/trigger.hpp"

namespace incrca {

struct PipelineConfig {
  trigger::TriggerConfig trigger;
  disentangle::LearnerConfig learner;
  converge::ConvergenceConfig converge;
  localize::LocalizeConfig localize;

  int batch_size = 50;
  int max_batches = 50;
  // false: learner data is centered per channel and divided by one pooled
  // scale, which keeps relative variances. true: per-channel z-score.
  bool standardize = false;
  int channel_capacity = 256;

  std::string input;
  std::string kpi = "kpi";
  std::string out_dir = ".";
  bool forward_fill = false;

  void validate() const;

  /// Sets one flat key (`trigger.window`, `learner.lr`, ...) from JSON.
  void set(const std::string& key, const nlohmann::json& value);
  /// `key=value`; the value is parsed as JSON, falling back to a string.
  void apply_override(const std::string& assignment);

  nlohmann::json to_json() const;
};

/// Reads a JSON config. Nested objects are flattened with '.', so
/// {"trigger": {"window": 8}} and {"trigger.window": 8} are equivalent.
/// Throws ConfigError on a missing file, bad JSON or an unknown key.
PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json(const nlohmann::json& doc);

}  // namespace incrca

#endif  // INCRCA_CONFIG_HPP_
