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

#include "incrca/pipeline.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include "incrca/errors.hpp"

namespace incrca {

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::kNormal: return "NORMAL";
    case Phase::kTriggered: return "TRIGGERED";
    case Phase::kLearning: return "LEARNING";
    case Phase::kConverged: return "CONVERGED";
    case Phase::kUnconverged: return "UNCONVERGED";
    case Phase::kAborted: return "ABORTED";
  }
  return "?";
}

nlohmann::json PipelineEvent::to_json() const {
  nlohmann::json doc;
  doc["t"] = t;
  doc["phase"] = phase_name(phase);
  doc["k"] = k;
  doc["score"] = score ? nlohmann::json(*score) : nlohmann::json(nullptr);
  doc["top"] = top ? nlohmann::json(*top) : nlohmann::json(nullptr);
  if (graph_from) doc["graph_from"] = *graph_from;
  if (!detail.empty()) doc["detail"] = detail;
  return doc;
}

nlohmann::json ConvergenceRecord::to_json() const {
  return {{"k", k},
          {"sg", graph_sim},
          {"sl", list_sim},
          {"score", score},
          {"converged", converged}};
}

LearnerNormalizer LearnerNormalizer::fit(const Matrix& base, bool standardize) {
  const auto stats = datamodel::ChannelStats::fit(base, 0, base.rows());
  LearnerNormalizer out;
  out.mean = stats.mean.transpose();
  out.scale = stats.stddev.transpose();
  const double pooled = std::sqrt(out.scale.array().square().mean());
  for (Index c = 0; c < out.scale.size(); ++c) {
    if (out.scale(c) < datamodel::kMinStddev) {
      out.scale(c) = 1.0;  // constant channel: centering already zeroes it
    } else if (!standardize) {
      out.scale(c) = pooled;
    }
  }
  return out;
}

Eigen::RowVectorXd LearnerNormalizer::apply(const Eigen::RowVectorXd& row) const {
  return (row - mean).cwiseQuotient(scale);
}

Matrix LearnerNormalizer::apply(const Matrix& rows) const {
  return (rows.rowwise() - mean).array().rowwise() / scale.array();
}

OnlinePipeline::OnlinePipeline(PipelineConfig config,
                               std::vector<std::string> labels, int kpi_index)
    : config_(std::move(config)),
      labels_(std::move(labels)),
      kpi_index_(kpi_index) {
  config_.validate();
}

void OnlinePipeline::emit(PipelineEvent event) {
  if (event_sink_) event_sink_(event);
}

void OnlinePipeline::consume(const Sample& sample) {
  if (!normalizer_) {
    raw_base_.push_back(sample.values);
    if (static_cast<int>(raw_base_.size()) == config_.trigger.base_length) {
      Matrix base(static_cast<Index>(raw_base_.size()), sample.values.size());
      for (std::size_t i = 0; i < raw_base_.size(); ++i) {
        base.row(static_cast<Index>(i)) = raw_base_[i];
      }
      normalizer_ = LearnerNormalizer::fit(base, config_.standardize);
      for (const auto& row : raw_base_) history_.push_back(normalizer_->apply(row));
      raw_base_.clear();
      emit({sample.t, Phase::kNormal, 0, {}, {}, {}, {}});
    }
  } else {
    history_.push_back(normalizer_->apply(sample.values));
  }

  if (sample.triggered) {
    pending_triggers_.push_back(sample.t);
    detector_ready_ = false;
  }
  if (sample.detector_ready) detector_ready_ = true;

  if (phase_ == Phase::kLearning) {
    advance_learning();
  } else if (phase_ != Phase::kNormal) {
    maybe_return_to_normal(sample.t);
  } else if (!pending_triggers_.empty()) {
    const Index tau = pending_triggers_.front();
    pending_triggers_.pop_front();
    start_episode(tau);
  }
}

void OnlinePipeline::start_episode(Index trigger) {
  ++episode_;
  const Index n = static_cast<Index>(labels_.size());
  if (!learner_) {
    datamodel::MetricFrame past;
    past.values.resize(trigger, n);
    for (Index r = 0; r < trigger; ++r) past.values.row(r) = history_[r];
    past.entity_names = labels_;
    past.kpi_index = kpi_index_;
    auto boot = disentangle::bootstrap_initial(past, config_.learner);
    learner_ = std::move(boot.state);
    graph_ = std::move(boot.graph);
    graph_episode_ = 0;
  } else {
    const Index rho = std::min<Index>(config_.learner.rho_max, trigger);
    Matrix past(rho, n);
    for (Index r = 0; r < rho; ++r) {
      past.row(r) = history_[static_cast<std::size_t>(trigger - rho + r)];
    }
    learner_->prev_graph = *graph_;
    learner_->begin_state(past);
  }

  PipelineEvent ev{trigger, Phase::kTriggered, 0, {}, {}, graph_episode_, {}};
  emit(ev);

  phase_ = Phase::kLearning;
  episode_start_ = trigger;
  next_batch_start_ = trigger;
  k_ = 0;
  last_graph_.reset();
  last_causes_.reset();
  advance_learning();
}

void OnlinePipeline::advance_learning() {
  while (phase_ == Phase::kLearning &&
         next_batch_start_ + config_.batch_size <=
             static_cast<Index>(history_.size())) {
    train_next_batch();
  }
}

namespace {

std::vector<std::string> labels_of(const localize::RankedCauses& causes) {
  std::vector<std::string> out;
  for (const auto& e : causes.entries) out.push_back(e.label);
  return out;
}

}  // namespace

void OnlinePipeline::train_next_batch() {
  const Index b = config_.batch_size;
  const Index n = static_cast<Index>(labels_.size());
  datamodel::Batch batch;
  batch.index = ++k_;
  batch.values.resize(b, n);
  for (Index r = 0; r < b; ++r) {
    batch.values.row(r) =
        history_[static_cast<std::size_t>(next_batch_start_ + r)];
  }
  const Index t = next_batch_start_ + b - 1;
  next_batch_start_ += b;

  std::optional<disentangle::TrainResult> result;
  try {
    result = disentangle::train_batch(*learner_, batch);
  } catch (const DivergenceError&) {
    const double lr = learner_->config.lr;
    learner_->config.lr = lr / 2.0;
    try {
      result = disentangle::train_batch(*learner_, batch);
    } catch (const DivergenceError& again) {
      learner_->config.lr = lr;
      PipelineEvent ev{t, Phase::kAborted, k_, {}, {}, {}, again.what()};
      emit(ev);
      episodes_.push_back({episode_, episode_start_, false, k_, {}});
      phase_ = Phase::kAborted;
      maybe_return_to_normal(t);
      return;
    }
    learner_->config.lr = lr;
  }

  const auto causes = localize::localize(result->graph, config_.localize);
  std::optional<double> score;
  bool converged = false;
  if (last_graph_) {
    ConvergenceRecord rec;
    rec.k = k_;
    rec.graph_sim = converge::graph_similarity(*last_graph_, result->graph);
    rec.list_sim =
        converge::list_similarity(*last_causes_, causes, config_.converge.rbo_p);
    const auto c =
        converge::combined(rec.graph_sim, rec.list_sim, config_.converge);
    rec.score = c.score;
    rec.converged = c.converged;
    if (convergence_sink_) convergence_sink_(rec);
    score = c.score;
    converged = c.converged;
  }
  emit({t, Phase::kLearning, k_, score, labels_of(causes), {}, {}});
  last_graph_ = result->graph;
  last_causes_ = causes;

  if (converged) {
    end_episode(Phase::kConverged, t);
  } else if (k_ >= config_.max_batches) {
    end_episode(Phase::kUnconverged, t);
  }
}

void OnlinePipeline::end_episode(Phase outcome, Index t) {
  PipelineEvent ev{t, outcome, k_, {}, {}, {}, {}};
  EpisodeResult result{episode_, episode_start_,
                       outcome == Phase::kConverged, k_, {}};
  if (last_causes_) {
    ev.top = labels_of(*last_causes_);
    result.causes = *last_causes_;
  }
  emit(ev);
  episodes_.push_back(std::move(result));
  if (last_graph_) {
    graph_ = *last_graph_;
    graph_episode_ = episode_;
  }
  phase_ = outcome;
  maybe_return_to_normal(t);
}

void OnlinePipeline::maybe_return_to_normal(Index t) {
  if (!detector_ready_) return;
  phase_ = Phase::kNormal;
  emit({t, Phase::kNormal, 0, {}, {}, {}, {}});
  if (!pending_triggers_.empty()) {
    const Index tau = pending_triggers_.front();
    pending_triggers_.pop_front();
    start_episode(tau);
  }
}

void OnlinePipeline::finish() {
  const Index last = static_cast<Index>(history_.size()) - 1;
  for (;;) {
    if (phase_ == Phase::kLearning) {
      end_episode(Phase::kUnconverged, last);
    }
    if (pending_triggers_.empty()) break;
    // The detector never re-armed before the stream ended; still honour the
    // queued triggers on whatever data is left.
    detector_ready_ = true;
    maybe_return_to_normal(last);
  }
}

RunOutput run_online(const PipelineConfig& config,
                     const datamodel::MetricFrame& frame,
                     const std::vector<Index>& forced) {
  config.validate();
  if (frame.rows() < config.trigger.base_length) {
    throw ArgumentError("stream has " + std::to_string(frame.rows()) +
                        " rows, fewer than trigger.t0 = " +
                        std::to_string(config.trigger.base_length));
  }
  RunOutput out;
  OnlinePipeline pipeline(config, frame.entity_names, frame.kpi_index);
  pipeline.on_event([&](const PipelineEvent& e) { out.events.push_back(e); });
  pipeline.on_convergence(
      [&](const ConvergenceRecord& r) { out.convergence.push_back(r); });

  BoundedChannel<Sample> channel(
      static_cast<std::size_t>(config.channel_capacity));
  std::exception_ptr ingest_error;
  std::thread ingest([&] {
    try {
      trigger::TriggerMonitor monitor(config.trigger);
      for (Index t : forced) monitor.force_at(t);
      for (Index t = 0; t < frame.rows(); ++t) {
        const auto before = monitor.phase();
        Sample s;
        s.t = t;
        s.values = frame.values.row(t);
        s.triggered = monitor.push(t, s.values).has_value();
        s.detector_ready =
            before != trigger::TriggerMonitor::Phase::kDetecting &&
            monitor.phase() == trigger::TriggerMonitor::Phase::kDetecting;
        channel.push(std::move(s));
      }
    } catch (...) {
      ingest_error = std::current_exception();
    }
    channel.close();
  });

  try {
    while (auto s = channel.pop()) pipeline.consume(*s);
  } catch (...) {
    channel.close();
    ingest.join();
    throw;
  }
  ingest.join();
  if (ingest_error) std::rethrow_exception(ingest_error);
  pipeline.finish();
  out.episodes = pipeline.episodes();
  return out;
}

void write_run_output(const RunOutput& output, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  auto open = [&](const char* name) {
    std::ofstream f(root / name);
    if (!f) throw ConfigError("cannot write " + (root / name).string());
    return f;
  };
  {
    auto f = open("events.jsonl");
    for (const auto& e : output.events) f << e.to_json().dump() << '\n';
  }
  {
    auto f = open("convergence.jsonl");
    for (const auto& r : output.convergence) f << r.to_json().dump() << '\n';
  }
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& ep : output.episodes) {
    nlohmann::json doc = localize::causes_to_json(ep.causes);
    doc["episode"] = ep.episode;
    doc["trigger"] = ep.trigger;
    doc["converged"] = ep.converged;
    doc["batches"] = ep.batches;
    episodes.push_back(doc);
  }
  auto f = open("causes.json");
  f << nlohmann::json{{"episodes", episodes}}.dump(2) << '\n';
}

}  // namespace incrca
