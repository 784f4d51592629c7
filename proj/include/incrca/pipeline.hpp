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

#ifndef INCRCA_PIPELINE_HPP_
#define INCRCA_PIPELINE_HPP_

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "incrca/config.hpp"

namespace incrca {

/// Blocking FIFO with a fixed capacity. push() waits while full, pop() waits
/// while empty and returns nullopt once closed and drained.
template <typename T>
class BoundedChannel {
 public:
  explicit BoundedChannel(std::size_t capacity) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
    if (closed_) return;
    queue_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    T item = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> queue_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
};

/// Scaling applied to every sample before it reaches the learner: per-channel
/// centering with base-period means, then either one pooled scale (the root
/// mean channel variance) or per-channel standard deviations.
struct LearnerNormalizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static LearnerNormalizer fit(const Matrix& base, bool standardize);
  Eigen::RowVectorXd apply(const Eigen::RowVectorXd& row) const;
  Matrix apply(const Matrix& rows) const;
};

enum class Phase {
  kNormal,
  kTriggered,
  kLearning,
  kConverged,
  kUnconverged,
  kAborted,
};

const char* phase_name(Phase phase);

struct PipelineEvent {
  Index t = 0;
  Phase phase = Phase::kNormal;
  int k = 0;
  std::optional<double> score;
  std::optional<std::vector<std::string>> top;
  std::optional<int> graph_from;  // TRIGGERED only: episode that built the graph
  std::string detail;             // ABORTED only

  nlohmann::json to_json() const;
};

struct ConvergenceRecord {
  int k = 0;
  double graph_sim = 0.0;
  double list_sim = 0.0;
  double score = 0.0;
  bool converged = false;

  nlohmann::json to_json() const;
};

struct EpisodeResult {
  int episode = 0;
  Index trigger = 0;
  bool converged = false;
  int batches = 0;
  localize::RankedCauses causes;
};

/// One message from ingestion to learning: a raw sample plus what the
/// detector concluded about it.
struct Sample {
  Index t = 0;
  Eigen::RowVectorXd values;
  bool triggered = false;
  bool detector_ready = false;  // the detector (re)fit completed on this sample
};

/// Learning-stage state machine. Feed samples in order with consume(), then
/// finish() once the stream ends.
class OnlinePipeline {
 public:
  using EventSink = std::function<void(const PipelineEvent&)>;
  using ConvergenceSink = std::function<void(const ConvergenceRecord&)>;

  OnlinePipeline(PipelineConfig config, std::vector<std::string> labels,
                 int kpi_index);

  void on_event(EventSink sink) { event_sink_ = std::move(sink); }
  void on_convergence(ConvergenceSink sink) {
    convergence_sink_ = std::move(sink);
  }

  void consume(const Sample& sample);
  void finish();

  Phase phase() const { return phase_; }
  const std::vector<EpisodeResult>& episodes() const { return episodes_; }
  const std::optional<datamodel::CausalGraph>& graph() const { return graph_; }

 private:
  void emit(PipelineEvent event);
  void start_episode(Index trigger);
  void advance_learning();
  void train_next_batch();
  void end_episode(Phase outcome, Index t);
  void maybe_return_to_normal(Index t);

  PipelineConfig config_;
  std::vector<std::string> labels_;
  int kpi_index_;
  EventSink event_sink_;
  ConvergenceSink convergence_sink_;

  Phase phase_ = Phase::kNormal;
  std::vector<Eigen::RowVectorXd> history_;  // normalized, all samples
  std::vector<Eigen::RowVectorXd> raw_base_;
  std::optional<LearnerNormalizer> normalizer_;

  std::optional<disentangle::LearnerState> learner_;
  std::optional<datamodel::CausalGraph> graph_;  // latest released graph
  int graph_episode_ = 0;                          // 0 = bootstrap

  std::deque<Index> pending_triggers_;
  bool detector_ready_ = false;

  // Current episode.
  int episode_ = 0;
  Index episode_start_ = 0;
  Index next_batch_start_ = 0;
  int k_ = 0;
  std::optional<datamodel::CausalGraph> last_graph_;
  std::optional<localize::RankedCauses> last_causes_;
  std::vector<EpisodeResult> episodes_;
};

struct RunOutput {
  std::vector<PipelineEvent> events;
  std::vector<ConvergenceRecord> convergence;
  std::vector<EpisodeResult> episodes;
};

/// Replays `frame` through the two-stage pipeline: an ingestion thread runs
/// the trigger detector and forwards samples over a bounded channel to the
/// learning stage. `forced` lists sample indices that must trigger.
RunOutput run_online(const PipelineConfig& config,
                     const datamodel::MetricFrame& frame,
                     const std::vector<Index>& forced = {});

/// Writes events.jsonl, convergence.jsonl and causes.json into `dir`.
void write_run_output(const RunOutput& output, const std::string& dir);

}  // namespace incrca

#endif  // INCRCA_PIPELINE_HPP_
