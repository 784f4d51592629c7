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

#ifndef INCRCA_TRIGGER_HPP_
#define INCRCA_TRIGGER_HPP_

#include <deque>
#include <optional>

#include "incrca/datamodel.hpp"

namespace incrca::trigger {

struct TriggerConfig {
  int window = 10;           // lag length L
  double energy = 0.95;      // cumulative squared-singular-value fraction
  double c_quantile = 0.95;  // quantile of in-sample residual energy -> c
  double kappa = 5.0;        // h = kappa * c
  int base_length = 200;     // T0

  void validate() const;
};

/// Pre-change subspace of the stacked Page matrix plus CUSUM state.
struct SubspaceModel {
  TriggerConfig config;
  Matrix basis;        // U0, (n*L) x r, orthonormal columns
  Matrix complement;   // U_perp, (n*L) x (n*L - r)
  int rank = 0;
  double shift = 0.0;      // c
  double threshold = 0.0;  // h
  double statistic = 0.0;  // CUSUM y, always >= 0
  datamodel::ChannelStats channel_stats;
  Vector singular_values;

  int window() const { return config.window; }
  Index channels() const { return channel_stats.mean.size(); }
};

/// Stacks each channel's L-row Page matrix (non-overlapping columns)
/// vertically: row block c holds channel c. Uses floor(T/L) columns.
Matrix page_matrix(const Matrix& rows, int window);

/// Flattens a channels x L window (row per channel) in the Page layout.
Vector stack_window(const Matrix& window);

/// Fits the pre-change subspace on `base_rows` (T0 x n, raw units). The rows
/// are z-scored with their own statistics, which are kept for detection.
/// c and h are calibrated on the in-sample stride-1 windows.
SubspaceModel fit_base(const Matrix& base_rows, const TriggerConfig& config);

/// Squared norm of the window's projection onto U_perp, minus c. `window` is
/// channels x L and already normalized with model.channel_stats.
double detection_score(const SubspaceModel& model, const Matrix& window);

/// Residual energy ||U_perp^T w||^2 of a normalized window.
double residual_energy(const SubspaceModel& model, const Matrix& window);

struct CusumResult {
  double statistic;
  bool triggered;
};

/// y <- max(y + score, 0); triggered when y > h.
CusumResult cusum_step(SubspaceModel& model, double score);

/// Refits on rows [tau, tau + T0). Returns nullopt (defer) when fewer than
/// T0 rows are supplied; extra rows beyond T0 are ignored.
std::optional<SubspaceModel> refresh(const SubspaceModel& model,
                                     const Matrix& rows);

/// Streaming detector: fit on the first T0 samples, score every stride-1
/// window after that, and after each trigger collect T0 samples starting at
/// the trigger and refit.
class TriggerMonitor {
 public:
  enum class Phase { kCollectingBase, kDetecting, kRefreshing };

  struct Event {
    Index t;
    double statistic;
    bool forced;
  };

  explicit TriggerMonitor(TriggerConfig config);

  /// Feeds sample `t` (raw units). Returns an event when a trigger fires.
  std::optional<Event> push(Index t, const Eigen::RowVectorXd& sample);

  /// Makes the next pushed sample fire a trigger if it is being scored.
  void force_at(Index t) { forced_.push_back(t); }

  Phase phase() const { return phase_; }
  const std::optional<SubspaceModel>& model() const { return model_; }
  /// Index of the first sample scored by the current model.
  Index detecting_since() const { return detecting_since_; }

 private:
  TriggerConfig config_;
  Phase phase_ = Phase::kCollectingBase;
  std::optional<SubspaceModel> model_;
  std::vector<Eigen::RowVectorXd> pending_;  // base / refresh segment
  std::deque<Eigen::RowVectorXd> recent_;    // last L normalized samples
  std::vector<Index> forced_;
  Index detecting_since_ = -1;
};

}  // namespace incrca::trigger

#endif  // INCRCA_TRIGGER_HPP_
