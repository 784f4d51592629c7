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

#include "incrca/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "incrca/errors.hpp"

namespace incrca::trigger {

namespace {

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values.front();
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

void TriggerConfig::validate() const {
  if (window < 1) throw ConfigError("trigger.window must be >= 1");
  if (!(energy > 0.0 && energy <= 1.0))
    throw ConfigError("trigger.energy must be in (0, 1]");
  if (!(c_quantile >= 0.0 && c_quantile <= 1.0))
    throw ConfigError("trigger.c_quantile must be in [0, 1]");
  if (!(kappa > 0.0)) throw ConfigError("trigger.kappa must be > 0");
  if (base_length < 2 * window)
    throw ConfigError("trigger.t0 must be >= 2 * trigger.window");
}

Matrix page_matrix(const Matrix& rows, int window) {
  const Index n = rows.cols();
  const Index columns = rows.rows() / window;
  Matrix z(n * window, columns);
  for (Index c = 0; c < n; ++c) {
    for (Index j = 0; j < columns; ++j) {
      z.block(c * window, j, window, 1) = rows.block(j * window, c, window, 1);
    }
  }
  return z;
}

Vector stack_window(const Matrix& window) {
  Vector v(window.size());
  const Index len = window.cols();
  for (Index c = 0; c < window.rows(); ++c) {
    v.segment(c * len, len) = window.row(c).transpose();
  }
  return v;
}

double residual_energy(const SubspaceModel& model, const Matrix& window) {
  if (window.cols() != model.window() || window.rows() != model.channels()) {
    throw ArgumentError("detection window must be " +
                        std::to_string(model.channels()) + "x" +
                        std::to_string(model.window()) + ", got " +
                        std::to_string(window.rows()) + "x" +
                        std::to_string(window.cols()));
  }
  return (model.complement.transpose() * stack_window(window)).squaredNorm();
}

double detection_score(const SubspaceModel& model, const Matrix& window) {
  return residual_energy(model, window) - model.shift;
}

SubspaceModel fit_base(const Matrix& base_rows, const TriggerConfig& config) {
  if (config.window < 1) throw ArgumentError("window length must be >= 1");
  if (base_rows.rows() < 2 * static_cast<Index>(config.window)) {
    throw ArgumentError("base window of " + std::to_string(base_rows.rows()) +
                        " rows is shorter than 2 * L = " +
                        std::to_string(2 * config.window));
  }
  if (!(config.energy > 0.0 && config.energy <= 1.0)) {
    throw ArgumentError("energy fraction must be in (0, 1]");
  }
  const Index t0 = base_rows.rows();
  const int window = config.window;

  SubspaceModel model;
  model.config = config;
  model.channel_stats = datamodel::ChannelStats::fit(base_rows, 0, t0);
  const Matrix normalized = model.channel_stats.apply(base_rows);
  const Matrix z = page_matrix(normalized, window);
  const Index dim = z.rows();

  Eigen::BDCSVD<Matrix> svd(z, Eigen::ComputeFullU);
  const Vector& sv = svd.singularValues();
  model.singular_values = sv;
  if (sv.size() == 0 || sv(0) < 1e-12) {
    throw DegenerateDataError("base matrix has no spectrum (all singular "
                              "values below 1e-12)");
  }
  Index numeric_rank = 0;
  const double tol = std::max(1e-12, sv(0) * static_cast<double>(dim) *
                                         std::numeric_limits<double>::epsilon());
  while (numeric_rank < sv.size() && sv(numeric_rank) > tol) ++numeric_rank;

  const Vector energy = sv.head(numeric_rank).array().square();
  const double total = energy.sum();
  Index rank = 0;
  double acc = 0.0;
  while (rank < numeric_rank) {
    acc += energy(rank);
    ++rank;
    if (acc >= config.energy * total * (1.0 - 1e-12)) break;
  }
  rank = std::clamp<Index>(rank, 1, std::min(numeric_rank, dim - 1));
  model.rank = static_cast<int>(rank);
  model.basis = svd.matrixU().leftCols(rank);
  model.complement = svd.matrixU().rightCols(dim - rank);

  std::vector<double> residuals;
  residuals.reserve(static_cast<std::size_t>(t0 - window + 1));
  for (Index end = window; end <= t0; ++end) {
    const Matrix w = normalized.middleRows(end - window, window).transpose();
    residuals.push_back(residual_energy(model, w));
  }
  model.shift = quantile(residuals, config.c_quantile);
  model.threshold = std::max(config.kappa * model.shift, 1e-9);
  model.statistic = 0.0;
  return model;
}

CusumResult cusum_step(SubspaceModel& model, double score) {
  model.statistic = std::max(model.statistic + score, 0.0);
  return {model.statistic, model.statistic > model.threshold};
}

std::optional<SubspaceModel> refresh(const SubspaceModel& model,
                                     const Matrix& rows) {
  if (rows.rows() < model.config.base_length) return std::nullopt;
  return fit_base(rows.topRows(model.config.base_length), model.config);
}

TriggerMonitor::TriggerMonitor(TriggerConfig config) : config_(config) {
  config_.validate();
}

std::optional<TriggerMonitor::Event> TriggerMonitor::push(
    Index t, const Eigen::RowVectorXd& sample) {
  if (phase_ != Phase::kDetecting) {
    pending_.push_back(sample);
    if (static_cast<int>(pending_.size()) < config_.base_length) {
      return std::nullopt;
    }
    Matrix rows(static_cast<Index>(pending_.size()), sample.size());
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      rows.row(static_cast<Index>(i)) = pending_[i];
    }
    model_ = fit_base(rows, config_);
    // Prime with the tail of the segment so scoring starts on the next sample.
    recent_.clear();
    const Matrix normalized = model_->channel_stats.apply(rows);
    for (Index r = rows.rows() - (config_.window - 1); r < rows.rows(); ++r) {
      recent_.push_back(normalized.row(r));
    }
    pending_.clear();
    phase_ = Phase::kDetecting;
    detecting_since_ = t + 1;
    return std::nullopt;
  }

  recent_.push_back(model_->channel_stats.apply_row(sample));
  while (static_cast<int>(recent_.size()) > config_.window) recent_.pop_front();

  Matrix window(sample.size(), config_.window);
  for (int j = 0; j < config_.window; ++j) {
    window.col(j) = recent_[static_cast<std::size_t>(j)].transpose();
  }
  const double score = detection_score(*model_, window);
  const auto step = cusum_step(*model_, score);

  auto forced = std::find(forced_.begin(), forced_.end(), t);
  const bool is_forced = forced != forced_.end();
  if (is_forced) forced_.erase(forced);
  if (!step.triggered && !is_forced) return std::nullopt;

  Event ev{t, step.statistic, is_forced && !step.triggered};
  phase_ = Phase::kRefreshing;
  pending_.clear();
  pending_.push_back(sample);
  recent_.clear();
  return ev;
}

}  // namespace incrca::trigger
