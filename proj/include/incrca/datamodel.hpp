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

#ifndef INCRCA_DATAMODEL_HPP_
#define INCRCA_DATAMODEL_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace incrca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace datamodel {

/// Time-indexed matrix of M entity metrics plus one KPI channel.
///
/// `values` is T x (M+1); the KPI is an ordinary column whose position is
/// `kpi_index`. Timestamps are epoch seconds with a constant step.
struct MetricFrame {
  std::vector<std::int64_t> timestamps;
  Matrix values;
  std::vector<std::string> entity_names;
  int kpi_index = 0;

  Index rows() const { return values.rows(); }
  Index channels() const { return values.cols(); }
  Index entity_count() const { return values.cols() - 1; }

  /// Rows [begin, end) as a new frame with the same labels.
  MetricFrame slice_rows(Index begin, Index end) const;
};

struct LoadOptions {
  // Replace empty/NaN cells with the previous row's value instead of failing.
  bool forward_fill = false;
  // Largest tolerated deviation (seconds) of any step from the first step.
  std::int64_t step_tolerance = 0;
};

MetricFrame load_csv(const std::string& path, const std::string& kpi_column,
                     const LoadOptions& options = {});
MetricFrame parse_csv(std::istream& in, const std::string& kpi_column,
                      const LoadOptions& options = {});

/// Writes `timestamp,<labels...>` with integer epoch timestamps and values
/// printed with 17 significant digits.
void write_csv(const MetricFrame& frame, std::ostream& out);
void write_csv(const MetricFrame& frame, const std::string& path);

/// Parses ISO-8601 (`YYYY-MM-DD[T ]hh:mm:ss[.fff][Z|+hh:mm]`) or integer
/// epoch seconds.
std::int64_t parse_timestamp(const std::string& text);

/// Per-channel location/scale. Channels whose std is below 1e-12 map to 0.
struct ChannelStats {
  Vector mean;
  Vector stddev;

  static ChannelStats fit(const Matrix& values, Index begin, Index end);
  Matrix apply(const Matrix& values) const;
  Eigen::RowVectorXd apply_row(const Eigen::RowVectorXd& row) const;
};

constexpr double kMinStddev = 1e-12;

/// Z-scores every channel with mean/std (population) taken from rows
/// [window_begin, window_end).
MetricFrame zscore_normalize(const MetricFrame& frame, Index window_begin,
                             Index window_end);

struct Batch {
  Matrix values;  // b x (M+1)
  int index = 1;  // 1-based ordinal
};

/// Contiguous non-overlapping batches of `length` rows starting at `start`;
/// a trailing remainder is dropped.
std::vector<Batch> make_batches(const MetricFrame& frame, Index start,
                                Index length);

struct LagEmbedding {
  Matrix current;  // (T-q) x n
  Matrix lagged;   // (T-q) x (q*n), block j-1 holds lag j
};

LagEmbedding lag_embed(const Matrix& values, int lag_order);

/// Weighted adjacency over entities + KPI. adjacency(i, j) is the weight of
/// the edge i -> j.
struct CausalGraph {
  Matrix adjacency;
  std::vector<std::string> node_labels;
  int kpi_index = 0;

  Index size() const { return adjacency.rows(); }
  /// Number of strictly positive off-diagonal entries.
  Index edge_count() const;
  static CausalGraph empty(std::vector<std::string> labels, int kpi_index);
};

/// DOT digraph with edges of weight > threshold, weights to 4 decimals.
std::string graph_to_dot(const CausalGraph& graph, double threshold);

/// `{nodes:[...], kpi_index:int, edges:[{src,dst,weight}]}`, edges sorted by
/// (src, dst) index and restricted to positive weights.
nlohmann::json graph_to_json(const CausalGraph& graph);
CausalGraph graph_from_json(const nlohmann::json& doc);
CausalGraph load_graph(const std::string& path);
void save_graph(const CausalGraph& graph, const std::string& path);

}  // namespace datamodel
}  // namespace incrca

#endif  // INCRCA_DATAMODEL_HPP_
