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

#include "incrca/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "incrca/errors.hpp"

namespace incrca::datamodel {

namespace {

// RFC-4180 record reader. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields,
                 std::size_t line_no) {
  fields.clear();
  int ch = in.peek();
  if (ch == EOF) return false;

  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  while (true) {
    ch = in.get();
    if (ch == EOF) {
      if (in_quotes) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": unterminated quoted field");
      }
      fields.push_back(std::move(field));
      return true;
    }
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || was_quoted) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": stray quote inside unquoted field");
      }
      in_quotes = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return true;
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) {
  std::string lower;
  for (char c : cell) lower.push_back(static_cast<char>(std::tolower(c)));
  return lower.empty() || lower == "nan" || lower == "na" || lower == "null";
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw ParseError("empty timestamp");

  bool all_digits = true;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!(std::isdigit(static_cast<unsigned char>(text[i])) ||
          (i == 0 && text[i] == '-'))) {
      all_digits = false;
      break;
    }
  }
  if (all_digits) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(text.c_str(), &end, 10);
    if (errno != 0 || *end != '\0') {
      throw ParseError("timestamp out of range: " + text);
    }
    return v;
  }

  int year = 0, mon = 0, day = 0, hour = 0, min = 0, sec = 0;
  int consumed = 0;
  char sep = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &year, &mon,
                  &day, &sep, &hour, &min, &sec, &consumed) != 7 ||
      (sep != 'T' && sep != ' ')) {
    throw ParseError("unrecognized timestamp: " + text);
  }
  if (mon < 1 || mon > 12 || day < 1 || day > 31 || hour > 23 || min > 59 ||
      sec > 60) {
    throw ParseError("timestamp field out of range: " + text);
  }
  std::size_t pos = static_cast<std::size_t>(consumed);
  // Fractional seconds are truncated.
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
  }
  std::int64_t offset = 0;
  if (pos < text.size()) {
    if (text[pos] == 'Z' && pos + 1 == text.size()) {
      ++pos;
    } else if (text[pos] == '+' || text[pos] == '-') {
      int oh = 0, om = 0;
      if (std::sscanf(text.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2 ||
          text.size() != pos + 6) {
        throw ParseError("bad UTC offset in timestamp: " + text);
      }
      offset = (oh * 3600 + om * 60) * (text[pos] == '+' ? 1 : -1);
      pos = text.size();
    }
  }
  if (pos != text.size()) throw ParseError("trailing characters: " + text);

  const std::int64_t days =
      days_from_civil(year, static_cast<unsigned>(mon),
                      static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + min * 60 + sec - offset;
}

MetricFrame MetricFrame::slice_rows(Index begin, Index end) const {
  if (begin < 0 || end > rows() || begin > end) {
    throw ArgumentError("row slice [" + std::to_string(begin) + ", " +
                        std::to_string(end) + ") outside frame of " +
                        std::to_string(rows()) + " rows");
  }
  MetricFrame out;
  out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
  out.values = values.middleRows(begin, end - begin);
  out.entity_names = entity_names;
  out.kpi_index = kpi_index;
  return out;
}

MetricFrame parse_csv(std::istream& in, const std::string& kpi_column,
                      const LoadOptions& options) {
  std::vector<std::string> header;
  std::size_t line_no = 1;
  if (!read_record(in, header, line_no)) {
    throw FormatError("empty CSV input");
  }
  if (header.size() < 3) {
    throw FormatError(
        "CSV needs a timestamp column, at least one metric and the KPI");
  }
  std::vector<std::string> names;
  for (std::size_t i = 1; i < header.size(); ++i) {
    names.push_back(trim(header[i]));
  }
  auto kpi_it = std::find(names.begin(), names.end(), kpi_column);
  if (kpi_it == names.end()) {
    throw ConfigError("KPI column '" + kpi_column + "' not found in header");
  }
  {
    auto sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw FormatError("duplicate column name in header");
    }
  }
  const std::size_t width = names.size();

  std::vector<std::pair<std::int64_t, std::vector<double>>> rows;
  std::vector<std::string> fields;
  while (read_record(in, fields, ++line_no)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (fields.size() != width + 1) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(width + 1) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::int64_t ts = 0;
    try {
      ts = parse_timestamp(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ", column 1: " +
                       e.what());
    }
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const std::string cell = trim(fields[c + 1]);
      if (is_missing(cell)) {
        row[c] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      errno = 0;
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0' || errno == ERANGE ||
          !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 2) + " ('" + names[c] +
                         "'): non-numeric value '" + cell + "'");
      }
      row[c] = v;
    }
    rows.emplace_back(ts, std::move(row));
  }
  if (rows.empty()) throw FormatError("CSV has no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].first == rows[i - 1].first) {
      throw FormatError("duplicate timestamp " +
                        std::to_string(rows[i].first));
    }
  }
  if (rows.size() >= 2) {
    const std::int64_t step = rows[1].first - rows[0].first;
    for (std::size_t i = 2; i < rows.size(); ++i) {
      const std::int64_t d = rows[i].first - rows[i - 1].first;
      if (std::llabs(d - step) > options.step_tolerance) {
        throw FormatError("non-uniform sampling step at timestamp " +
                          std::to_string(rows[i].first) + ": " +
                          std::to_string(d) + "s vs " + std::to_string(step) +
                          "s");
      }
    }
  }

  MetricFrame frame;
  frame.entity_names = names;
  frame.kpi_index = static_cast<int>(kpi_it - names.begin());
  frame.values.resize(static_cast<Index>(rows.size()),
                      static_cast<Index>(width));
  frame.timestamps.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    frame.timestamps.push_back(rows[r].first);
    for (std::size_t c = 0; c < width; ++c) {
      double v = rows[r].second[c];
      if (std::isnan(v)) {
        if (!options.forward_fill) {
          throw FormatError("missing value at timestamp " +
                            std::to_string(rows[r].first) + ", column '" +
                            names[c] + "'");
        }
        if (r == 0) {
          throw FormatError("missing value in first row, column '" +
                            names[c] + "' cannot be forward-filled");
        }
        v = frame.values(static_cast<Index>(r) - 1, static_cast<Index>(c));
      }
      frame.values(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }
  return frame;
}

MetricFrame load_csv(const std::string& path, const std::string& kpi_column,
                     const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  return parse_csv(in, kpi_column, options);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_csv(const MetricFrame& frame, std::ostream& out) {
  out << "timestamp";
  for (const auto& name : frame.entity_names) out << ',' << quote_if_needed(name);
  out << '\n';
  char buf[64];
  for (Index r = 0; r < frame.rows(); ++r) {
    out << frame.timestamps[static_cast<std::size_t>(r)];
    for (Index c = 0; c < frame.channels(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", frame.values(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_csv(const MetricFrame& frame, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write CSV file: " + path);
  write_csv(frame, out);
}

ChannelStats ChannelStats::fit(const Matrix& values, Index begin, Index end) {
  if (begin < 0 || end > values.rows() || end <= begin) {
    throw ArgumentError("statistics window [" + std::to_string(begin) + ", " +
                        std::to_string(end) + ") is empty or out of range");
  }
  const auto window = values.middleRows(begin, end - begin);
  ChannelStats stats;
  stats.mean = window.colwise().mean().transpose();
  stats.stddev.resize(values.cols());
  for (Index c = 0; c < values.cols(); ++c) {
    const double var =
        (window.col(c).array() - stats.mean(c)).square().mean();
    stats.stddev(c) = std::sqrt(var);
  }
  return stats;
}

Matrix ChannelStats::apply(const Matrix& values) const {
  if (values.cols() != mean.size()) {
    throw ArgumentError("channel count " + std::to_string(values.cols()) +
                        " does not match statistics for " +
                        std::to_string(mean.size()) + " channels");
  }
  Matrix out(values.rows(), values.cols());
  for (Index c = 0; c < values.cols(); ++c) {
    if (stddev(c) < kMinStddev) {
      out.col(c).setZero();
    } else {
      out.col(c) = (values.col(c).array() - mean(c)) / stddev(c);
    }
  }
  return out;
}

Eigen::RowVectorXd ChannelStats::apply_row(
    const Eigen::RowVectorXd& row) const {
  Matrix m = row;
  return apply(m).row(0);
}

MetricFrame zscore_normalize(const MetricFrame& frame, Index window_begin,
                             Index window_end) {
  const auto stats = ChannelStats::fit(frame.values, window_begin, window_end);
  MetricFrame out = frame;
  out.values = stats.apply(frame.values);
  return out;
}

std::vector<Batch> make_batches(const MetricFrame& frame, Index start,
                                Index length) {
  if (length < 2) {
    throw ArgumentError("batch length must be >= 2, got " +
                        std::to_string(length));
  }
  if (start < 0 || start >= frame.rows()) {
    throw ArgumentError("batch start " + std::to_string(start) +
                        " outside frame of " + std::to_string(frame.rows()) +
                        " rows");
  }
  std::vector<Batch> batches;
  const Index count = (frame.rows() - start) / length;
  batches.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) {
    batches.push_back(
        Batch{frame.values.middleRows(start + k * length, length),
              static_cast<int>(k + 1)});
  }
  return batches;
}

LagEmbedding lag_embed(const Matrix& values, int lag_order) {
  const Index t = values.rows();
  const Index n = values.cols();
  if (lag_order < 1) {
    throw ArgumentError("lag order must be >= 1, got " +
                        std::to_string(lag_order));
  }
  if (t <= lag_order) {
    throw ArgumentError("lag embedding needs more than " +
                        std::to_string(lag_order) + " rows, got " +
                        std::to_string(t));
  }
  LagEmbedding out;
  const Index rows = t - lag_order;
  out.current = values.bottomRows(rows);
  out.lagged.resize(rows, lag_order * n);
  for (int j = 1; j <= lag_order; ++j) {
    out.lagged.middleCols((j - 1) * n, n) =
        values.middleRows(lag_order - j, rows);
  }
  return out;
}

Index CausalGraph::edge_count() const {
  Index count = 0;
  for (Index i = 0; i < size(); ++i) {
    for (Index j = 0; j < size(); ++j) {
      if (i != j && adjacency(i, j) > 0.0) ++count;
    }
  }
  return count;
}

CausalGraph CausalGraph::empty(std::vector<std::string> labels,
                               int kpi_index) {
  CausalGraph g;
  const auto n = static_cast<Index>(labels.size());
  g.adjacency = Matrix::Zero(n, n);
  g.node_labels = std::move(labels);
  g.kpi_index = kpi_index;
  return g;
}

namespace {

std::string dot_id(const std::string& label) {
  std::string out = "\"";
  for (char c : label) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string graph_to_dot(const CausalGraph& graph, double threshold) {
  if (threshold < 0.0) {
    throw ArgumentError("DOT threshold must be >= 0");
  }
  std::ostringstream out;
  out << "digraph causal {\n";
  for (std::size_t i = 0; i < graph.node_labels.size(); ++i) {
    out << "  " << dot_id(graph.node_labels[i]);
    if (static_cast<int>(i) == graph.kpi_index) out << " [shape=doublecircle]";
    out << ";\n";
  }
  char buf[64];
  for (Index i = 0; i < graph.size(); ++i) {
    for (Index j = 0; j < graph.size(); ++j) {
      const double w = graph.adjacency(i, j);
      if (i == j || !(w > threshold)) continue;
      std::snprintf(buf, sizeof buf, "%.4f", w);
      out << "  " << dot_id(graph.node_labels[static_cast<std::size_t>(i)])
          << " -> "
          << dot_id(graph.node_labels[static_cast<std::size_t>(j)])
          << " [weight=" << buf << "];\n";
    }
  }
  out << "}\n";
  return out.str();
}

nlohmann::json graph_to_json(const CausalGraph& graph) {
  nlohmann::json doc;
  doc["nodes"] = graph.node_labels;
  doc["kpi_index"] = graph.kpi_index;
  auto edges = nlohmann::json::array();
  for (Index i = 0; i < graph.size(); ++i) {
    for (Index j = 0; j < graph.size(); ++j) {
      const double w = graph.adjacency(i, j);
      if (i == j || !(w > 0.0)) continue;
      edges.push_back({{"src", graph.node_labels[static_cast<std::size_t>(i)]},
                       {"dst", graph.node_labels[static_cast<std::size_t>(j)]},
                       {"weight", w}});
    }
  }
  doc["edges"] = std::move(edges);
  return doc;
}

CausalGraph graph_from_json(const nlohmann::json& doc) {
  try {
    std::vector<std::string> labels = doc.at("nodes");
    const int kpi = doc.at("kpi_index");
    if (kpi < 0 || kpi >= static_cast<int>(labels.size())) {
      throw FormatError("graph kpi_index " + std::to_string(kpi) +
                        " out of range");
    }
    std::map<std::string, Index> index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!index.emplace(labels[i], static_cast<Index>(i)).second) {
        throw FormatError("duplicate node label '" + labels[i] + "'");
      }
    }
    CausalGraph g = CausalGraph::empty(labels, kpi);
    for (const auto& e : doc.at("edges")) {
      const std::string src = e.at("src");
      const std::string dst = e.at("dst");
      const double w = e.at("weight");
      auto s = index.find(src);
      auto d = index.find(dst);
      if (s == index.end() || d == index.end()) {
        throw FormatError("edge " + src + " -> " + dst +
                          " references an unknown node");
      }
      if (s->second == d->second) {
        throw FormatError("self-loop on '" + src + "' not allowed");
      }
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw FormatError("edge " + src + " -> " + dst +
                          " has invalid weight");
      }
      g.adjacency(s->second, d->second) = w;
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
}

CausalGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("graph file " + path + ": " + e.what());
  }
  return graph_from_json(doc);
}

void save_graph(const CausalGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write graph file: " + path);
  out << graph_to_json(graph).dump(2) << '\n';
}

}  // namespace incrca::datamodel
