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

#include "doctest.h"

#include <filesystem>
#include <random>
#include <sstream>

#include "../support/oracles.hpp"
#include "incrca/datamodel.hpp"
#include "incrca/errors.hpp"

using namespace incrca;
using namespace incrca::datamodel;

namespace {

std::string data_path(const char* name) {
  return std::string(INCRCA_TEST_DATA) + "/" + name;
}

MetricFrame parse(const std::string& text, const LoadOptions& options = {}) {
  std::istringstream in(text);
  return parse_csv(in, "kpi", options);
}

}  // namespace

TEST_CASE("fixture file loads with the KPI resolved") {
  const auto f = load_csv(data_path("small.csv"), "kpi");
  CHECK(f.entity_count() == 2);
  CHECK(f.kpi_index == 2);
  CHECK(f.rows() == 4);
  CHECK(f.entity_names == std::vector<std::string>{"e1", "e2", "kpi"});
  CHECK(f.timestamps.front() == 1704067200);
  CHECK(f.timestamps[1] - f.timestamps[0] == 60);
  CHECK(f.values(2, 0) == 3.5);
  CHECK(f.values(2, 1) == 30.0);
  CHECK(f.values(3, 2) == 1e-3);
}

TEST_CASE("missing KPI column is a configuration error") {
  CHECK_THROWS_AS(load_csv(data_path("no_kpi.csv"), "kpi"), ConfigError);
}

TEST_CASE("single metric plus KPI is accepted") {
  const auto f = parse("t,a,kpi\n0,1,2\n10,3,4\n");
  CHECK(f.entity_count() == 1);
  CHECK(f.kpi_index == 1);
}

TEST_CASE("loader rejects malformed input") {
  SUBCASE("non-numeric cell names line and column") {
    try {
      parse("t,a,kpi\n0,1,2\n60,x,4\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 3") != std::string::npos);
      CHECK(msg.find("column 2") != std::string::npos);
    }
  }
  SUBCASE("duplicate timestamps") {
    CHECK_THROWS_AS(parse("t,a,kpi\n0,1,2\n0,3,4\n"), FormatError);
  }
  SUBCASE("irregular step") {
    CHECK_THROWS_AS(parse("t,a,kpi\n0,1,2\n60,3,4\n150,5,6\n"), FormatError);
  }
  SUBCASE("missing values fail unless forward fill is on") {
    const std::string text = "t,a,kpi\n0,1,2\n60,,4\n120,nan,5\n";
    CHECK_THROWS_AS(parse(text), FormatError);
    const auto f = parse(text, {true, 0});
    CHECK(f.values(1, 0) == 1.0);
    CHECK(f.values(2, 0) == 1.0);
  }
}

TEST_CASE("rows are sorted by timestamp") {
  const auto f = parse("t,a,kpi\n120,3,0\n0,1,0\n60,2,0\n");
  CHECK(f.timestamps == std::vector<std::int64_t>{0, 60, 120});
  CHECK(f.values.col(0) == Vector::LinSpaced(3, 1, 3));
}

TEST_CASE("quoted headers and fields") {
  const auto f = parse("t,\"svc, a\",kpi\n0,\"1.5\",2\n60,2,3\n");
  CHECK(f.entity_names[0] == "svc, a");
  CHECK(f.values(0, 0) == 1.5);
}

TEST_CASE("timestamps: ISO-8601 variants and epoch seconds") {
  CHECK(parse_timestamp("1700000000") == 1700000000);
  CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_timestamp("1970-01-01 00:01:00") == 60);
  CHECK(parse_timestamp("1970-01-01T01:00:00+01:00") == 0);
  CHECK(parse_timestamp("2024-02-29T12:00:00.250Z") == 1709208000);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), ParseError);
}

TEST_CASE("write then load round-trips") {
  std::mt19937_64 rng(1);
  MetricFrame f;
  f.values = oracle::random_matrix(25, 4, rng, -1e3, 1e3);
  f.values(3, 1) = 1e-300;
  for (int t = 0; t < 25; ++t) f.timestamps.push_back(1000 + 30 * t);
  f.entity_names = {"a", "b,c", "d\"q", "kpi"};
  f.kpi_index = 3;
  std::stringstream io;
  write_csv(f, io);
  const auto g = parse_csv(io, "kpi");
  CHECK(g.entity_names == f.entity_names);
  CHECK(g.timestamps == f.timestamps);
  CHECK(g.kpi_index == 3);
  CHECK((g.values - f.values).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("zscore normalization") {
  MetricFrame f;
  f.values = Matrix{{5, 0}, {5, 2}, {5, 7}};
  f.timestamps = {0, 1, 2};
  f.entity_names = {"a", "kpi"};
  f.kpi_index = 1;
  SUBCASE("constant channel maps to zero") {
    CHECK(zscore_normalize(f, 0, 3).values.col(0).isZero(0.0));
  }
  SUBCASE("two-point window") {
    const auto z = zscore_normalize(f, 0, 2);
    CHECK(z.values(0, 1) == doctest::Approx(-1.0));
    CHECK(z.values(1, 1) == doctest::Approx(1.0));
    CHECK(z.values(2, 1) == doctest::Approx(6.0));
  }
  SUBCASE("empty window") { CHECK_THROWS_AS(zscore_normalize(f, 1, 1), ArgumentError); }
  SUBCASE("idempotent when re-fit on its own output") {
    std::mt19937_64 rng(2);
    MetricFrame r = f;
    r.values = oracle::random_matrix(50, 2, rng, -4, 9);
    r.timestamps.resize(50);
    const auto once = zscore_normalize(r, 5, 30);
    const auto twice = zscore_normalize(once, 5, 30);
    CHECK((once.values - twice.values).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("make_batches drops the remainder") {
  MetricFrame f;
  f.values = Matrix::Zero(13, 2);
  for (int i = 0; i < 13; ++i) f.values(i, 0) = i;
  auto b = make_batches(f, 3, 4);
  REQUIRE(b.size() == 2);
  CHECK(b[0].index == 1);
  CHECK(b[1].index == 2);
  CHECK(b[0].values(0, 0) == 3.0);
  CHECK(b[1].values(3, 0) == 10.0);
  CHECK(make_batches(f, 9, 4).size() == 1);
  CHECK_THROWS_AS(make_batches(f, 0, 0), ArgumentError);
  CHECK_THROWS_AS(make_batches(f, 0, 1), ArgumentError);
}

TEST_CASE("lag_embed examples") {
  const Matrix v{{1}, {2}, {3}};
  auto e1 = lag_embed(v, 1);
  CHECK(e1.current == Matrix{{2}, {3}});
  CHECK(e1.lagged == Matrix{{1}, {2}});
  auto e2 = lag_embed(v, 2);
  CHECK(e2.current == Matrix{{3}});
  CHECK(e2.lagged == Matrix{{2, 1}});
  CHECK_THROWS_AS(lag_embed(Matrix{{1}, {2}}, 2), ArgumentError);
}

TEST_CASE("lag_embed index-shift property") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int q = 1 + trial % 3;
    const Index n = 2 + trial % 4, T = 12;
    const Matrix v = oracle::random_matrix(T, n, rng);
    const auto e = lag_embed(v, q);
    REQUIRE(e.current.rows() == T - q);
    for (Index t = 0; t < T - q; ++t) {
      CHECK(e.current.row(t) == v.row(t + q));
      for (int j = 1; j <= q; ++j) {
        CHECK(e.lagged.block(t, (j - 1) * n, 1, n) == v.row(t + q - j));
      }
    }
  }
}

TEST_CASE("DOT export") {
  auto g = CausalGraph::empty({"e1", "kpi"}, 1);
  const std::string bare = graph_to_dot(g, 0.1);
  CHECK(bare.find("->") == std::string::npos);
  CHECK(bare.find("\"e1\"") != std::string::npos);
  g.adjacency(0, 1) = 0.5;
  const std::string one = graph_to_dot(g, 0.1);
  CHECK(one.find("\"e1\" -> \"kpi\" [weight=0.5000") != std::string::npos);
  CHECK(graph_to_dot(g, 0.9).find("->") == std::string::npos);
  CHECK(graph_to_dot(g, 0.1) == one);
}

TEST_CASE("graph JSON round trip and validation") {
  auto g = CausalGraph::empty({"a", "b", "kpi"}, 2);
  g.adjacency(1, 2) = 0.25;
  g.adjacency(0, 2) = 0.75;
  g.adjacency(0, 1) = 0.5;
  const auto doc = graph_to_json(g);
  REQUIRE(doc["edges"].size() == 3);
  CHECK(doc["edges"][0]["dst"] == "b");
  CHECK(doc["edges"][1]["dst"] == "kpi");
  CHECK(doc["edges"][2]["src"] == "b");
  const auto back = graph_from_json(doc);
  CHECK(back.adjacency == g.adjacency);
  CHECK(back.node_labels == g.node_labels);
  CHECK(back.kpi_index == 2);

  auto bad = doc;
  bad["edges"][0]["weight"] = -1.0;
  CHECK_THROWS_AS(graph_from_json(bad), FormatError);
  bad = doc;
  bad["edges"][0]["dst"] = "zzz";
  CHECK_THROWS_AS(graph_from_json(bad), FormatError);
  bad = doc;
  bad["kpi_index"] = 7;
  CHECK_THROWS_AS(graph_from_json(bad), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "incrca_graph_rt.json";
  save_graph(g, path.string());
  CHECK(load_graph(path.string()).adjacency == g.adjacency);
  std::filesystem::remove(path);
}
