/* Copyright 2026 The xplan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <algorithm>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "xplan/plan.hpp"

using namespace xplan;
using namespace xplan::plan;
using xplan::testing::make_op;

TEST_CASE("wordcount plan validates with five operators") {
  auto p = xplan::testing::wordcount_plan();
  CHECK(p.size() == 5);
  CHECK(validate_plan(p).empty());
}

TEST_CASE("plan with no sink is rejected") {
  LogicalPlan p;
  auto src = make_op("S1", OperatorKind::TextFileSource);
  src.attrs["uri"] = "file:x";
  p.add(src);
  auto m = make_op("m", OperatorKind::Map);
  p.add(m);
  p.connect("S1", 0, "m", 0);
  auto bad = validate_plan(p);
  REQUIRE(!bad.empty());
  bool mentions = std::any_of(bad.begin(), bad.end(), [](const std::string& s) {
    return s.find("no sink reachable from source S1") != std::string::npos;
  });
  CHECK(mentions);
}

TEST_CASE("feedback edge must anchor at a RepeatLoop") {
  LogicalPlan p;
  auto src = make_op("s", OperatorKind::TextFileSource);
  src.attrs["uri"] = "file:x";
  p.add(src);
  p.add(make_op("m", OperatorKind::Map));
  p.add(make_op("m2", OperatorKind::Map));
  p.add(make_op("k", OperatorKind::CollectSink));
  p.connect("s", 0, "m", 0);
  p.connect("m", 0, "m2", 0);
  p.connect("m2", 0, "k", 0);
  p.connect("m2", 0, "m", 0, /*feedback=*/true);
  auto bad = validate_plan(p);
  bool mentions = std::any_of(bad.begin(), bad.end(), [](const std::string& s) {
    return s.find("feedback edge not anchored at RepeatLoop") != std::string::npos;
  });
  CHECK(mentions);
}

TEST_CASE("sgd plan validates and exposes its loop body") {
  auto p = xplan::testing::sgd_plan();
  auto bad = validate_plan(p);
  CAPTURE(bad);
  CHECK(bad.empty());

  auto bodies = loop_bodies(p);
  REQUIRE(bodies.count("loop") == 1);
  auto body = bodies["loop"];
  std::sort(body.begin(), body.end());
  CHECK(body == std::vector<std::string>{"gradient", "gradient_sum_count", "sample_points",
                                         "update"});

  auto amp = amplification(p);
  CHECK(amp["gradient"] == 50);
  CHECK(amp["loop"] == 50);
  CHECK(amp["lines"] == 1);
  CHECK(amp["final_weights"] == 1);
}

TEST_CASE("default selectivities are deterministic and documented") {
  CHECK(default_selectivity(OperatorKind::Map) == SelectivitySpec{1.0, 1.0, 1.0});
  CHECK(default_selectivity(OperatorKind::ReduceGlobal) == SelectivitySpec{1.0, 1.0, 1.0});
  CHECK(default_selectivity(OperatorKind::Filter) == SelectivitySpec{0.1, 0.5, 0.5});
  CHECK(default_selectivity(OperatorKind::FlatMap) == SelectivitySpec{1.0, 10.0, 0.5});
  CHECK(default_selectivity(OperatorKind::Join) == SelectivitySpec{0.0001, 0.01, 0.3});
  CHECK(default_selectivity(OperatorKind::Distinct) == SelectivitySpec{0.01, 0.5, 0.4});
}

TEST_CASE("serialize round-trips the sgd plan byte-stably") {
  auto p = xplan::testing::sgd_plan();
  auto doc = serialize_plan(p);
  auto q = deserialize_plan(doc);
  CHECK(p == q);
  CHECK(serialize_plan(q) == doc);
}

TEST_CASE("deserialize reports malformed documents with a locus") {
  CHECK_THROWS_WITH_AS(deserialize_plan(""), "line 1: missing operators section (empty document)",
                       PlanFormatError);

  std::string dup =
      "xplan formatVersion: 1\n"
      "operators:\n"
      "  op a Map\n"
      "  op a Map\n"
      "edges:\n"
      "broadcasts:\n"
      "end\n";
  try {
    deserialize_plan(dup);
    FAIL("expected duplicate-id error");
  } catch (const PlanFormatError& e) {
    CHECK(std::string(e.what()).find("duplicate operator id 'a'") != std::string::npos);
  }
}

TEST_CASE("topological order exists and breaks ties by id") {
  auto p = xplan::testing::wordcount_plan();
  auto order = topological_order(p);
  REQUIRE(order.size() == 5);
  CHECK(order.front() == "lines");
  CHECK(order.back() == "out");

  auto q = xplan::testing::sgd_plan();
  auto order2 = topological_order(q);
  CHECK(order2.size() == q.size());
  // Source-only prefix is id-sorted: "lines" < "weights".
  auto pos = [&](const std::string& id) {
    return std::find(order2.begin(), order2.end(), id) - order2.begin();
  };
  CHECK(pos("lines") < pos("points"));
  CHECK(pos("loop") < pos("sample_points"));
  CHECK(pos("update") > pos("gradient_sum_count"));
}

// --------------------------------------------------------------------------
// Random valid plans: serialization identity + single-rule mutations rejected.
// --------------------------------------------------------------------------

namespace {

LogicalPlan random_pipeline(std::mt19937_64& rng) {
  LogicalPlan p;
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_int_distribution<int> kind_pick(0, 4);
  auto src = make_op("src", OperatorKind::TextFileSource);
  src.attrs["uri"] = "file:data.txt";
  p.add(src);
  std::string prev = "src";
  int n = len(rng);
  for (int i = 0; i < n; ++i) {
    OperatorKind k{};
    switch (kind_pick(rng)) {
      case 0:
        k = OperatorKind::Map;
        break;
      case 1:
        k = OperatorKind::Filter;
        break;
      case 2:
        k = OperatorKind::FlatMap;
        break;
      case 3:
        k = OperatorKind::Distinct;
        break;
      default:
        k = OperatorKind::Sort;
        break;
    }
    auto op = make_op("op" + std::to_string(i), k);
    op.selectivity = default_selectivity(k);
    if (k == OperatorKind::Map || k == OperatorKind::FlatMap) {
      op.udf = UdfSpec{"lib.fn" + std::to_string(i),
                       i % 2 == 0 ? CostHint::Constant : CostHint::Linear};
    }
    p.add(op);
    p.connect(prev, 0, op.id, 0);
    prev = op.id;
  }
  p.add(make_op("sink", OperatorKind::CollectSink));
  p.connect(prev, 0, "sink", 0);
  return p;
}

}  // namespace

TEST_CASE("random plans round-trip and mutations are rejected") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_pipeline(rng);
    REQUIRE(validate_plan(p).empty());
    auto q = deserialize_plan(serialize_plan(p));
    CHECK(p == q);

    // Mutation 1: drop the sink (re-build without it).
    {
      LogicalPlan m;
      for (const auto* op : p.operators()) {
        if (op->id != "sink") m.add(*op);
      }
      for (const auto& e : p.edges()) {
        if (e.to.op != "sink") m.connect(e.from.op, e.from.port, e.to.op, e.to.port, e.feedback);
      }
      CHECK(!validate_plan(m).empty());
    }
    // Mutation 2: retarget an edge into a feedback edge on a non-loop.
    {
      LogicalPlan m = p;
      m.connect("sink" /*bogus producer port*/, 0, "op0", 0, /*feedback=*/true);
      CHECK(!validate_plan(m).empty());
    }
    // Mutation 3: type-mismatch an edge.
    {
      LogicalPlan m = p;
      m.op("src").output_types[0] = DataQuantumType::numeric_vector(3);
      m.op(p.out_edges("src")[0].to.op).input_types[0] = DataQuantumType::record({"a", "b"});
      CHECK(!validate_plan(m).empty());
    }
  }
}
