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
#pragma once

#include <string>

#include "xplan/plan.hpp"

namespace xplan::testing {

using plan::DataQuantumType;
using plan::LogicalOperator;
using plan::LogicalPlan;
using plan::OperatorKind;

inline LogicalOperator make_op(std::string id, OperatorKind kind) {
  LogicalOperator op;
  op.id = std::move(id);
  op.kind = kind;
  return op;
}

/// TextFileSource -> FlatMap -> Map -> ReduceByKey -> CollectSink.
inline LogicalPlan wordcount_plan(const std::string& uri = "file:words.txt") {
  LogicalPlan p;
  auto src = make_op("lines", OperatorKind::TextFileSource);
  src.attrs["uri"] = uri;
  p.add(src);
  auto split = make_op("words", OperatorKind::FlatMap);
  split.udf = plan::UdfSpec{"wordcount.splitWords", plan::CostHint::Constant};
  split.selectivity = plan::SelectivitySpec{1.0, 10.0, 0.5};
  p.add(split);
  auto pair = make_op("tuples", OperatorKind::Map);
  pair.udf = plan::UdfSpec{"wordcount.toPair", plan::CostHint::Constant};
  p.add(pair);
  auto reduce = make_op("adds", OperatorKind::ReduceByKey);
  reduce.udf = plan::UdfSpec{"wordcount.sumCounts", plan::CostHint::Constant};
  reduce.udf2 = plan::UdfSpec{"wordcount.getWord", plan::CostHint::Constant};
  reduce.selectivity = plan::SelectivitySpec{0.01, 0.5, 0.4};
  p.add(reduce);
  p.add(make_op("out", OperatorKind::CollectSink));
  p.connect("lines", 0, "words", 0);
  p.connect("words", 0, "tuples", 0);
  p.connect("tuples", 0, "adds", 0);
  p.connect("adds", 0, "out", 0);
  return p;
}

/// The iterative sampled-gradient plan: a big point file, a small weight
/// collection, a RepeatLoop whose body samples, computes and averages
/// gradients, with the current weights broadcast into the sample step.
inline LogicalPlan sgd_plan(const std::string& points_uri = "file:points.txt",
                            std::int64_t iterations = 50, std::int64_t sample_size = 8) {
  LogicalPlan p;
  auto src = make_op("lines", OperatorKind::TextFileSource);
  src.attrs["uri"] = points_uri;
  p.add(src);
  auto parse = make_op("points", OperatorKind::Map);
  parse.udf = plan::UdfSpec{"sgd.parsePoint", plan::CostHint::Constant};
  p.add(parse);
  auto weights = make_op("weights", OperatorKind::CollectionSource);
  weights.attrs["collection"] = "sgd.zeroWeights(3)";
  p.add(weights);
  auto loop = make_op("loop", OperatorKind::RepeatLoop);
  loop.attrs["iterations"] = std::to_string(iterations);
  p.add(loop);
  auto sample = make_op("sample_points", OperatorKind::Sample);
  sample.attrs["sampleSize"] = std::to_string(sample_size);
  sample.broadcast_ports.push_back("weights");
  p.add(sample);
  auto grad = make_op("gradient", OperatorKind::Map);
  grad.udf = plan::UdfSpec{"sgd.computeGradient", plan::CostHint::Constant};
  grad.broadcast_ports.push_back("weights");
  p.add(grad);
  auto reduce = make_op("gradient_sum_count", OperatorKind::ReduceGlobal);
  reduce.udf = plan::UdfSpec{"sgd.sumCount", plan::CostHint::Constant};
  p.add(reduce);
  auto update = make_op("update", OperatorKind::Map);
  update.udf = plan::UdfSpec{"sgd.updateWeights(0.1)", plan::CostHint::Constant};
  update.broadcast_ports.push_back("weights");
  p.add(update);
  p.add(make_op("final_weights", OperatorKind::CollectSink));

  p.connect("lines", 0, "points", 0);
  p.connect("weights", 0, "loop", 0);
  p.connect("points", 0, "sample_points", 0);
  p.connect("gradient_sum_count", 0, "update", 0);
  p.connect("sample_points", 0, "gradient", 0);
  p.connect("gradient", 0, "gradient_sum_count", 0);
  p.connect("update", 0, "loop", 1, /*feedback=*/true);
  p.connect("loop", 1, "final_weights", 0);
  p.broadcast("loop", 0, "sample_points", "weights");
  p.broadcast("loop", 0, "gradient", "weights");
  p.broadcast("loop", 0, "update", "weights");
  return p;
}

}  // namespace xplan::testing
