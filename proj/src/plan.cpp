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
#include "xplan/plan.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace xplan::plan {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

DataQuantumType DataQuantumType::text() {
  DataQuantumType t;
  t.kind = TypeKind::Text;
  return t;
}
DataQuantumType DataQuantumType::record(std::vector<std::string> fields) {
  DataQuantumType t;
  t.kind = TypeKind::Record;
  t.field_names = std::move(fields);
  return t;
}
DataQuantumType DataQuantumType::numeric_vector(int dim) {
  DataQuantumType t;
  t.kind = TypeKind::NumericVector;
  t.dim = dim;
  return t;
}
DataQuantumType DataQuantumType::key_value(DataQuantumType k, DataQuantumType v) {
  DataQuantumType t;
  t.kind = TypeKind::KeyValue;
  t.key = std::make_shared<DataQuantumType>(std::move(k));
  t.value = std::make_shared<DataQuantumType>(std::move(v));
  return t;
}
DataQuantumType DataQuantumType::opaque(std::string tag) {
  DataQuantumType t;
  t.kind = TypeKind::Opaque;
  t.tag = std::move(tag);
  return t;
}

bool structurally_equal(const DataQuantumType& a, const DataQuantumType& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case TypeKind::Text:
      return true;
    case TypeKind::Record:
      return a.field_names == b.field_names;
    case TypeKind::NumericVector:
      return a.dim == b.dim;
    case TypeKind::KeyValue:
      return structurally_equal(*a.key, *b.key) && structurally_equal(*a.value, *b.value);
    case TypeKind::Opaque:
      return a.tag == b.tag;
  }
  return false;
}

std::string type_name(const DataQuantumType& t) {
  switch (t.kind) {
    case TypeKind::Text:
      return "text";
    case TypeKind::Record: {
      std::string s = "record(";
      for (std::size_t i = 0; i < t.field_names.size(); ++i) {
        if (i) s += ',';
        s += t.field_names[i];
      }
      return s + ")";
    }
    case TypeKind::NumericVector:
      return "vector(" + std::to_string(t.dim) + ")";
    case TypeKind::KeyValue:
      return "kv(" + type_name(*t.key) + "," + type_name(*t.value) + ")";
    case TypeKind::Opaque:
      return "opaque(" + t.tag + ")";
  }
  return "?";
}

namespace {

DataQuantumType parse_type_at(const std::string& s, std::size_t& pos);

std::string take_ident(const std::string& s, std::size_t& pos) {
  std::size_t start = pos;
  while (pos < s.size() && s[pos] != '(' && s[pos] != ')' && s[pos] != ',') ++pos;
  return s.substr(start, pos - start);
}

void expect_char(const std::string& s, std::size_t& pos, char c) {
  if (pos >= s.size() || s[pos] != c) {
    throw std::invalid_argument("malformed type '" + s + "' (expected '" + c + "')");
  }
  ++pos;
}

DataQuantumType parse_type_at(const std::string& s, std::size_t& pos) {
  std::string head = take_ident(s, pos);
  if (head == "text") return DataQuantumType::text();
  if (head == "record") {
    expect_char(s, pos, '(');
    std::vector<std::string> names;
    if (pos < s.size() && s[pos] != ')') {
      names.push_back(take_ident(s, pos));
      while (pos < s.size() && s[pos] == ',') {
        ++pos;
        names.push_back(take_ident(s, pos));
      }
    }
    expect_char(s, pos, ')');
    return DataQuantumType::record(std::move(names));
  }
  if (head == "vector") {
    expect_char(s, pos, '(');
    std::string n = take_ident(s, pos);
    expect_char(s, pos, ')');
    return DataQuantumType::numeric_vector(std::stoi(n));
  }
  if (head == "kv") {
    expect_char(s, pos, '(');
    DataQuantumType k = parse_type_at(s, pos);
    expect_char(s, pos, ',');
    DataQuantumType v = parse_type_at(s, pos);
    expect_char(s, pos, ')');
    return DataQuantumType::key_value(std::move(k), std::move(v));
  }
  if (head == "opaque") {
    expect_char(s, pos, '(');
    std::string tag = take_ident(s, pos);
    expect_char(s, pos, ')');
    return DataQuantumType::opaque(std::move(tag));
  }
  throw std::invalid_argument("unknown type '" + head + "' in '" + s + "'");
}

}  // namespace

DataQuantumType parse_type(const std::string& s) {
  std::size_t pos = 0;
  DataQuantumType t = parse_type_at(s, pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters in type '" + s + "'");
  return t;
}

bool connectable(const DataQuantumType& from, const DataQuantumType& to) {
  if (structurally_equal(from, to)) return true;
  if (from.kind == TypeKind::Opaque && from.tag == type_name(to)) return true;
  if (to.kind == TypeKind::Opaque && to.tag == type_name(from)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Kind tables
// ---------------------------------------------------------------------------

namespace {
struct KindInfo {
  OperatorKind kind;
  const char* name;
  int in;
  int out;
};
constexpr KindInfo kKinds[] = {
    {OperatorKind::TextFileSource, "TextFileSource", 0, 1},
    {OperatorKind::CollectionSource, "CollectionSource", 0, 1},
    {OperatorKind::TableSource, "TableSource", 0, 1},
    {OperatorKind::Map, "Map", 1, 1},
    {OperatorKind::FlatMap, "FlatMap", 1, 1},
    {OperatorKind::Filter, "Filter", 1, 1},
    {OperatorKind::Sample, "Sample", 1, 1},
    {OperatorKind::ReduceGlobal, "ReduceGlobal", 1, 1},
    {OperatorKind::ReduceByKey, "ReduceByKey", 1, 1},
    {OperatorKind::GroupByKey, "GroupByKey", 1, 1},
    {OperatorKind::Join, "Join", 2, 1},
    {OperatorKind::Union, "Union", 2, 1},
    {OperatorKind::Distinct, "Distinct", 1, 1},
    {OperatorKind::Sort, "Sort", 1, 1},
    {OperatorKind::Count, "Count", 1, 1},
    {OperatorKind::Cache, "Cache", 1, 1},
    {OperatorKind::RepeatLoop, "RepeatLoop", 2, 2},
    {OperatorKind::CollectSink, "CollectSink", 1, 0},
    {OperatorKind::TextFileSink, "TextFileSink", 1, 0},
};

const KindInfo& info(OperatorKind k) {
  for (const auto& ki : kKinds) {
    if (ki.kind == k) return ki;
  }
  throw std::logic_error("unknown operator kind");
}
}  // namespace

const char* kind_name(OperatorKind k) { return info(k).name; }

std::optional<OperatorKind> kind_from_name(const std::string& name) {
  for (const auto& ki : kKinds) {
    if (name == ki.name) return ki.kind;
  }
  return std::nullopt;
}

bool is_source(OperatorKind k) { return input_arity(k) == 0; }
bool is_sink(OperatorKind k) { return output_arity(k) == 0; }
int input_arity(OperatorKind k) { return info(k).in; }
int output_arity(OperatorKind k) { return info(k).out; }

const char* cost_hint_name(CostHint h) {
  switch (h) {
    case CostHint::Constant:
      return "constant";
    case CostHint::Linear:
      return "linear";
    case CostHint::Quadratic:
      return "quadratic";
  }
  return "?";
}

std::optional<CostHint> cost_hint_from_name(const std::string& name) {
  if (name == "constant") return CostHint::Constant;
  if (name == "linear") return CostHint::Linear;
  if (name == "quadratic") return CostHint::Quadratic;
  return std::nullopt;
}

SelectivitySpec default_selectivity(OperatorKind k) {
  switch (k) {
    case OperatorKind::Filter:
      return {0.1, 0.5, 0.5};
    case OperatorKind::FlatMap:
      return {1.0, 10.0, 0.5};
    case OperatorKind::Join:
      // Fraction of the input-cardinality product.
      return {0.0001, 0.01, 0.3};
    case OperatorKind::ReduceByKey:
    case OperatorKind::GroupByKey:
    case OperatorKind::Distinct:
      // Distinct-key ratio.
      return {0.01, 0.5, 0.4};
    case OperatorKind::ReduceGlobal:
    case OperatorKind::Count:
      return {1.0, 1.0, 1.0};  // exactly one output quantum
    default:
      return {1.0, 1.0, 1.0};
  }
}

std::int64_t LogicalOperator::int_attr_or(const std::string& key, std::int64_t fallback) const {
  auto it = attrs.find(key);
  if (it == attrs.end()) return fallback;
  return std::stoll(it->second);
}

bool operator==(const LogicalOperator& a, const LogicalOperator& b) {
  auto types_eq = [](const std::vector<DataQuantumType>& x, const std::vector<DataQuantumType>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!structurally_equal(x[i], y[i])) return false;
    }
    return true;
  };
  return a.id == b.id && a.kind == b.kind && a.udf == b.udf && a.udf2 == b.udf2 &&
         a.selectivity == b.selectivity && a.platform_constraint == b.platform_constraint &&
         types_eq(a.input_types, b.input_types) && types_eq(a.output_types, b.output_types) &&
         a.broadcast_ports == b.broadcast_ports && a.attrs == b.attrs;
}

// ---------------------------------------------------------------------------
// Plan graph
// ---------------------------------------------------------------------------

void LogicalPlan::add(LogicalOperator op) {
  if (op.input_types.empty()) {
    op.input_types.assign(input_arity(op.kind), DataQuantumType::opaque("data"));
  }
  if (op.output_types.empty()) {
    op.output_types.assign(output_arity(op.kind), DataQuantumType::opaque("data"));
  }
  const std::string id = op.id;
  if (!ops_.emplace(id, std::move(op)).second) {
    throw std::invalid_argument("duplicate operator id '" + id + "'");
  }
}

void LogicalPlan::connect(const std::string& from, int from_port, const std::string& to,
                          int to_port, bool feedback) {
  edges_.push_back(Edge{{from, from_port}, {to, to_port}, feedback});
}

void LogicalPlan::broadcast(const std::string& from, int from_port, const std::string& to,
                            const std::string& port_name) {
  broadcasts_.push_back(BroadcastEdge{{from, from_port}, to, port_name});
}

const LogicalOperator& LogicalPlan::op(const std::string& id) const {
  auto it = ops_.find(id);
  if (it == ops_.end()) throw std::out_of_range("no operator '" + id + "'");
  return it->second;
}

LogicalOperator& LogicalPlan::op(const std::string& id) {
  auto it = ops_.find(id);
  if (it == ops_.end()) throw std::out_of_range("no operator '" + id + "'");
  return it->second;
}

std::vector<const LogicalOperator*> LogicalPlan::operators() const {
  std::vector<const LogicalOperator*> out;
  out.reserve(ops_.size());
  for (const auto& [id, op] : ops_) out.push_back(&op);
  return out;
}

std::vector<std::string> LogicalPlan::operator_ids() const {
  std::vector<std::string> out;
  out.reserve(ops_.size());
  for (const auto& [id, op] : ops_) out.push_back(id);
  return out;
}

std::vector<Edge> LogicalPlan::in_edges(const std::string& id) const {
  std::vector<Edge> out;
  for (const auto& e : edges_) {
    if (e.to.op == id) out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Edge> LogicalPlan::out_edges(const std::string& id) const {
  std::vector<Edge> out;
  for (const auto& e : edges_) {
    if (e.from.op == id) out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<BroadcastEdge> LogicalPlan::in_broadcasts(const std::string& id) const {
  std::vector<BroadcastEdge> out;
  for (const auto& b : broadcasts_) {
    if (b.to_op == id) out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<BroadcastEdge> LogicalPlan::out_broadcasts(const std::string& id) const {
  std::vector<BroadcastEdge> out;
  for (const auto& b : broadcasts_) {
    if (b.from.op == id) out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool operator==(const LogicalPlan& a, const LogicalPlan& b) {
  auto es = a.edges_;
  auto fs = b.edges_;
  std::sort(es.begin(), es.end());
  std::sort(fs.begin(), fs.end());
  auto bs = a.broadcasts_;
  auto cs = b.broadcasts_;
  std::sort(bs.begin(), bs.end());
  std::sort(cs.begin(), cs.end());
  return a.ops_ == b.ops_ && es == fs && bs == cs;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<std::string> validate_plan(const LogicalPlan& plan) {
  std::vector<std::string> bad;
  const auto ids = plan.operator_ids();

  for (const auto& id : ids) {
    const auto& op = plan.op(id);
    if (static_cast<int>(op.input_types.size()) != input_arity(op.kind) ||
        static_cast<int>(op.output_types.size()) != output_arity(op.kind)) {
      bad.push_back("operator " + id + ": port count does not match kind " +
                    kind_name(op.kind));
    }
    for (const auto& t : op.input_types) {
      if (t.kind == TypeKind::Record) {
        if (t.field_names.empty()) bad.push_back("operator " + id + ": record arity must be >= 1");
        std::set<std::string> uniq(t.field_names.begin(), t.field_names.end());
        if (uniq.size() != t.field_names.size()) {
          bad.push_back("operator " + id + ": duplicate record field names");
        }
      }
    }
    if (op.selectivity) {
      const auto& s = *op.selectivity;
      if (s.lo < 0 || s.hi < s.lo || s.confidence < 0 || s.confidence > 1) {
        bad.push_back("operator " + id + ": malformed selectivity interval");
      }
      if (op.kind == OperatorKind::Filter && s.hi > 1.0) {
        bad.push_back("operator " + id + ": Filter selectivity hi must be <= 1");
      }
    }
    if (op.kind == OperatorKind::RepeatLoop) {
      bool has_count = op.attrs.count("iterations") != 0;
      bool has_convergence = op.udf2.has_value();
      if (!has_count && !has_convergence) {
        bad.push_back("operator " + id + ": RepeatLoop needs iterationCount or convergence UDF");
      }
      if (has_count && op.int_attr_or("iterations", 0) < 1) {
        bad.push_back("operator " + id + ": RepeatLoop iterationCount must be >= 1");
      }
    }
  }

  // Port binding: every data port bound exactly once.
  std::map<std::pair<std::string, int>, int> in_bound, out_bound;
  for (const auto& e : plan.edges()) {
    if (!plan.has(e.from.op) || !plan.has(e.to.op)) {
      bad.push_back("edge references unknown operator " +
                    (plan.has(e.from.op) ? e.to.op : e.from.op));
      continue;
    }
    ++out_bound[{e.from.op, e.from.port}];
    ++in_bound[{e.to.op, e.to.port}];
    const auto& from = plan.op(e.from.op);
    const auto& to = plan.op(e.to.op);
    if (e.from.port >= static_cast<int>(from.output_types.size()) ||
        e.to.port >= static_cast<int>(to.input_types.size())) {
      bad.push_back("edge " + e.from.op + " -> " + e.to.op + ": port out of range");
      continue;
    }
    if (!connectable(from.output_types[e.from.port], to.input_types[e.to.port])) {
      bad.push_back("edge " + e.from.op + " -> " + e.to.op + ": type mismatch (" +
                    type_name(from.output_types[e.from.port]) + " vs " +
                    type_name(to.input_types[e.to.port]) + ")");
    }
    if (e.feedback &&
        !(to.kind == OperatorKind::RepeatLoop && e.to.port == 1)) {
      bad.push_back("feedback edge not anchored at RepeatLoop (into " + e.to.op + ")");
    }
  }
  for (const auto& b : plan.broadcast_edges()) {
    if (!plan.has(b.from.op) || !plan.has(b.to_op)) {
      bad.push_back("broadcast edge references unknown operator");
      continue;
    }
    const auto& ports = plan.op(b.to_op).broadcast_ports;
    if (std::find(ports.begin(), ports.end(), b.port_name) == ports.end()) {
      bad.push_back("broadcast edge into " + b.to_op + ": no broadcast port '" + b.port_name +
                    "'");
    }
  }
  for (const auto& id : ids) {
    const auto& op = plan.op(id);
    for (int p = 0; p < static_cast<int>(op.input_types.size()); ++p) {
      int n = in_bound.count({id, p}) ? in_bound[{id, p}] : 0;
      if (n != 1) {
        bad.push_back("operator " + id + ": input port " + std::to_string(p) + " bound " +
                      std::to_string(n) + " times");
      }
    }
    // Outputs may fan out (several data consumers and/or broadcasts) but must
    // be consumed at least once.
    for (int p = 0; p < static_cast<int>(op.output_types.size()); ++p) {
      int n = out_bound.count({id, p}) ? out_bound[{id, p}] : 0;
      for (const auto& b : plan.out_broadcasts(id)) {
        if (b.from.port == p) ++n;
      }
      if (n == 0) {
        bad.push_back("operator " + id + ": output port " + std::to_string(p) + " has no consumer");
      }
    }
    std::map<std::string, int> bcast_bound;
    for (const auto& b : plan.in_broadcasts(id)) ++bcast_bound[b.port_name];
    for (const auto& name : op.broadcast_ports) {
      if (bcast_bound[name] != 1) {
        bad.push_back("operator " + id + ": broadcast port '" + name + "' bound " +
                      std::to_string(bcast_bound[name]) + " times");
      }
    }
  }

  // At least one source; acyclic modulo feedback; a sink reachable from each
  // source.
  bool any_source = false;
  for (const auto& id : ids) {
    if (is_source(plan.op(id).kind)) any_source = true;
  }
  if (!ids.empty() && !any_source) bad.push_back("plan has no source operator");

  try {
    topological_order(plan);
  } catch (const std::logic_error&) {
    bad.push_back("non-feedback edges form a cycle");
  }

  for (const auto& id : ids) {
    if (!is_source(plan.op(id).kind)) continue;
    std::set<std::string> seen{id};
    std::deque<std::string> work{id};
    bool found_sink = false;
    while (!work.empty() && !found_sink) {
      auto cur = work.front();
      work.pop_front();
      if (is_sink(plan.op(cur).kind)) found_sink = true;
      for (const auto& e : plan.out_edges(cur)) {
        if (seen.insert(e.to.op).second) work.push_back(e.to.op);
      }
      for (const auto& b : plan.out_broadcasts(cur)) {
        if (seen.insert(b.to_op).second) work.push_back(b.to_op);
      }
    }
    if (!found_sink && !ids.empty()) {
      bad.push_back("no sink reachable from source " + id);
    }
  }

  std::sort(bad.begin(), bad.end());
  return bad;
}

std::vector<std::string> topological_order(const LogicalPlan& plan) {
  std::map<std::string, int> indeg;
  for (const auto& id : plan.operator_ids()) indeg[id] = 0;
  for (const auto& e : plan.edges()) {
    if (!e.feedback && indeg.count(e.to.op)) ++indeg[e.to.op];
  }
  for (const auto& b : plan.broadcast_edges()) {
    if (indeg.count(b.to_op)) ++indeg[b.to_op];
  }
  std::set<std::string> ready;
  for (const auto& [id, d] : indeg) {
    if (d == 0) ready.insert(id);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const auto& e : plan.out_edges(id)) {
      if (e.feedback || !indeg.count(e.to.op)) continue;
      if (--indeg[e.to.op] == 0) ready.insert(e.to.op);
    }
    for (const auto& b : plan.out_broadcasts(id)) {
      if (!indeg.count(b.to_op)) continue;
      if (--indeg[b.to_op] == 0) ready.insert(b.to_op);
    }
  }
  if (order.size() != plan.size()) {
    throw std::logic_error("non-feedback subgraph has a cycle");
  }
  return order;
}

std::map<std::string, std::vector<std::string>> loop_bodies(const LogicalPlan& plan) {
  std::map<std::string, std::vector<std::string>> bodies;
  for (const auto& id : plan.operator_ids()) {
    if (plan.op(id).kind != OperatorKind::RepeatLoop) continue;
    // Reachable from the loop's body output (port 0), following data and
    // broadcast edges, up to and excluding the loop itself.
    std::set<std::string> fwd;
    std::deque<std::string> work;
    for (const auto& e : plan.out_edges(id)) {
      if (e.from.port == 0 && !e.feedback && fwd.insert(e.to.op).second) work.push_back(e.to.op);
    }
    for (const auto& b : plan.out_broadcasts(id)) {
      if (b.from.port == 0 && fwd.insert(b.to_op).second) work.push_back(b.to_op);
    }
    while (!work.empty()) {
      auto cur = work.front();
      work.pop_front();
      if (cur == id) continue;
      for (const auto& e : plan.out_edges(cur)) {
        if (e.feedback) continue;
        if (fwd.insert(e.to.op).second) work.push_back(e.to.op);
      }
      for (const auto& b : plan.out_broadcasts(cur)) {
        if (fwd.insert(b.to_op).second) work.push_back(b.to_op);
      }
    }
    // Backward from the feedback source.
    std::set<std::string> bwd;
    for (const auto& e : plan.in_edges(id)) {
      if (e.feedback && e.to.port == 1 && bwd.insert(e.from.op).second) work.push_back(e.from.op);
    }
    while (!work.empty()) {
      auto cur = work.front();
      work.pop_front();
      if (cur == id) continue;
      for (const auto& e : plan.in_edges(cur)) {
        if (e.feedback) continue;
        if (bwd.insert(e.from.op).second) work.push_back(e.from.op);
      }
      for (const auto& b : plan.in_broadcasts(cur)) {
        if (bwd.insert(b.from.op).second) work.push_back(b.from.op);
      }
    }
    std::vector<std::string> body;
    for (const auto& m : fwd) {
      if (m != id && bwd.count(m)) body.push_back(m);
    }
    bodies[id] = std::move(body);
  }
  return bodies;
}

std::map<std::string, std::int64_t> amplification(const LogicalPlan& plan) {
  std::map<std::string, std::int64_t> amp;
  for (const auto& id : plan.operator_ids()) amp[id] = 1;
  for (const auto& [loop, body] : loop_bodies(plan)) {
    std::int64_t n = plan.op(loop).int_attr_or("iterations", 1);
    amp[loop] *= n;  // the condition is evaluated once per iteration
    for (const auto& m : body) amp[m] *= n;
  }
  return amp;
}

std::int64_t edge_amplification(const LogicalPlan& plan,
                                const std::map<std::string, std::int64_t>& op_amp,
                                const Edge& e) {
  const auto& to = plan.op(e.to.op);
  if (to.kind == OperatorKind::RepeatLoop) {
    if (e.to.port == 0) return 1;  // initial value flows once
    // Feedback: once per iteration.
    return op_amp.at(e.to.op);
  }
  return op_amp.at(e.to.op);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

PlanFormatError::PlanFormatError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}

namespace {

std::string fmt_real(double d) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

}  // namespace

std::string serialize_plan(const LogicalPlan& plan) {
  std::string out = "xplan formatVersion: 1\n";
  out += "operators:\n";
  for (const auto* op : plan.operators()) {
    out += "  op " + op->id + " " + kind_name(op->kind) + "\n";
    if (op->udf) {
      out += "    udf " + quote(op->udf->name) + " hint " + cost_hint_name(op->udf->hint) + "\n";
    }
    if (op->udf2) {
      out += "    udf2 " + quote(op->udf2->name) + " hint " + cost_hint_name(op->udf2->hint) +
             "\n";
    }
    if (op->selectivity) {
      out += "    selectivity " + fmt_real(op->selectivity->lo) + " " +
             fmt_real(op->selectivity->hi) + " conf " + fmt_real(op->selectivity->confidence) +
             "\n";
    }
    if (op->platform_constraint) {
      out += "    platform " + quote(*op->platform_constraint) + "\n";
    }
    for (const auto& [key, val] : op->attrs) {
      out += "    attr " + key + " " + quote(val) + "\n";
    }
    for (std::size_t p = 0; p < op->input_types.size(); ++p) {
      out += "    in " + std::to_string(p) + " " + type_name(op->input_types[p]) + "\n";
    }
    for (std::size_t p = 0; p < op->output_types.size(); ++p) {
      out += "    out " + std::to_string(p) + " " + type_name(op->output_types[p]) + "\n";
    }
    for (const auto& b : op->broadcast_ports) {
      out += "    bport " + b + "\n";
    }
  }
  out += "edges:\n";
  auto edges = plan.edges();
  std::sort(edges.begin(), edges.end());
  for (const auto& e : edges) {
    out += std::string("  ") + (e.feedback ? "feedback " : "edge ") + e.from.op + " " +
           std::to_string(e.from.port) + " -> " + e.to.op + " " + std::to_string(e.to.port) + "\n";
  }
  out += "broadcasts:\n";
  auto bcasts = plan.broadcast_edges();
  std::sort(bcasts.begin(), bcasts.end());
  for (const auto& b : bcasts) {
    out += "  broadcast " + b.from.op + " " + std::to_string(b.from.port) + " -> " + b.to_op +
           " " + b.port_name + "\n";
  }
  out += "end\n";
  return out;
}

namespace {

struct LineReader {
  std::vector<std::string> lines;
  int pos = 0;

  explicit LineReader(const std::string& doc) {
    std::string cur;
    for (char c : doc) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }

  bool done() const { return pos >= static_cast<int>(lines.size()); }
  int lineno() const { return pos + 1; }
  const std::string& peek() const { return lines[pos]; }
  std::string next() { return lines[pos++]; }
};

std::vector<std::string> tokenize(const std::string& line, int lineno) {
  std::vector<std::string> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t') {
      ++i;
      continue;
    }
    if (line[i] == '\'') {
      std::string s;
      ++i;
      while (i < line.size() && line[i] != '\'') {
        if (line[i] == '\\' && i + 1 < line.size()) ++i;
        s += line[i++];
      }
      if (i >= line.size()) throw PlanFormatError(lineno, "unterminated string");
      ++i;
      toks.push_back("'" + s);  // marker prefix: quoted token
    } else {
      std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      toks.push_back(line.substr(start, i - start));
    }
  }
  return toks;
}

std::string unquoted(const std::string& tok, int lineno, const std::string& what) {
  if (tok.empty() || tok[0] != '\'') {
    throw PlanFormatError(lineno, "expected quoted " + what);
  }
  return tok.substr(1);
}

}  // namespace

LogicalPlan deserialize_plan(const std::string& document) {
  LineReader rd(document);
  if (rd.done()) throw PlanFormatError(1, "missing operators section (empty document)");
  {
    auto header = rd.next();
    if (header != "xplan formatVersion: 1") {
      throw PlanFormatError(1, "unsupported header '" + header + "'");
    }
  }
  if (rd.done() || rd.next() != "operators:") {
    throw PlanFormatError(rd.lineno(), "missing operators section");
  }

  LogicalPlan plan;
  LogicalOperator cur;
  bool have_cur = false;
  auto flush = [&](int lineno) {
    if (!have_cur) return;
    if (plan.has(cur.id)) throw PlanFormatError(lineno, "duplicate operator id '" + cur.id + "'");
    plan.add(std::move(cur));
    cur = LogicalOperator{};
    have_cur = false;
  };

  while (!rd.done() && rd.peek() != "edges:") {
    int lineno = rd.lineno();
    auto toks = tokenize(rd.next(), lineno);
    if (toks.empty()) continue;
    if (toks[0] == "op") {
      flush(lineno);
      if (toks.size() != 3) throw PlanFormatError(lineno, "op wants: op <id> <Kind>");
      cur.id = toks[1];
      auto k = kind_from_name(toks[2]);
      if (!k) throw PlanFormatError(lineno, "unknown operator kind '" + toks[2] + "'");
      cur.kind = *k;
      have_cur = true;
      continue;
    }
    if (!have_cur) throw PlanFormatError(lineno, "field before first operator");
    try {
      if (toks[0] == "udf" || toks[0] == "udf2") {
        if (toks.size() != 4 || toks[2] != "hint") {
          throw PlanFormatError(lineno, "udf wants: udf '<name>' hint <hint>");
        }
        UdfSpec spec;
        spec.name = unquoted(toks[1], lineno, "udf name");
        auto h = cost_hint_from_name(toks[3]);
        if (!h) throw PlanFormatError(lineno, "unknown cost hint '" + toks[3] + "'");
        spec.hint = *h;
        (toks[0] == "udf" ? cur.udf : cur.udf2) = spec;
      } else if (toks[0] == "selectivity") {
        if (toks.size() != 5 || toks[3] != "conf") {
          throw PlanFormatError(lineno, "selectivity wants: selectivity <lo> <hi> conf <c>");
        }
        cur.selectivity = SelectivitySpec{std::stod(toks[1]), std::stod(toks[2]),
                                          std::stod(toks[4])};
      } else if (toks[0] == "platform") {
        cur.platform_constraint = unquoted(toks[1], lineno, "platform");
      } else if (toks[0] == "attr") {
        if (toks.size() != 3) throw PlanFormatError(lineno, "attr wants: attr <key> '<value>'");
        cur.attrs[toks[1]] = unquoted(toks[2], lineno, "attr value");
      } else if (toks[0] == "in" || toks[0] == "out") {
        if (toks.size() != 3) throw PlanFormatError(lineno, "port wants: in|out <idx> <type>");
        auto& vec = toks[0] == "in" ? cur.input_types : cur.output_types;
        std::size_t idx = std::stoul(toks[1]);
        if (vec.size() <= idx) vec.resize(idx + 1, DataQuantumType::opaque("data"));
        vec[idx] = parse_type(toks[2]);
      } else if (toks[0] == "bport") {
        cur.broadcast_ports.push_back(toks[1]);
      } else {
        throw PlanFormatError(lineno, "unknown operator field '" + toks[0] + "'");
      }
    } catch (const PlanFormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw PlanFormatError(lineno, e.what());
    }
  }
  flush(rd.lineno());
  if (rd.done()) throw PlanFormatError(rd.lineno(), "missing edges section");
  rd.next();  // edges:

  while (!rd.done() && rd.peek() != "broadcasts:") {
    int lineno = rd.lineno();
    auto toks = tokenize(rd.next(), lineno);
    if (toks.empty()) continue;
    if ((toks[0] != "edge" && toks[0] != "feedback") || toks.size() != 6 || toks[3] != "->") {
      throw PlanFormatError(lineno, "edge wants: edge|feedback <op> <port> -> <op> <port>");
    }
    try {
      plan.connect(toks[1], std::stoi(toks[2]), toks[4], std::stoi(toks[5]),
                   toks[0] == "feedback");
    } catch (const std::exception& e) {
      throw PlanFormatError(lineno, e.what());
    }
  }
  if (rd.done()) throw PlanFormatError(rd.lineno(), "missing broadcasts section");
  rd.next();  // broadcasts:

  while (!rd.done() && rd.peek() != "end") {
    int lineno = rd.lineno();
    auto toks = tokenize(rd.next(), lineno);
    if (toks.empty()) continue;
    if (toks[0] != "broadcast" || toks.size() != 6 || toks[3] != "->") {
      throw PlanFormatError(lineno, "broadcast wants: broadcast <op> <port> -> <op> <name>");
    }
    try {
      plan.broadcast(toks[1], std::stoi(toks[2]), toks[4], toks[5]);
    } catch (const std::exception& e) {
      throw PlanFormatError(lineno, e.what());
    }
  }
  if (rd.done()) throw PlanFormatError(rd.lineno(), "missing end marker");
  return plan;
}

}  // namespace xplan::plan
