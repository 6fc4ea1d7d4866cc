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

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace xplan::plan {

// ---------------------------------------------------------------------------
// Data quantum types
// ---------------------------------------------------------------------------

enum class TypeKind { Text, Record, NumericVector, KeyValue, Opaque };

/// Structural type of the quanta flowing through a port.
struct DataQuantumType {
  TypeKind kind = TypeKind::Opaque;
  std::vector<std::string> field_names;            // Record
  int dim = 0;                                     // NumericVector
  std::shared_ptr<DataQuantumType> key, value;     // KeyValue
  std::string tag;                                 // Opaque

  static DataQuantumType text();
  static DataQuantumType record(std::vector<std::string> fields);
  static DataQuantumType numeric_vector(int dim);
  static DataQuantumType key_value(DataQuantumType k, DataQuantumType v);
  static DataQuantumType opaque(std::string tag);
};

bool structurally_equal(const DataQuantumType& a, const DataQuantumType& b);

/// Canonical name, e.g. "text", "record(word,count)", "vector(3)",
/// "kv(text,record(a,b))", "opaque(any)". Doubles as the serialized form.
std::string type_name(const DataQuantumType& t);

/// Parses type_name output. Throws std::invalid_argument on malformed input.
DataQuantumType parse_type(const std::string& s);

/// Two port types connect iff structurally equal, or one side is Opaque whose
/// tag equals the other side's canonical name.
bool connectable(const DataQuantumType& from, const DataQuantumType& to);

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

enum class OperatorKind {
  TextFileSource,
  CollectionSource,
  TableSource,
  Map,
  FlatMap,
  Filter,
  Sample,
  ReduceGlobal,
  ReduceByKey,
  GroupByKey,
  Join,
  Union,
  Distinct,
  Sort,
  Count,
  Cache,
  RepeatLoop,
  CollectSink,
  TextFileSink,
};

const char* kind_name(OperatorKind k);
std::optional<OperatorKind> kind_from_name(const std::string& name);
bool is_source(OperatorKind k);
bool is_sink(OperatorKind k);

/// Number of data input/output ports each kind carries. RepeatLoop inputs are
/// (0: initial, 1: feedback); outputs are (0: per-iteration body value,
/// 1: final value).
int input_arity(OperatorKind k);
int output_arity(OperatorKind k);

enum class CostHint { Constant, Linear, Quadratic };
const char* cost_hint_name(CostHint h);
std::optional<CostHint> cost_hint_from_name(const std::string& name);

/// A UDF is a registry key plus a per-input-quantum complexity hint; plans
/// never embed code.
struct UdfSpec {
  std::string name;
  CostHint hint = CostHint::Constant;
  friend bool operator==(const UdfSpec&, const UdfSpec&) = default;
};

struct SelectivitySpec {
  double lo = 1.0;
  double hi = 1.0;
  double confidence = 1.0;
  friend bool operator==(const SelectivitySpec&, const SelectivitySpec&) = default;
};

/// Documented deterministic defaults per operator kind.
SelectivitySpec default_selectivity(OperatorKind k);

struct LogicalOperator {
  std::string id;
  OperatorKind kind = OperatorKind::Map;
  std::optional<UdfSpec> udf;
  /// Secondary UDF: key extractor for ReduceByKey/GroupByKey/Sort, the
  /// right-side key for Join, the convergence predicate for RepeatLoop.
  std::optional<UdfSpec> udf2;
  std::optional<SelectivitySpec> selectivity;
  std::optional<std::string> platform_constraint;
  std::vector<DataQuantumType> input_types;   // size == input_arity(kind)
  std::vector<DataQuantumType> output_types;  // size == output_arity(kind)
  std::vector<std::string> broadcast_ports;   // named side inputs
  /// Kind-specific attributes: uri, delimiter, collection (registry factory),
  /// table, sampleSize, iterations, seed. Serialized verbatim.
  std::map<std::string, std::string> attrs;

  std::string attr_or(const std::string& key, const std::string& fallback) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second;
  }
  std::int64_t int_attr_or(const std::string& key, std::int64_t fallback) const;

  friend bool operator==(const LogicalOperator&, const LogicalOperator&);
};

// ---------------------------------------------------------------------------
// Plan graph
// ---------------------------------------------------------------------------

struct PortRef {
  std::string op;
  int port = 0;
  friend auto operator<=>(const PortRef&, const PortRef&) = default;
};

struct Edge {
  PortRef from;  // output port
  PortRef to;    // input port
  bool feedback = false;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct BroadcastEdge {
  PortRef from;          // producer output port
  std::string to_op;     // consumer operator
  std::string port_name; // consumer broadcast port
  friend auto operator<=>(const BroadcastEdge&, const BroadcastEdge&) = default;
};

/// Platform-agnostic dataflow plan: a DAG of operators except for feedback
/// edges, each of which closes through exactly one RepeatLoop.
class LogicalPlan {
 public:
  void add(LogicalOperator op);
  void connect(const std::string& from, int from_port, const std::string& to, int to_port,
               bool feedback = false);
  void broadcast(const std::string& from, int from_port, const std::string& to,
                 const std::string& port_name);

  bool has(const std::string& id) const { return ops_.count(id) != 0; }
  const LogicalOperator& op(const std::string& id) const;
  LogicalOperator& op(const std::string& id);
  /// Operators in id order (deterministic iteration everywhere).
  std::vector<const LogicalOperator*> operators() const;
  std::vector<std::string> operator_ids() const;
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<BroadcastEdge>& broadcast_edges() const { return broadcasts_; }
  std::size_t size() const { return ops_.size(); }

  std::vector<Edge> in_edges(const std::string& id) const;
  std::vector<Edge> out_edges(const std::string& id) const;
  std::vector<BroadcastEdge> in_broadcasts(const std::string& id) const;
  std::vector<BroadcastEdge> out_broadcasts(const std::string& id) const;

  friend bool operator==(const LogicalPlan&, const LogicalPlan&);

 private:
  std::map<std::string, LogicalOperator> ops_;
  std::vector<Edge> edges_;
  std::vector<BroadcastEdge> broadcasts_;
};

/// Checks every structural invariant; returns one message per violation,
/// each naming the offending operator/edge. Empty result = valid plan.
std::vector<std::string> validate_plan(const LogicalPlan& plan);

/// Topological order over non-feedback edges, ties broken by operator id.
/// Throws std::logic_error if the non-feedback subgraph has a cycle.
std::vector<std::string> topological_order(const LogicalPlan& plan);

/// Operators on some path from a RepeatLoop's body output to its feedback
/// input, keyed by loop id. The loop operator itself is not a body member.
std::map<std::string, std::vector<std::string>> loop_bodies(const LogicalPlan& plan);

/// Product of iterationCounts of every loop whose body contains the operator
/// (the RepeatLoop itself amplifies by its own count: its condition runs once
/// per iteration).
std::map<std::string, std::int64_t> amplification(const LogicalPlan& plan);

/// Per-edge execution multiplier: body-internal, into-body, broadcast-into-
/// body and feedback edges amplify by the loop count; initial and final loop
/// edges do not.
std::int64_t edge_amplification(const LogicalPlan& plan,
                                const std::map<std::string, std::int64_t>& op_amp,
                                const Edge& e);

// ---------------------------------------------------------------------------
// Portable serialization (formatVersion 1)
// ---------------------------------------------------------------------------

/// Canonical text form: sections `operators`, `edges`, `broadcasts`; fields in
/// fixed order, operators and edges sorted, so equal plans serialize to equal
/// bytes.
std::string serialize_plan(const LogicalPlan& plan);

/// Parses serialize_plan output. Throws PlanFormatError with a line locus on
/// malformed documents.
LogicalPlan deserialize_plan(const std::string& document);

struct PlanFormatError : std::runtime_error {
  int line;
  PlanFormatError(int line, const std::string& what);
};

}  // namespace xplan::plan
