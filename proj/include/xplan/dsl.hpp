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

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "xplan/plan.hpp"

namespace xplan::dsl {

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

struct Pos {
  int line = 0;
  int col = 0;
};

/// Dotted function reference with literal arguments, e.g.
/// `polyjoin.projectRecord(0, 1)`.
struct UdfRef {
  std::string name;
  std::vector<std::string> args;  // literal text, strings unquoted
  std::vector<bool> arg_quoted;
  Pos pos;
};

/// One operator argument group: `name`, `name[k]`, `name -> {udf}`,
/// or an inline comparison `name[k] == 'lit'`.
struct ArgGroup {
  std::string input;
  std::optional<int> subscript;
  std::optional<UdfRef> udf;
  std::optional<std::string> cmp_op;
  std::optional<std::string> cmp_literal;
  bool cmp_quoted = false;
  Pos pos;
};

struct Clause {
  enum Kind { Broadcast, Platform, Delimiter, For };
  Kind kind;
  std::string text;
  long long number = 0;
  Pos pos;
};

struct Assignment;

struct LoadExpr {
  std::optional<std::string> uri;
  std::optional<UdfRef> collection;
  std::vector<Clause> clauses;
};

struct OpExpr {
  std::string keyword;
  std::vector<ArgGroup> args;
  std::vector<Clause> clauses;
};

struct RepeatExpr {
  long long count = 0;
  std::optional<std::string> init_name;  // `repeat init AS var for N` form
  std::optional<std::string> loop_var;
  std::vector<Assignment> body;
};

struct Expr {
  std::variant<LoadExpr, OpExpr, RepeatExpr> node;
  Pos pos;
};

struct Assignment {
  std::string target;
  Expr expr;
  Pos pos;
};

struct ImportStmt {
  std::string path;
  std::string alias;
  Pos pos;
};

struct StoreStmt {
  std::string name;
  std::optional<std::string> uri;
  Pos pos;
};

struct Statement {
  std::variant<ImportStmt, Assignment, StoreStmt> node;
};

struct Script {
  std::vector<Statement> statements;
};

/// Structural equality, source positions ignored.
bool equal(const Script& a, const Script& b);

// ---------------------------------------------------------------------------
// Keyword table
// ---------------------------------------------------------------------------

/// Maps script keywords to operator kinds. `reduce` is special-cased: one
/// argument group lowers to ReduceGlobal, two to ReduceByKey.
class KeywordTable {
 public:
  static KeywordTable builtin();
  /// Loads `keyword <OperatorKind>` lines; `#` starts a comment. Additive on
  /// top of the builtin table.
  static KeywordTable load(const std::string& text);

  bool is_op_keyword(const std::string& word) const { return table_.count(word) != 0; }
  plan::OperatorKind kind_of(const std::string& word) const { return table_.at(word); }
  void add(const std::string& keyword, plan::OperatorKind kind) { table_[keyword] = kind; }

 private:
  std::map<std::string, plan::OperatorKind> table_;
};

// ---------------------------------------------------------------------------
// Parse / print
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
  int line;
  int col;
  ParseError(int line, int col, const std::string& what);
};

/// Parses a script. Enforces single-assignment forward-only references and
/// the repeat-block rebinding rule; loop variables may be rebound exactly
/// once inside their block.
Script parse(const std::string& source, const KeywordTable& keywords = KeywordTable::builtin());

/// Canonical source form; parse(print(s)) is structurally equal to s.
std::string print(const Script& script);

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

/// What the lowerer needs to know about the host environment.
struct LowerContext {
  /// Returns true if the dotted UDF name resolves.
  std::function<bool(const std::string&)> udf_resolves;
  /// Optional per-UDF selectivity, overriding kind defaults.
  std::function<std::optional<plan::SelectivitySpec>(const std::string&)> udf_selectivity;
  /// Registered backend names; empty set skips the platform check.
  std::set<std::string> backends;
};

struct LowerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Lowers a parsed script 1-to-1 onto a LogicalPlan (imports excepted). The
/// result always passes validate_plan.
plan::LogicalPlan lower(const Script& script, const LowerContext& ctx,
                        const KeywordTable& keywords = KeywordTable::builtin());

}  // namespace xplan::dsl
