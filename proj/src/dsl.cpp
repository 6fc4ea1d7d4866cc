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
#include "xplan/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace xplan::dsl {

using plan::OperatorKind;

// ---------------------------------------------------------------------------
// Structural equality (positions ignored)
// ---------------------------------------------------------------------------

namespace {

bool equal_udf(const UdfRef& a, const UdfRef& b) {
  return a.name == b.name && a.args == b.args && a.arg_quoted == b.arg_quoted;
}

bool equal_opt_udf(const std::optional<UdfRef>& a, const std::optional<UdfRef>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || equal_udf(*a, *b);
}

bool equal_group(const ArgGroup& a, const ArgGroup& b) {
  return a.input == b.input && a.subscript == b.subscript && equal_opt_udf(a.udf, b.udf) &&
         a.cmp_op == b.cmp_op && a.cmp_literal == b.cmp_literal && a.cmp_quoted == b.cmp_quoted;
}

bool equal_clause(const Clause& a, const Clause& b) {
  return a.kind == b.kind && a.text == b.text && a.number == b.number;
}

bool equal_clauses(const std::vector<Clause>& a, const std::vector<Clause>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), equal_clause);
}

bool equal_assignment(const Assignment& a, const Assignment& b);

bool equal_expr(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  if (const auto* la = std::get_if<LoadExpr>(&a.node)) {
    const auto& lb = std::get<LoadExpr>(b.node);
    return la->uri == lb.uri && equal_opt_udf(la->collection, lb.collection) &&
           equal_clauses(la->clauses, lb.clauses);
  }
  if (const auto* oa = std::get_if<OpExpr>(&a.node)) {
    const auto& ob = std::get<OpExpr>(b.node);
    return oa->keyword == ob.keyword &&
           std::equal(oa->args.begin(), oa->args.end(), ob.args.begin(), ob.args.end(),
                      equal_group) &&
           equal_clauses(oa->clauses, ob.clauses);
  }
  const auto& ra = std::get<RepeatExpr>(a.node);
  const auto& rb = std::get<RepeatExpr>(b.node);
  return ra.count == rb.count && ra.init_name == rb.init_name && ra.loop_var == rb.loop_var &&
         std::equal(ra.body.begin(), ra.body.end(), rb.body.begin(), rb.body.end(),
                    equal_assignment);
}

bool equal_assignment(const Assignment& a, const Assignment& b) {
  return a.target == b.target && equal_expr(a.expr, b.expr);
}

}  // namespace

bool equal(const Script& a, const Script& b) {
  if (a.statements.size() != b.statements.size()) return false;
  for (std::size_t i = 0; i < a.statements.size(); ++i) {
    const auto& sa = a.statements[i].node;
    const auto& sb = b.statements[i].node;
    if (sa.index() != sb.index()) return false;
    if (const auto* ia = std::get_if<ImportStmt>(&sa)) {
      const auto& ib = std::get<ImportStmt>(sb);
      if (ia->path != ib.path || ia->alias != ib.alias) return false;
    } else if (const auto* aa = std::get_if<Assignment>(&sa)) {
      if (!equal_assignment(*aa, std::get<Assignment>(sb))) return false;
    } else {
      const auto& ta = std::get<StoreStmt>(sa);
      const auto& tb = std::get<StoreStmt>(sb);
      if (ta.name != tb.name || ta.uri != tb.uri) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Keyword table
// ---------------------------------------------------------------------------

KeywordTable KeywordTable::builtin() {
  KeywordTable t;
  t.add("map", OperatorKind::Map);
  t.add("flatmap", OperatorKind::FlatMap);
  t.add("filter", OperatorKind::Filter);
  t.add("sample", OperatorKind::Sample);
  t.add("reduce", OperatorKind::ReduceGlobal);  // two argument groups: ReduceByKey
  t.add("groupby", OperatorKind::GroupByKey);
  t.add("join", OperatorKind::Join);
  t.add("union", OperatorKind::Union);
  t.add("distinct", OperatorKind::Distinct);
  t.add("sort", OperatorKind::Sort);
  t.add("count", OperatorKind::Count);
  t.add("cache", OperatorKind::Cache);
  return t;
}

KeywordTable KeywordTable::load(const std::string& text) {
  KeywordTable t = builtin();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string keyword, kind;
    if (!(ls >> keyword)) continue;
    if (!(ls >> kind)) {
      throw std::invalid_argument("keyword table line " + std::to_string(lineno) +
                                  ": missing operator kind");
    }
    auto k = plan::kind_from_name(kind);
    if (!k) {
      throw std::invalid_argument("keyword table line " + std::to_string(lineno) +
                                  ": unknown operator kind '" + kind + "'");
    }
    t.add(keyword, *k);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

ParseError::ParseError(int line, int col, const std::string& what)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + what),
      line(line),
      col(col) {}

namespace {

enum class Tok { Id, Number, Str, Sym, Eof };

struct Token {
  Tok kind = Tok::Eof;
  std::string text;
  Pos pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { next(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token out = tok_;
    scan();
    return out;
  }

 private:
  void scan() {
    skip_space();
    tok_.pos = {line_, col_};
    if (pos_ >= src_.size()) {
      tok_ = {Tok::Eof, "", tok_.pos};
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        id += take();
      }
      tok_ = {Tok::Id, id, tok_.pos};
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      std::string num;
      if (c == '-') num += take();
      while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '.')) {
        num += take();
      }
      tok_ = {Tok::Number, num, tok_.pos};
      return;
    }
    if (c == '\'') {
      take();
      std::string s;
      while (pos_ < src_.size() && src_[pos_] != '\'') {
        if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) take();
        s += take();
      }
      if (pos_ >= src_.size()) throw ParseError(tok_.pos.line, tok_.pos.col, "unterminated string");
      take();
      tok_ = {Tok::Str, s, tok_.pos};
      return;
    }
    // Multi-char symbols first.
    for (const char* sym : {"->", "==", "!=", "<=", ">="}) {
      if (src_.compare(pos_, 2, sym) == 0) {
        take();
        take();
        tok_ = {Tok::Sym, sym, tok_.pos};
        return;
      }
    }
    static const std::string kSingles = "=;{}()[],.<>";
    if (kSingles.find(c) != std::string::npos) {
      take();
      tok_ = {Tok::Sym, std::string(1, c), tok_.pos};
      return;
    }
    throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#' || (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-')) {
        while (pos_ < src_.size() && src_[pos_] != '\n') take();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        take();
      } else {
        break;
      }
    }
  }

  char take() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token tok_;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  Parser(const std::string& src, const KeywordTable& keywords) : lex_(src), keywords_(keywords) {}

  Script run() {
    Script script;
    while (lex_.peek().kind != Tok::Eof) {
      script.statements.push_back(statement(/*in_block=*/false));
    }
    resolve(script);
    return script;
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& expected) {
    std::string got = t.kind == Tok::Eof ? "end of input" : "'" + t.text + "'";
    throw ParseError(t.pos.line, t.pos.col, "syntax error: expected " + expected + ", got " + got);
  }

  Token expect_sym(const std::string& sym) {
    auto t = lex_.peek();
    if (t.kind != Tok::Sym || t.text != sym) fail(t, "'" + sym + "'");
    return lex_.next();
  }

  Token expect_id(const std::string& what) {
    auto t = lex_.peek();
    if (t.kind != Tok::Id) fail(t, what);
    return lex_.next();
  }

  bool at_sym(const std::string& sym) {
    return lex_.peek().kind == Tok::Sym && lex_.peek().text == sym;
  }
  bool at_id(const std::string& word) {
    return lex_.peek().kind == Tok::Id && lex_.peek().text == word;
  }

  Statement statement(bool in_block) {
    auto t = lex_.peek();
    if (t.kind != Tok::Id) fail(t, "a statement ('import', 'store' or an assignment)");
    if (t.text == "import" && !in_block) return Statement{import_stmt()};
    if (t.text == "store" && !in_block) return Statement{store_stmt()};
    return Statement{assignment()};
  }

  ImportStmt import_stmt() {
    ImportStmt st;
    st.pos = lex_.next().pos;  // import
    auto path = lex_.peek();
    if (path.kind != Tok::Str) fail(path, "a quoted import path");
    st.path = lex_.next().text;
    if (!at_id("as")) fail(lex_.peek(), "'as'");
    lex_.next();
    st.alias = expect_id("an alias name").text;
    expect_sym(";");
    return st;
  }

  StoreStmt store_stmt() {
    StoreStmt st;
    st.pos = lex_.next().pos;  // store
    st.name = expect_id("a value name").text;
    if (lex_.peek().kind == Tok::Str) st.uri = lex_.next().text;
    expect_sym(";");
    return st;
  }

  Assignment assignment() {
    Assignment a;
    auto target = expect_id("an assignment target");
    a.target = target.text;
    a.pos = target.pos;
    expect_sym("=");
    a.expr = expression();
    // Repeat blocks end at '}'; a trailing ';' is optional there.
    if (std::holds_alternative<RepeatExpr>(a.expr.node)) {
      if (at_sym(";")) lex_.next();
    } else {
      expect_sym(";");
    }
    return a;
  }

  Expr expression() {
    auto head = lex_.peek();
    if (head.kind != Tok::Id) fail(head, "an expression keyword");
    Expr e;
    e.pos = head.pos;
    if (head.text == "load") {
      e.node = load_expr();
    } else if (head.text == "repeat") {
      e.node = repeat_expr();
    } else if (keywords_.is_op_keyword(head.text)) {
      e.node = op_expr();
    } else {
      fail(head, "'load', 'repeat' or an operator keyword");
    }
    return e;
  }

  LoadExpr load_expr() {
    lex_.next();  // load
    LoadExpr load;
    if (lex_.peek().kind == Tok::Str) {
      load.uri = lex_.next().text;
    } else if (lex_.peek().kind == Tok::Id) {
      load.collection = udf_ref();
    } else {
      fail(lex_.peek(), "a quoted URI or a collection function");
    }
    load.clauses = clauses();
    return load;
  }

  RepeatExpr repeat_expr() {
    lex_.next();  // repeat
    RepeatExpr rep;
    if (lex_.peek().kind == Tok::Number) {
      rep.count = std::stoll(lex_.next().text);
    } else {
      auto init = expect_id("an iteration count or an initial value name");
      rep.init_name = init.text;
      if (!at_id("AS") && !at_id("as")) fail(lex_.peek(), "'AS'");
      lex_.next();
      rep.loop_var = expect_id("a loop variable name").text;
      if (!at_id("for")) fail(lex_.peek(), "'for'");
      lex_.next();
      auto n = lex_.peek();
      if (n.kind != Tok::Number) fail(n, "an iteration count");
      rep.count = std::stoll(lex_.next().text);
    }
    expect_sym("{");
    while (!at_sym("}")) {
      if (lex_.peek().kind == Tok::Eof) fail(lex_.peek(), "'}'");
      rep.body.push_back(std::get<Assignment>(statement(/*in_block=*/true).node));
    }
    lex_.next();  // }
    return rep;
  }

  OpExpr op_expr() {
    OpExpr op;
    op.keyword = lex_.next().text;
    op.args.push_back(arg_group());
    while (at_sym(",")) {
      lex_.next();
      op.args.push_back(arg_group());
    }
    op.clauses = clauses();
    return op;
  }

  ArgGroup arg_group() {
    ArgGroup g;
    auto name = expect_id("an input name");
    g.input = name.text;
    g.pos = name.pos;
    if (at_sym("[")) {
      lex_.next();
      auto n = lex_.peek();
      if (n.kind != Tok::Number) fail(n, "a field index");
      g.subscript = std::stoi(lex_.next().text);
      expect_sym("]");
    }
    if (at_sym("->")) {
      lex_.next();
      bool braced = at_sym("{");
      if (braced) lex_.next();
      g.udf = udf_ref();
      if (braced) expect_sym("}");
    }
    for (const char* cmp : {"==", "!=", "<=", ">=", "<", ">"}) {
      if (at_sym(cmp)) {
        g.cmp_op = lex_.next().text;
        auto lit = lex_.peek();
        if (lit.kind == Tok::Str) {
          g.cmp_literal = lex_.next().text;
          g.cmp_quoted = true;
        } else if (lit.kind == Tok::Number) {
          g.cmp_literal = lex_.next().text;
        } else {
          fail(lit, "a literal");
        }
        break;
      }
    }
    return g;
  }

  UdfRef udf_ref() {
    UdfRef ref;
    auto head = expect_id("a function name");
    ref.pos = head.pos;
    ref.name = head.text;
    while (at_sym(".")) {
      lex_.next();
      ref.name += "." + expect_id("a name after '.'").text;
    }
    expect_sym("(");
    while (!at_sym(")")) {
      auto t = lex_.peek();
      if (t.kind == Tok::Str) {
        ref.args.push_back(lex_.next().text);
        ref.arg_quoted.push_back(true);
      } else if (t.kind == Tok::Number || t.kind == Tok::Id) {
        ref.args.push_back(lex_.next().text);
        ref.arg_quoted.push_back(false);
      } else {
        fail(t, "an argument or ')'");
      }
      if (at_sym(",")) {
        lex_.next();
      } else if (!at_sym(")")) {
        fail(lex_.peek(), "',' or ')'");
      }
    }
    lex_.next();  // )
    return ref;
  }

  std::vector<Clause> clauses() {
    std::vector<Clause> out;
    while (true) {
      if (at_id("with")) {
        auto pos = lex_.next().pos;
        if (at_id("broadcast")) {
          lex_.next();
          out.push_back({Clause::Broadcast, expect_id("a broadcast name").text, 0, pos});
        } else if (at_id("platform")) {
          lex_.next();
          auto t = lex_.peek();
          if (t.kind != Tok::Str) fail(t, "a quoted platform name");
          out.push_back({Clause::Platform, lex_.next().text, 0, pos});
        } else {
          fail(lex_.peek(), "'broadcast' or 'platform'");
        }
      } else if (at_id("delimiter")) {
        auto pos = lex_.next().pos;
        auto t = lex_.peek();
        if (t.kind != Tok::Str) fail(t, "a quoted delimiter");
        out.push_back({Clause::Delimiter, lex_.next().text, 0, pos});
      } else if (at_id("for") ) {
        auto pos = lex_.next().pos;
        auto t = lex_.peek();
        if (t.kind != Tok::Number) fail(t, "an integer");
        out.push_back({Clause::For, "", std::stoll(lex_.next().text), pos});
      } else {
        break;
      }
    }
    return out;
  }

  // Single-assignment, forward-only references; repeat rebinding rules.
  void resolve(const Script& script) {
    std::set<std::string> defined;
    for (const auto& st : script.statements) {
      if (const auto* imp = std::get_if<ImportStmt>(&st.node)) {
        (void)imp;
      } else if (const auto* a = std::get_if<Assignment>(&st.node)) {
        resolve_assignment(*a, defined, /*in_block=*/false);
      } else {
        const auto& store = std::get<StoreStmt>(st.node);
        if (!defined.count(store.name)) {
          throw ParseError(store.pos.line, store.pos.col,
                           "undefined name '" + store.name + "'");
        }
      }
    }
  }

  void resolve_assignment(const Assignment& a, std::set<std::string>& defined, bool in_block) {
    if (const auto* load = std::get_if<LoadExpr>(&a.expr.node)) {
      (void)load;
    } else if (const auto* op = std::get_if<OpExpr>(&a.expr.node)) {
      for (const auto& g : op->args) {
        if (!defined.count(g.input)) {
          throw ParseError(g.pos.line, g.pos.col, "undefined name '" + g.input + "'");
        }
      }
      for (const auto& c : op->clauses) {
        if (c.kind == Clause::Broadcast && !defined.count(c.text)) {
          throw ParseError(c.pos.line, c.pos.col, "undefined name '" + c.text + "'");
        }
      }
    } else {
      const auto& rep = std::get<RepeatExpr>(a.expr.node);
      if (rep.init_name && !defined.count(*rep.init_name)) {
        throw ParseError(a.pos.line, a.pos.col, "undefined name '" + *rep.init_name + "'");
      }
      std::set<std::string> inner = defined;
      if (rep.loop_var) inner.insert(*rep.loop_var);
      int rebinds = 0;
      for (const auto& ia : rep.body) {
        bool rebinding = defined.count(ia.target) != 0;
        if (rebinding) ++rebinds;
        resolve_assignment(ia, inner, /*in_block=*/true);
        if (!rebinding && inner.count(ia.target)) {
          throw ParseError(ia.pos.line, ia.pos.col,
                           "name '" + ia.target + "' assigned more than once");
        }
        inner.insert(ia.target);
      }
      if (rep.body.empty()) {
        throw ParseError(a.pos.line, a.pos.col, "empty repeat block");
      }
      if (!rep.loop_var && rebinds != 1) {
        throw ParseError(a.pos.line, a.pos.col,
                         "repeat block must rebind exactly one outer name (found " +
                             std::to_string(rebinds) + ")");
      }
      if (rep.loop_var && rebinds != 0) {
        throw ParseError(a.pos.line, a.pos.col,
                         "repeat ... AS block must not rebind outer names");
      }
      for (const auto& n : inner) defined.insert(n);
      defined.erase(a.target);  // re-added below by caller logic
    }
    if (defined.count(a.target) && !in_block) {
      throw ParseError(a.pos.line, a.pos.col, "name '" + a.target + "' assigned more than once");
    }
    defined.insert(a.target);
  }

  Lexer lex_;
  const KeywordTable& keywords_;
};

}  // namespace

Script parse(const std::string& source, const KeywordTable& keywords) {
  return Parser(source, keywords).run();
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

void print_udf(std::string& out, const UdfRef& udf) {
  out += udf.name + "(";
  for (std::size_t i = 0; i < udf.args.size(); ++i) {
    if (i) out += ", ";
    out += udf.arg_quoted[i] ? quote(udf.args[i]) : udf.args[i];
  }
  out += ")";
}

void print_clauses(std::string& out, const std::vector<Clause>& clauses) {
  for (const auto& c : clauses) {
    switch (c.kind) {
      case Clause::Broadcast:
        out += " with broadcast " + c.text;
        break;
      case Clause::Platform:
        out += " with platform " + quote(c.text);
        break;
      case Clause::Delimiter:
        out += " delimiter " + quote(c.text);
        break;
      case Clause::For:
        out += " for " + std::to_string(c.number);
        break;
    }
  }
}

void print_assignment(std::string& out, const Assignment& a, int indent);

void print_expr(std::string& out, const Expr& e, int indent) {
  if (const auto* load = std::get_if<LoadExpr>(&e.node)) {
    out += "load ";
    if (load->uri) {
      out += quote(*load->uri);
    } else {
      print_udf(out, *load->collection);
    }
    print_clauses(out, load->clauses);
    return;
  }
  if (const auto* op = std::get_if<OpExpr>(&e.node)) {
    out += op->keyword + " ";
    for (std::size_t i = 0; i < op->args.size(); ++i) {
      if (i) out += ", ";
      const auto& g = op->args[i];
      out += g.input;
      if (g.subscript) out += "[" + std::to_string(*g.subscript) + "]";
      if (g.udf) {
        out += " -> {";
        print_udf(out, *g.udf);
        out += "}";
      }
      if (g.cmp_op) {
        out += " " + *g.cmp_op + " " + (g.cmp_quoted ? quote(*g.cmp_literal) : *g.cmp_literal);
      }
    }
    print_clauses(out, op->clauses);
    return;
  }
  const auto& rep = std::get<RepeatExpr>(e.node);
  out += "repeat ";
  if (rep.init_name) {
    out += *rep.init_name + " AS " + *rep.loop_var + " for " + std::to_string(rep.count);
  } else {
    out += std::to_string(rep.count);
  }
  out += " {\n";
  for (const auto& ia : rep.body) print_assignment(out, ia, indent + 1);
  out.append(static_cast<std::size_t>(indent) * 2, ' ');
  out += "}";
}

void print_assignment(std::string& out, const Assignment& a, int indent) {
  out.append(static_cast<std::size_t>(indent) * 2, ' ');
  out += a.target + " = ";
  print_expr(out, a.expr, indent);
  if (!std::holds_alternative<RepeatExpr>(a.expr.node)) {
    out += ";";
  }
  out += "\n";
}

}  // namespace

std::string print(const Script& script) {
  std::string out;
  for (const auto& st : script.statements) {
    if (const auto* imp = std::get_if<ImportStmt>(&st.node)) {
      out += "import " + quote(imp->path) + " as " + imp->alias + ";\n";
    } else if (const auto* a = std::get_if<Assignment>(&st.node)) {
      print_assignment(out, *a, 0);
    } else {
      const auto& store = std::get<StoreStmt>(st.node);
      out += "store " + store.name;
      if (store.uri) out += " " + quote(*store.uri);
      out += ";\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

namespace {

struct ValueRef {
  std::string op;
  int port = 0;
};

class Lowerer {
 public:
  Lowerer(const LowerContext& ctx, const KeywordTable& keywords) : ctx_(ctx), keywords_(keywords) {}

  plan::LogicalPlan run(const Script& script) {
    for (const auto& st : script.statements) {
      if (std::holds_alternative<ImportStmt>(st.node)) continue;
      if (const auto* a = std::get_if<Assignment>(&st.node)) {
        lower_assignment(*a, /*rebind_of=*/nullptr);
      } else {
        lower_store(std::get<StoreStmt>(st.node));
      }
    }
    auto violations = validate_plan(plan_);
    if (!violations.empty()) {
      throw LowerError("lowered plan is invalid: " + violations.front());
    }
    return std::move(plan_);
  }

 private:
  std::string canonical_call(const UdfRef& ref) const {
    std::string s = ref.name + "(";
    for (std::size_t i = 0; i < ref.args.size(); ++i) {
      if (i) s += ",";
      s += ref.arg_quoted[i] ? quote(ref.args[i]) : ref.args[i];
    }
    return s + ")";
  }

  plan::UdfSpec make_udf(const UdfRef& ref) {
    plan::UdfSpec spec;
    spec.name = canonical_call(ref);
    if (ctx_.udf_resolves && !ctx_.udf_resolves(spec.name)) {
      throw LowerError("unresolvable UDF '" + spec.name + "' at " + std::to_string(ref.pos.line) +
                       ":" + std::to_string(ref.pos.col));
    }
    return spec;
  }

  plan::UdfSpec group_key_udf(const ArgGroup& g) {
    if (g.udf) return make_udf(*g.udf);
    if (g.subscript) return plan::UdfSpec{"@field(" + std::to_string(*g.subscript) + ")"};
    return plan::UdfSpec{"@identity()"};
  }

  void apply_selectivity(plan::LogicalOperator& op) {
    op.selectivity = plan::default_selectivity(op.kind);
    if (op.udf && ctx_.udf_selectivity) {
      if (auto sel = ctx_.udf_selectivity(op.udf->name)) op.selectivity = *sel;
    }
  }

  void apply_clauses(plan::LogicalOperator& op, const std::vector<Clause>& clauses,
                     std::vector<std::string>* broadcasts) {
    for (const auto& c : clauses) {
      switch (c.kind) {
        case Clause::Platform:
          if (!ctx_.backends.empty() && !ctx_.backends.count(c.text)) {
            throw LowerError("platform '" + c.text + "' is not registered");
          }
          op.platform_constraint = c.text;
          break;
        case Clause::Delimiter:
          op.attrs["delimiter"] = c.text;
          break;
        case Clause::Broadcast:
          broadcasts->push_back(c.text);
          break;
        case Clause::For:
          op.attrs["sampleSize"] = std::to_string(c.number);
          break;
      }
    }
  }

  ValueRef ref_of(const std::string& name, const Pos& pos) {
    auto it = env_.find(name);
    if (it == env_.end()) {
      throw LowerError("undefined name '" + name + "' at " + std::to_string(pos.line) + ":" +
                       std::to_string(pos.col));
    }
    return it->second;
  }

  void lower_store(const StoreStmt& store) {
    plan::LogicalOperator op;
    op.id = unique_id("store_" + store.name);
    if (store.uri) {
      op.kind = OperatorKind::TextFileSink;
      op.attrs["uri"] = *store.uri;
    } else {
      op.kind = OperatorKind::CollectSink;
    }
    auto src = ref_of(store.name, store.pos);
    plan_.add(op);
    plan_.connect(src.op, src.port, op.id, 0);
  }

  void lower_assignment(const Assignment& a, const std::string* rebind_of) {
    if (const auto* rep = std::get_if<RepeatExpr>(&a.expr.node)) {
      lower_repeat(a, *rep);
      return;
    }

    plan::LogicalOperator op;
    op.id = rebind_of && plan_.has(a.target) ? unique_id(a.target + "__next")
                                             : unique_id(a.target);
    std::vector<std::string> broadcasts;

    if (const auto* load = std::get_if<LoadExpr>(&a.expr.node)) {
      if (load->uri) {
        const auto& uri = *load->uri;
        auto colon = uri.find(':');
        std::string scheme = colon == std::string::npos ? "file" : uri.substr(0, colon);
        if (scheme == "file" || scheme == "hdfs") {
          op.kind = OperatorKind::TextFileSource;
          op.attrs["uri"] = uri;
        } else if (scheme == "postgres") {
          op.kind = OperatorKind::TableSource;
          op.attrs["table"] = uri;
        } else {
          throw LowerError("unknown URI scheme '" + scheme + "' in load");
        }
      } else {
        op.kind = OperatorKind::CollectionSource;
        auto spec = make_udf(*load->collection);
        op.attrs["collection"] = spec.name;
      }
      apply_clauses(op, load->clauses, &broadcasts);
      if (!broadcasts.empty()) throw LowerError("load does not take broadcasts");
      plan_.add(op);
      env_[a.target] = {op.id, 0};
      if (rebind_of) rebind_source_[*rebind_of] = {op.id, 0};
      return;
    }

    const auto& oe = std::get<OpExpr>(a.expr.node);
    op.kind = keywords_.kind_of(oe.keyword);
    if (op.kind == OperatorKind::ReduceGlobal && oe.args.size() == 2) {
      op.kind = OperatorKind::ReduceByKey;
    }

    switch (op.kind) {
      case OperatorKind::Map:
      case OperatorKind::FlatMap: {
        const auto& g = oe.args.at(0);
        if (g.udf) {
          op.udf = make_udf(*g.udf);
        } else if (g.subscript) {
          op.udf = plan::UdfSpec{"@field(" + std::to_string(*g.subscript) + ")"};
        } else {
          throw LowerError(oe.keyword + " needs a UDF or a field subscript");
        }
        break;
      }
      case OperatorKind::Filter: {
        const auto& g = oe.args.at(0);
        if (g.cmp_op) {
          int field = g.subscript.value_or(0);
          op.udf = plan::UdfSpec{"@pred(" + std::to_string(field) + "," + *g.cmp_op + "," +
                                 (g.cmp_quoted ? quote(*g.cmp_literal) : *g.cmp_literal) + ")"};
        } else if (g.udf) {
          op.udf = make_udf(*g.udf);
        } else {
          throw LowerError("filter needs a predicate UDF or a comparison");
        }
        break;
      }
      case OperatorKind::Sample: {
        const auto& g = oe.args.at(0);
        if (g.udf) {
          // The sample configuration function may carry the sample size as
          // its first integer argument.
          for (std::size_t i = 0; i < g.udf->args.size(); ++i) {
            if (!g.udf->arg_quoted[i] && !g.udf->args[i].empty() &&
                g.udf->args[i].find('.') == std::string::npos) {
              op.attrs["sampleSize"] = g.udf->args[i];
              break;
            }
          }
        }
        if (!op.attrs.count("sampleSize")) op.attrs["sampleSize"] = "10";
        break;
      }
      case OperatorKind::ReduceGlobal: {
        const auto& g = oe.args.at(0);
        if (!g.udf) throw LowerError("reduce needs a UDF");
        op.udf = make_udf(*g.udf);
        break;
      }
      case OperatorKind::ReduceByKey: {
        if (oe.args[0].input != oe.args[1].input) {
          throw LowerError("reduce key and reducer must read the same input");
        }
        op.udf2 = group_key_udf(oe.args[0]);
        if (!oe.args[1].udf) throw LowerError("reduce needs a reducer UDF");
        op.udf = make_udf(*oe.args[1].udf);
        break;
      }
      case OperatorKind::GroupByKey:
      case OperatorKind::Sort: {
        op.udf2 = group_key_udf(oe.args.at(0));
        break;
      }
      case OperatorKind::Join: {
        if (oe.args.size() != 2) throw LowerError("join takes exactly two inputs");
        op.udf = group_key_udf(oe.args[0]);
        op.udf2 = group_key_udf(oe.args[1]);
        break;
      }
      case OperatorKind::Union: {
        if (oe.args.size() != 2) throw LowerError("union takes exactly two inputs");
        break;
      }
      case OperatorKind::Distinct:
      case OperatorKind::Count:
      case OperatorKind::Cache:
        break;
      default:
        throw LowerError("keyword '" + oe.keyword + "' lowers to unsupported kind");
    }

    apply_selectivity(op);
    apply_clauses(op, oe.clauses, &broadcasts);
    for (const auto& b : broadcasts) op.broadcast_ports.push_back(b);
    plan_.add(op);

    int next_port = 0;
    std::set<std::string> connected;
    for (const auto& g : oe.args) {
      if (connected.count(g.input)) continue;  // two-group reduce reads once
      connected.insert(g.input);
      auto src = ref_of(g.input, g.pos);
      plan_.connect(src.op, src.port, op.id, next_port++);
    }
    for (const auto& b : broadcasts) {
      auto src = ref_of(b, a.pos);
      plan_.broadcast(src.op, src.port, op.id, b);
    }
    env_[a.target] = {op.id, 0};
    if (rebind_of) rebind_source_[*rebind_of] = {op.id, 0};
  }

  void lower_repeat(const Assignment& a, const RepeatExpr& rep) {
    plan::LogicalOperator loop;
    loop.id = unique_id(a.target);
    loop.kind = OperatorKind::RepeatLoop;
    loop.attrs["iterations"] = std::to_string(rep.count);
    plan_.add(loop);

    std::string loop_var = rep.loop_var.value_or("");
    ValueRef initial;
    if (rep.init_name) {
      initial = ref_of(*rep.init_name, a.pos);
    } else {
      // N-form: the rebinding target names the loop variable.
      for (const auto& ia : rep.body) {
        if (env_.count(ia.target)) {
          loop_var = ia.target;
          break;
        }
      }
      if (loop_var.empty()) throw LowerError("repeat block must rebind an outer name");
      initial = env_.at(loop_var);
    }
    plan_.connect(initial.op, initial.port, loop.id, 0);

    auto saved = env_.count(loop_var) ? std::optional<ValueRef>(env_[loop_var]) : std::nullopt;
    env_[loop_var] = {loop.id, 0};

    rebind_source_.erase(loop.id);
    for (std::size_t i = 0; i < rep.body.size(); ++i) {
      const auto& ia = rep.body[i];
      bool rebinding = !rep.init_name ? ia.target == loop_var : i + 1 == rep.body.size();
      std::string key = loop.id;
      lower_assignment(ia, rebinding ? &key : nullptr);
    }
    auto fb = rebind_source_.find(loop.id);
    if (fb == rebind_source_.end()) throw LowerError("repeat block produced no feedback value");
    plan_.connect(fb->second.op, fb->second.port, loop.id, 1, /*feedback=*/true);

    if (saved) {
      env_[loop_var] = *saved;
    } else if (!loop_var.empty() && rep.init_name) {
      env_.erase(loop_var);
    }
    env_[a.target] = {loop.id, 1};
  }

  std::string unique_id(const std::string& base) {
    if (!plan_.has(base)) return base;
    int i = 2;
    while (plan_.has(base + "_" + std::to_string(i))) ++i;
    return base + "_" + std::to_string(i);
  }

  const LowerContext& ctx_;
  const KeywordTable& keywords_;
  plan::LogicalPlan plan_;
  std::map<std::string, ValueRef> env_;
  std::map<std::string, ValueRef> rebind_source_;  // loop id -> feedback value
};

}  // namespace

plan::LogicalPlan lower(const Script& script, const LowerContext& ctx,
                        const KeywordTable& keywords) {
  return Lowerer(ctx, keywords).run(script);
}

}  // namespace xplan::dsl
