#include "veritab/program.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "json.hpp"
#include "veritab/errors.hpp"
#include "veritab/table.hpp"

using nlohmann::json;

namespace veritab {

namespace {

std::vector<Operator> build_registry() {
  using A = ArgKind;
  using V = ValueKind;
  using F = Family;
  std::vector<Operator> ops;
  auto def = [&](std::string name, std::vector<A> args, V result, F family, bool dyn = false) {
    ops.push_back(Operator{std::move(name), std::move(args), result, dyn, family});
  };

  def("count", {A::View}, V::Number, F::aggregate);
  def("with", {A::View, A::Column, A::Cell}, V::Bool, F::filter);
  def("without", {A::View, A::Column, A::Cell}, V::Bool, F::filter);
  def("none", {A::Text}, V::Bool, F::compare);
  def("before", {A::Row, A::Row}, V::Bool, F::positional);
  def("after", {A::Row, A::Row}, V::Bool, F::positional);
  def("first", {A::View, A::Row}, V::Bool, F::positional);
  def("second", {A::View, A::Row}, V::Bool, F::positional);
  def("third", {A::View, A::Row}, V::Bool, F::positional);
  def("fourth", {A::View, A::Row}, V::Bool, F::positional);
  def("only", {A::View}, V::Bool, F::positional);
  def("several", {A::View}, V::Bool, F::positional);
  def("zero", {A::Number}, V::Bool, F::compare);
  def("avg", {A::View, A::Column}, V::Number, F::aggregate);
  def("sum", {A::View, A::Column}, V::Number, F::aggregate);
  def("max", {A::View, A::Column}, V::Number, F::aggregate);
  def("min", {A::View, A::Column}, V::Number, F::aggregate);
  def("argmax", {A::View, A::Column}, V::Row, F::superlative);
  def("argmin", {A::View, A::Column}, V::Row, F::superlative);
  def("hop", {A::RowOrView, A::Column}, V::Text, F::hop, /*dyn=*/true);
  def("num_hop", {A::RowOrView, A::Column}, V::Number, F::hop);
  def("diff", {A::Number, A::Number}, V::Number, F::arithmetic);
  def("add", {A::Number, A::Number}, V::Number, F::arithmetic);
  def("greater", {A::Number, A::Number}, V::Bool, F::compare);
  def("less", {A::Number, A::Number}, V::Bool, F::compare);
  def("equal", {A::Scalar, A::Scalar}, V::Bool, F::compare);
  def("unequal", {A::Scalar, A::Scalar}, V::Bool, F::compare);
  def("and", {A::Bool, A::Bool}, V::Bool, F::boolean_op);
  def("or", {A::Bool, A::Bool}, V::Bool, F::boolean_op);
  def("filter_eq", {A::View, A::Column, A::Cell}, V::View, F::filter);
  def("filter_greater", {A::View, A::Column, A::Number}, V::View, F::filter);
  def("filter_less", {A::View, A::Column, A::Number}, V::View, F::filter);
  def("filter_greater_or_equal", {A::View, A::Column, A::Number}, V::View, F::filter);
  def("filter_less_or_equal", {A::View, A::Column, A::Number}, V::View, F::filter);
  def("all_eq", {A::View, A::Column, A::Cell}, V::Bool, F::filter);
  def("all_greater", {A::View, A::Column, A::Number}, V::Bool, F::filter);
  def("all_less", {A::View, A::Column, A::Number}, V::Bool, F::filter);
  def("all_greater_or_equal", {A::View, A::Column, A::Number}, V::Bool, F::filter);
  def("all_less_or_equal", {A::View, A::Column, A::Number}, V::Bool, F::filter);
  def("uniq_num", {A::View, A::Column}, V::Number, F::aggregate);
  def("uniq_string", {A::View, A::Column}, V::Number, F::aggregate);
  def("most_freq", {A::View, A::Column}, V::Text, F::aggregate, /*dyn=*/true);
  def("half", {A::Number}, V::Number, F::arithmetic);
  def("one_third", {A::Number}, V::Number, F::arithmetic);
  return ops;
}

const std::map<std::string, std::string>& alias_map() {
  static const std::map<std::string, std::string> aliases = {{"eq", "equal"}};
  return aliases;
}

}  // namespace

const std::vector<Operator>& operator_registry() {
  static const std::vector<Operator> registry = build_registry();
  return registry;
}

const Operator* find_operator(std::string_view name) {
  std::string n(name);
  auto alias = alias_map().find(n);
  if (alias != alias_map().end()) n = alias->second;
  for (const auto& op : operator_registry())
    if (op.name == n) return &op;
  return nullptr;
}

const char* family_name(Family f) {
  switch (f) {
    case Family::aggregate: return "aggregate";
    case Family::filter: return "filter";
    case Family::compare: return "compare";
    case Family::boolean_op: return "boolean";
    case Family::positional: return "positional";
    case Family::arithmetic: return "arithmetic";
    case Family::hop: return "hop";
    case Family::superlative: return "superlative";
  }
  return "?";
}

NodePtr make_literal(Literal lit) {
  auto n = std::make_shared<Node>();
  n->lit = std::move(lit);
  return n;
}

NodePtr make_operation(const Operator* op, std::vector<NodePtr> children) {
  if (children.size() != op->args.size())
    fail(Err::ArityMismatch, op->name + " takes " + std::to_string(op->args.size()) +
                                 " arguments, got " + std::to_string(children.size()));
  auto n = std::make_shared<Node>();
  n->op = op;
  // Bind text literals in column slots to ColumnRef.
  for (size_t i = 0; i < children.size(); ++i) {
    if (op->args[i] == ArgKind::Column && children[i]->is_literal() &&
        children[i]->lit.kind == Literal::Kind::TextLit) {
      Literal col = children[i]->lit;
      col.kind = Literal::Kind::ColumnRef;
      children[i] = make_literal(std::move(col));
    }
  }
  n->children = std::move(children);
  return n;
}

int Program::op_count() const {
  int count = 0;
  auto walk = [&](auto&& self, const NodePtr& n) -> void {
    if (!n || n->is_literal()) return;
    ++count;
    for (const auto& c : n->children) self(self, c);
  };
  walk(walk, root);
  return count;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Parser {
  const std::string& src;
  size_t pos = 0;

  [[noreturn]] void err(const std::string& msg) const {
    fail(Err::SyntaxError, msg + " at offset " + std::to_string(pos));
  }

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }

  bool at_end() {
    skip_ws();
    return pos >= src.size();
  }

  Literal classify(std::string raw) {
    std::string norm = normalize(raw);
    Literal lit;
    if (norm == "all_rows" || norm == "all_row") {
      lit.kind = Literal::Kind::AllRows;
      lit.text = "all_rows";
      return lit;
    }
    if (auto num = parse_number(norm)) {
      lit.kind = Literal::Kind::NumberLit;
      lit.number = *num;
      lit.text = format_number(*num);
      return lit;
    }
    lit.kind = Literal::Kind::TextLit;
    lit.text = std::move(norm);
    return lit;
  }

  NodePtr parse_arg() {
    skip_ws();
    if (pos >= src.size()) err("unexpected end of input");
    if (src[pos] == '"') return parse_quoted();
    // Scan ahead: a '{' before any ';' or '}' means this is an operation.
    size_t scan = pos;
    while (scan < src.size() && src[scan] != '{' && src[scan] != ';' && src[scan] != '}') ++scan;
    if (scan < src.size() && src[scan] == '{') return parse_op();
    std::string raw = src.substr(pos, scan - pos);
    pos = scan;
    std::string trimmed = normalize(raw);
    if (trimmed.empty()) err("empty argument");
    return make_literal(classify(std::move(raw)));
  }

  NodePtr parse_quoted() {
    ++pos;  // opening quote
    std::string content;
    while (pos < src.size() && src[pos] != '"') content.push_back(src[pos++]);
    if (pos >= src.size()) err("unterminated string");
    ++pos;  // closing quote
    Literal lit;
    lit.kind = Literal::Kind::TextLit;
    lit.text = normalize(content);
    return make_literal(std::move(lit));
  }

  NodePtr parse_op() {
    skip_ws();
    size_t brace = src.find('{', pos);
    if (brace == std::string::npos) err("expected '{'");
    std::string name = normalize(src.substr(pos, brace - pos));
    if (name.empty()) err("missing operator name");
    const Operator* op = find_operator(name);
    if (!op) fail(Err::UnknownOperator, "'" + name + "'");
    pos = brace + 1;
    std::vector<NodePtr> children;
    while (true) {
      children.push_back(parse_arg());
      skip_ws();
      if (pos >= src.size()) err("expected ';' or '}'");
      if (src[pos] == ';') {
        ++pos;
        continue;
      }
      if (src[pos] == '}') {
        ++pos;
        break;
      }
      err("expected ';' or '}'");
    }
    return make_operation(op, std::move(children));
  }
};

}  // namespace

Program parse_program(const std::string& text) {
  Parser parser{text};
  parser.skip_ws();
  NodePtr root = parser.parse_op();
  if (!parser.at_end()) parser.err("trailing input");
  Program p;
  p.root = std::move(root);
  type_check(p);
  return p;
}

std::string print_node(const NodePtr& n) {
  if (n->is_literal()) {
    switch (n->lit.kind) {
      case Literal::Kind::AllRows: return "all_rows";
      case Literal::Kind::NumberLit: return format_number(n->lit.number);
      case Literal::Kind::ColumnRef:
      case Literal::Kind::TextLit: return "\"" + n->lit.text + "\"";
    }
  }
  std::string out = n->op->name + " {";
  for (size_t i = 0; i < n->children.size(); ++i) {
    out += i == 0 ? " " : " ; ";
    out += print_node(n->children[i]);
  }
  out += " }";
  return out;
}

std::string print_program(const Program& p) { return print_node(p.root); }

// ---------------------------------------------------------------------------
// Static typing

ValueKind static_kind(const NodePtr& n) {
  if (!n->is_literal()) return n->op->result;
  switch (n->lit.kind) {
    case Literal::Kind::AllRows: return ValueKind::View;
    case Literal::Kind::NumberLit: return ValueKind::Number;
    case Literal::Kind::ColumnRef:
    case Literal::Kind::TextLit: return ValueKind::Text;
  }
  return ValueKind::Text;
}

namespace {

bool is_dynamic_scalar(const NodePtr& n) { return !n->is_literal() && n->op->dynamic_scalar; }

[[noreturn]] void type_err(const std::string& path, const std::string& msg) {
  fail(Err::TypeMismatch, "at " + path + ": " + msg);
}

void check_node(const NodePtr& n, const std::string& path) {
  if (n->is_literal()) return;
  const Operator& op = *n->op;
  // Resolve equal/unequal overloads: both sides must agree on Number vs Text
  // unless one side is a dynamic-scalar operation.
  if (op.args.size() == 2 && op.args[0] == ArgKind::Scalar) {
    auto side = [&](const NodePtr& c, const std::string& p) -> int {
      ValueKind k = static_kind(c);
      if (is_dynamic_scalar(c)) return 2;  // wildcard
      if (k == ValueKind::Number) return 0;
      if (k == ValueKind::Text) {
        if (!c->is_literal() || c->lit.kind == Literal::Kind::TextLit) return 1;
        type_err(p, "column name is not a comparable value");
      }
      type_err(p, op.name + " compares numbers or strings");
    };
    int a = side(n->children[0], path + ".args[0]");
    int b = side(n->children[1], path + ".args[1]");
    if (a != 2 && b != 2 && a != b)
      type_err(path, op.name + " requires both sides to be numbers or both strings");
  } else {
    for (size_t i = 0; i < op.args.size(); ++i) {
      const NodePtr& c = n->children[i];
      const std::string cpath = path + ".args[" + std::to_string(i) + "]";
      ValueKind k = static_kind(c);
      bool lit = c->is_literal();
      switch (op.args[i]) {
        case ArgKind::Column:
          if (!lit || c->lit.kind != Literal::Kind::ColumnRef)
            type_err(cpath, op.name + " argument " + std::to_string(i + 1) +
                                " must be a column name");
          break;
        case ArgKind::View:
          if (k != ValueKind::View) type_err(cpath, "expected a view");
          break;
        case ArgKind::Row:
          if (k != ValueKind::Row) type_err(cpath, "expected a row");
          break;
        case ArgKind::RowOrView:
          if (k != ValueKind::Row && k != ValueKind::View)
            type_err(cpath, "expected a row or a view");
          break;
        case ArgKind::Bool:
          if (k != ValueKind::Bool) type_err(cpath, "expected a boolean");
          break;
        case ArgKind::Number:
          if (!(k == ValueKind::Number || is_dynamic_scalar(c)))
            type_err(cpath, "expected a number");
          if (lit && c->lit.kind == Literal::Kind::ColumnRef)
            type_err(cpath, "expected a number, got a column name");
          break;
        case ArgKind::Text:
          if (!(k == ValueKind::Text || is_dynamic_scalar(c)))
            type_err(cpath, "expected a string");
          break;
        case ArgKind::Cell:
          if (!(k == ValueKind::Number || k == ValueKind::Text || is_dynamic_scalar(c)))
            type_err(cpath, "expected a cell value (string or number)");
          break;
        case ArgKind::Scalar:
          break;  // handled above
      }
    }
  }
  for (size_t i = 0; i < n->children.size(); ++i)
    check_node(n->children[i], path + ".args[" + std::to_string(i) + "]");
}

}  // namespace

void type_check(const Program& p) {
  if (!p.root || p.root->is_literal())
    fail(Err::TypeMismatch, "program root must be an operation");
  check_node(p.root, "$");
}

// ---------------------------------------------------------------------------
// JSON form

namespace {

json node_to_json(const NodePtr& n) {
  if (n->is_literal()) {
    switch (n->lit.kind) {
      case Literal::Kind::AllRows: return json("all_rows");
      case Literal::Kind::NumberLit: return json(n->lit.number);
      case Literal::Kind::ColumnRef:
      case Literal::Kind::TextLit: return json(n->lit.text);
    }
  }
  json j;
  j["op"] = n->op->name;
  json args = json::array();
  for (const auto& c : n->children) args.push_back(node_to_json(c));
  j["args"] = std::move(args);
  return j;
}

NodePtr node_from_json(const json& j) {
  if (j.is_object()) {
    const Operator* op = find_operator(j.at("op").get<std::string>());
    if (!op) fail(Err::UnknownOperator, j.at("op").get<std::string>());
    std::vector<NodePtr> children;
    for (const auto& a : j.at("args")) children.push_back(node_from_json(a));
    return make_operation(op, std::move(children));
  }
  Literal lit;
  if (j.is_number()) {
    lit.kind = Literal::Kind::NumberLit;
    lit.number = j.get<double>();
    lit.text = format_number(lit.number);
  } else if (j.is_string()) {
    std::string s = normalize(j.get<std::string>());
    if (s == "all_rows" || s == "all_row") {
      lit.kind = Literal::Kind::AllRows;
      lit.text = "all_rows";
    } else {
      lit.kind = Literal::Kind::TextLit;
      lit.text = std::move(s);
    }
  } else {
    fail(Err::BadFormat, "literal must be a string or number: " + j.dump());
  }
  return make_literal(std::move(lit));
}

}  // namespace

std::string program_to_json(const Program& p) { return node_to_json(p.root).dump(); }

Program program_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Err::BadFormat, e.what());
  }
  Program p;
  p.root = node_from_json(j);
  type_check(p);
  return p;
}

}  // namespace veritab
