#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace veritab {

// Runtime value kinds produced by execution.
enum class ValueKind { Number, Text, Bool, Row, View };

// Declared argument slots are richer than runtime kinds: Column requires a
// column-name literal, Cell admits text or number, RowOrView covers the
// single-row lookups that also accept a view.
enum class ArgKind { Number, Text, Bool, Row, View, Column, Cell, Scalar, RowOrView };

enum class Family { aggregate, filter, compare, boolean_op, positional, arithmetic, hop, superlative };

struct Operator {
  std::string name;
  std::vector<ArgKind> args;
  ValueKind result;
  // hop and most_freq yield Number or Text depending on the cell they land on.
  bool dynamic_scalar = false;
  Family family;
};

// The fixed operation set. Names are unique; lookup resolves the aliases
// "eq" -> "equal" and "all_row" -> "all_rows" handled by the parser.
const std::vector<Operator>& operator_registry();
const Operator* find_operator(std::string_view name);
const char* family_name(Family f);

struct Literal {
  enum class Kind { ColumnRef, TextLit, NumberLit, AllRows };
  Kind kind = Kind::TextLit;
  std::string text;    // ColumnRef: normalized header; TextLit: normalized text
  double number = 0;   // NumberLit only
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

// One tree node: either an operation (op != nullptr, children per slot) or a
// leaf literal. Trees are immutable after construction and freely shared.
struct Node {
  const Operator* op = nullptr;
  Literal lit;
  std::vector<NodePtr> children;

  bool is_literal() const { return op == nullptr; }
};

NodePtr make_literal(Literal lit);
NodePtr make_operation(const Operator* op, std::vector<NodePtr> children);

struct Program {
  NodePtr root;
  std::string source_statement;  // optional provenance

  // Number of operation nodes (M).
  int op_count() const;
};

// Grammar: op ::= NAME '{' arg (';' arg)* '}'
//          arg ::= op | 'all_rows' | quoted string | number | bare name
// Column slots bind their literals to ColumnRef with normalized payload.
Program parse_program(const std::string& text);

// Canonical single-line text; parse(print(p)) reproduces the tree. Text and
// column literals are always quoted, numbers use shortest round-trip form.
std::string print_program(const Program& p);
std::string print_node(const NodePtr& n);

// Throws Error(TypeMismatch/ArityMismatch/...) naming the offending node path.
void type_check(const Program& p);

// Static kind of a node as seen by its parent slot (literals map to their
// kinds, operations to their declared result kind).
ValueKind static_kind(const NodePtr& n);

// Nested JSON form {op, args:[...]} with literals as strings / numbers.
std::string program_to_json(const Program& p);
Program program_from_json(const std::string& text);

}  // namespace veritab
