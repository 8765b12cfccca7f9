#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "veritab/program.hpp"
#include "veritab/table.hpp"

namespace veritab {

// Numeric comparison tolerance used throughout execution.
constexpr double kNumEps = 1e-6;
bool num_eq(double a, double b);

// Runtime result of evaluating one node. Text carries the raw cell string;
// comparisons normalize on the fly. View indices are strictly increasing.
struct Value {
  ValueKind kind = ValueKind::Bool;
  double num = 0;
  std::string text;
  bool truth = false;
  int row = -1;
  std::vector<int> view;

  static Value number(double v);
  static Value string(std::string s);
  static Value boolean(bool b);
  static Value row_ref(int r);
  static Value view_of(std::vector<int> rows);

  std::string describe() const;  // short human-readable form for CLI output
};

bool value_equal(const Value& a, const Value& b);  // Number compared with kNumEps

struct TraceRecord {
  std::vector<int> path;     // child indices from the root
  std::string op;
  std::vector<Value> args;   // resolved argument values, literal or child result
  Value result;
};

struct Trace {
  std::vector<TraceRecord> records;  // post-order; size == M
};

// Applies one operator to already-evaluated argument values. Column
// arguments arrive as Text values holding the normalized header name.
Value apply_operator(const Operator& op, const std::vector<Value>& args, const Table& t);

// Value of a leaf literal against a table (AllRows expands to the full view).
Value literal_value(const Literal& lit, const Table& t);

// Evaluates a type-checked program against a table. Deterministic; throws
// Error(UnknownColumn / EmptyViewAggregate / NonNumericColumn / KindMismatch).
std::pair<Value, Trace> execute(const Program& p, const Table& t);

// 1 if the Bool root is true, else 0; NonBooleanRoot otherwise.
int execute_label(const Program& p, const Table& t);

std::string trace_to_json(const Trace& trace);

}  // namespace veritab
