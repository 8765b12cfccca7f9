#include "veritab/exec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "veritab/errors.hpp"

using nlohmann::json;

namespace veritab {

bool num_eq(double a, double b) {
  return std::fabs(a - b) <= kNumEps * std::max({1.0, std::fabs(a), std::fabs(b)});
}

Value Value::number(double v) {
  Value x;
  x.kind = ValueKind::Number;
  x.num = v;
  return x;
}
Value Value::string(std::string s) {
  Value x;
  x.kind = ValueKind::Text;
  x.text = std::move(s);
  return x;
}
Value Value::boolean(bool b) {
  Value x;
  x.kind = ValueKind::Bool;
  x.truth = b;
  return x;
}
Value Value::row_ref(int r) {
  Value x;
  x.kind = ValueKind::Row;
  x.row = r;
  return x;
}
Value Value::view_of(std::vector<int> rows) {
  Value x;
  x.kind = ValueKind::View;
  x.view = std::move(rows);
  return x;
}

std::string Value::describe() const {
  switch (kind) {
    case ValueKind::Number: return format_number(num);
    case ValueKind::Text: return text;
    case ValueKind::Bool: return truth ? "true" : "false";
    case ValueKind::Row: return "row " + std::to_string(row + 1);
    case ValueKind::View: {
      std::string out = "rows [";
      for (size_t i = 0; i < view.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(view[i] + 1);
      }
      return out + "]";
    }
  }
  return "?";
}

bool value_equal(const Value& a, const Value& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ValueKind::Number: return num_eq(a.num, b.num);
    case ValueKind::Text: return normalize(a.text) == normalize(b.text);
    case ValueKind::Bool: return a.truth == b.truth;
    case ValueKind::Row: return a.row == b.row;
    case ValueKind::View: return a.view == b.view;
  }
  return false;
}

namespace {

struct OpContext {
  const Table& table;

  int column(const Value& v) const {
    auto idx = table.column_index(normalize(v.text));
    if (!idx) fail(Err::UnknownColumn, "'" + v.text + "' in table " + table.id);
    return *idx;
  }

  double as_number(const Value& v, const char* op) const {
    if (v.kind == ValueKind::Number) return v.num;
    if (v.kind == ValueKind::Text)
      fail(Err::NonNumericColumn, std::string(op) + ": value '" + v.text + "' is not numeric");
    fail(Err::KindMismatch, std::string(op) + ": expected a number");
  }

  bool as_bool(const Value& v, const char* op) const {
    if (v.kind != ValueKind::Bool) fail(Err::KindMismatch, std::string(op) + ": expected a bool");
    return v.truth;
  }

  const std::vector<int>& as_view(const Value& v, const char* op) const {
    if (v.kind != ValueKind::View) fail(Err::KindMismatch, std::string(op) + ": expected a view");
    return v.view;
  }

  // hop / num_hop accept a row or take the first row of a view.
  int as_single_row(const Value& v, const char* op) const {
    if (v.kind == ValueKind::Row) return v.row;
    if (v.kind == ValueKind::View) {
      if (v.view.empty()) fail(Err::EmptyViewAggregate, std::string(op) + " on empty view");
      return v.view.front();
    }
    fail(Err::KindMismatch, std::string(op) + ": expected a row or view");
  }

  // Equality between a cell and a scalar value: numeric when both sides are
  // numeric, otherwise normalized-string comparison.
  bool cell_matches(const Cell& cell, const Value& v) const {
    if (v.kind == ValueKind::Number)
      return cell.numeric && num_eq(*cell.numeric, v.num);
    if (cell.numeric) {
      if (auto n = parse_number(v.text)) return num_eq(*cell.numeric, *n);
    }
    return cell.norm() == normalize(v.text);
  }

  std::vector<double> numeric_column(const std::vector<int>& view, int col, const char* op) const {
    std::vector<double> vals;
    vals.reserve(view.size());
    for (int r : view) {
      const Cell& c = table.at(r, col);
      if (!c.numeric)
        fail(Err::NonNumericColumn, std::string(op) + ": cell '" + c.raw + "' in column '" +
                                        table.headers[col] + "'");
      vals.push_back(*c.numeric);
    }
    return vals;
  }

  void require_nonempty(const std::vector<int>& view, const char* op) const {
    if (view.empty()) fail(Err::EmptyViewAggregate, std::string(op) + " on empty view");
  }

  static double round6(double v) { return std::round(v * 1e6) / 1e6; }

  Value apply(const Operator& op, const std::vector<Value>& a) const {
    const char* name = op.name.c_str();
    if (op.name == "count") return Value::number(static_cast<double>(as_view(a[0], name).size()));

    if (op.name == "with" || op.name == "without") {
      const auto& view = as_view(a[0], name);
      int col = column(a[1]);
      bool found = false;
      for (int r : view)
        if (cell_matches(table.at(r, col), a[2])) {
          found = true;
          break;
        }
      return Value::boolean(op.name == "with" ? found : !found);
    }

    if (op.name == "none") {
      static const std::set<std::string> sentinels = {"none", "no", "-", "n/a", ""};
      return Value::boolean(sentinels.count(normalize(a[0].text)) > 0);
    }

    if (op.name == "before" || op.name == "after") {
      bool is_before = a[0].row < a[1].row;
      return Value::boolean(op.name == "before" ? is_before : a[0].row > a[1].row);
    }

    if (op.name == "first" || op.name == "second" || op.name == "third" || op.name == "fourth") {
      const auto& view = as_view(a[0], name);
      size_t k = op.name == "first" ? 0 : op.name == "second" ? 1 : op.name == "third" ? 2 : 3;
      return Value::boolean(view.size() > k && view[k] == a[1].row);
    }

    if (op.name == "only") return Value::boolean(as_view(a[0], name).size() == 1);
    if (op.name == "several") return Value::boolean(as_view(a[0], name).size() > 1);
    if (op.name == "zero") return Value::boolean(num_eq(as_number(a[0], name), 0.0));

    if (op.name == "avg" || op.name == "sum" || op.name == "max" || op.name == "min") {
      const auto& view = as_view(a[0], name);
      require_nonempty(view, name);
      auto vals = numeric_column(view, column(a[1]), name);
      if (op.name == "sum") {
        double s = 0;
        for (double v : vals) s += v;
        return Value::number(s);
      }
      if (op.name == "avg") {
        double s = 0;
        for (double v : vals) s += v;
        return Value::number(s / static_cast<double>(vals.size()));
      }
      if (op.name == "max") return Value::number(*std::max_element(vals.begin(), vals.end()));
      return Value::number(*std::min_element(vals.begin(), vals.end()));
    }

    if (op.name == "argmax" || op.name == "argmin") {
      const auto& view = as_view(a[0], name);
      require_nonempty(view, name);
      auto vals = numeric_column(view, column(a[1]), name);
      size_t best = 0;
      for (size_t i = 1; i < vals.size(); ++i) {
        if (op.name == "argmax" ? vals[i] > vals[best] : vals[i] < vals[best]) best = i;
        // ties keep the earliest (lowest row index) entry
      }
      return Value::row_ref(view[best]);
    }

    if (op.name == "hop" || op.name == "num_hop") {
      int r = as_single_row(a[0], name);
      const Cell& c = table.at(r, column(a[1]));
      if (op.name == "num_hop") {
        if (!c.numeric)
          fail(Err::NonNumericColumn, std::string(name) + ": cell '" + c.raw + "' is not numeric");
        return Value::number(*c.numeric);
      }
      if (c.numeric) return Value::number(*c.numeric);
      return Value::string(c.raw);
    }

    if (op.name == "diff") return Value::number(as_number(a[0], name) - as_number(a[1], name));
    if (op.name == "add") return Value::number(as_number(a[0], name) + as_number(a[1], name));

    if (op.name == "greater" || op.name == "less") {
      double x = as_number(a[0], name), y = as_number(a[1], name);
      if (num_eq(x, y)) return Value::boolean(false);
      return Value::boolean(op.name == "greater" ? x > y : x < y);
    }

    if (op.name == "equal" || op.name == "unequal") {
      bool eq;
      if (a[0].kind == ValueKind::Number && a[1].kind == ValueKind::Number)
        eq = num_eq(a[0].num, a[1].num);
      else if (a[0].kind == ValueKind::Text && a[1].kind == ValueKind::Text)
        eq = normalize(a[0].text) == normalize(a[1].text);
      else
        eq = false;  // mixed kinds only reachable through dynamic-scalar ops
      return Value::boolean(op.name == "equal" ? eq : !eq);
    }

    if (op.name == "and") return Value::boolean(as_bool(a[0], name) && as_bool(a[1], name));
    if (op.name == "or") return Value::boolean(as_bool(a[0], name) || as_bool(a[1], name));

    if (op.name.rfind("filter_", 0) == 0) {
      const auto& view = as_view(a[0], name);
      int col = column(a[1]);
      std::vector<int> kept;
      for (int r : view) {
        const Cell& c = table.at(r, col);
        bool keep = false;
        if (op.name == "filter_eq") {
          keep = cell_matches(c, a[2]);
        } else if (c.numeric) {
          // non-numeric cells never satisfy a numeric comparison filter
          double x = *c.numeric, y = as_number(a[2], name);
          if (op.name == "filter_greater") keep = !num_eq(x, y) && x > y;
          else if (op.name == "filter_less") keep = !num_eq(x, y) && x < y;
          else if (op.name == "filter_greater_or_equal") keep = num_eq(x, y) || x > y;
          else if (op.name == "filter_less_or_equal") keep = num_eq(x, y) || x < y;
        }
        if (keep) kept.push_back(r);
      }
      return Value::view_of(std::move(kept));
    }

    if (op.name.rfind("all_", 0) == 0) {
      const auto& view = as_view(a[0], name);
      int col = column(a[1]);
      bool all = true;
      for (int r : view) {
        const Cell& c = table.at(r, col);
        bool ok = false;
        if (op.name == "all_eq") {
          ok = cell_matches(c, a[2]);
        } else if (c.numeric) {
          double x = *c.numeric, y = as_number(a[2], name);
          if (op.name == "all_greater") ok = !num_eq(x, y) && x > y;
          else if (op.name == "all_less") ok = !num_eq(x, y) && x < y;
          else if (op.name == "all_greater_or_equal") ok = num_eq(x, y) || x > y;
          else if (op.name == "all_less_or_equal") ok = num_eq(x, y) || x < y;
        }
        if (!ok) {
          all = false;
          break;
        }
      }
      return Value::boolean(all);
    }

    if (op.name == "uniq_num") {
      const auto& view = as_view(a[0], name);
      int col = column(a[1]);
      std::set<double> distinct;
      for (int r : view)
        if (auto n = table.at(r, col).numeric) distinct.insert(*n);
      return Value::number(static_cast<double>(distinct.size()));
    }

    if (op.name == "uniq_string") {
      const auto& view = as_view(a[0], name);
      int col = column(a[1]);
      std::set<std::string> distinct;
      for (int r : view) distinct.insert(table.at(r, col).norm());
      return Value::number(static_cast<double>(distinct.size()));
    }

    if (op.name == "most_freq") {
      const auto& view = as_view(a[0], name);
      require_nonempty(view, name);
      int col = column(a[1]);
      std::map<std::string, int> counts;
      std::map<std::string, int> first_row;
      for (int r : view) {
        std::string key = table.at(r, col).norm();
        if (!first_row.count(key)) first_row[key] = r;
        counts[key]++;
      }
      std::string best;
      int best_count = -1;
      for (const auto& [key, n] : counts) {
        if (n > best_count || (n == best_count && first_row[key] < first_row[best])) {
          best = key;
          best_count = n;
        }
      }
      const Cell& c = table.at(first_row[best], col);
      if (c.numeric) return Value::number(*c.numeric);
      return Value::string(c.raw);
    }

    if (op.name == "half") return Value::number(round6(as_number(a[0], name) / 2.0));
    if (op.name == "one_third") return Value::number(round6(as_number(a[0], name) / 3.0));

    fail(Err::KindMismatch, "unhandled operator " + op.name);
  }

  Value literal(const Literal& lit) const {
    switch (lit.kind) {
      case Literal::Kind::NumberLit: return Value::number(lit.number);
      case Literal::Kind::TextLit:
      case Literal::Kind::ColumnRef: return Value::string(lit.text);
      case Literal::Kind::AllRows: {
        std::vector<int> all(table.row_count());
        for (int i = 0; i < table.row_count(); ++i) all[i] = i;
        return Value::view_of(std::move(all));
      }
    }
    fail(Err::KindMismatch, "bad literal");
  }
};

struct Evaluator {
  OpContext ctx;
  Trace& trace;

  Value eval(const NodePtr& n, std::vector<int>& path) {
    if (n->is_literal()) return ctx.literal(n->lit);
    std::vector<Value> args;
    args.reserve(n->children.size());
    for (size_t i = 0; i < n->children.size(); ++i) {
      path.push_back(static_cast<int>(i));
      args.push_back(eval(n->children[i], path));
      path.pop_back();
    }
    Value result = ctx.apply(*n->op, args);
    trace.records.push_back(TraceRecord{path, n->op->name, std::move(args), result});
    return result;
  }
};

}  // namespace

Value apply_operator(const Operator& op, const std::vector<Value>& args, const Table& t) {
  return OpContext{t}.apply(op, args);
}

Value literal_value(const Literal& lit, const Table& t) { return OpContext{t}.literal(lit); }

std::pair<Value, Trace> execute(const Program& p, const Table& t) {
  Trace trace;
  Evaluator ev{OpContext{t}, trace};
  std::vector<int> path;
  Value root = ev.eval(p.root, path);
  return {std::move(root), std::move(trace)};
}

int execute_label(const Program& p, const Table& t) {
  auto [root, trace] = execute(p, t);
  if (root.kind != ValueKind::Bool)
    fail(Err::NonBooleanRoot, "program root evaluates to " + root.describe());
  return root.truth ? 1 : 0;
}

namespace {

json value_to_json(const Value& v) {
  switch (v.kind) {
    case ValueKind::Number: return json{{"kind", "number"}, {"value", v.num}};
    case ValueKind::Text: return json{{"kind", "text"}, {"value", v.text}};
    case ValueKind::Bool: return json{{"kind", "bool"}, {"value", v.truth}};
    case ValueKind::Row: return json{{"kind", "row"}, {"value", v.row}};
    case ValueKind::View: return json{{"kind", "view"}, {"value", v.view}};
  }
  return json();
}

}  // namespace

std::string trace_to_json(const Trace& trace) {
  json out = json::array();
  for (const auto& rec : trace.records) {
    json args = json::array();
    for (const auto& a : rec.args) args.push_back(value_to_json(a));
    out.push_back(json{{"path", rec.path},
                       {"op", rec.op},
                       {"args", std::move(args)},
                       {"result", value_to_json(rec.result)}});
  }
  return out.dump();
}

}  // namespace veritab
