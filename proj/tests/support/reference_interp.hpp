#pragma once

// Independent straight-line interpreter used as the execution oracle. It
// shares only the data model (Table, Program) with the implementation under
// test; evaluation, numeric comparison and matching rules are re-derived
// here from the operation definitions.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "veritab/errors.hpp"
#include "veritab/program.hpp"
#include "veritab/table.hpp"

namespace veritab::testing {

struct RefRow {
  int index;
};
struct RefView {
  std::vector<int> rows;
};
using RefVal = std::variant<double, std::string, bool, RefRow, RefView>;

struct RefOutcome {
  std::optional<RefVal> value;
  std::optional<Err> error;

  static RefOutcome ok(RefVal v) { return {std::move(v), std::nullopt}; }
  static RefOutcome err(Err e) { return {std::nullopt, e}; }
};

namespace refdetail {

inline bool close(double a, double b) {
  double scale = 1.0;
  if (std::fabs(a) > scale) scale = std::fabs(a);
  if (std::fabs(b) > scale) scale = std::fabs(b);
  return std::fabs(a - b) <= 1e-6 * scale;
}

inline bool match_cell(const Cell& cell, const RefVal& v) {
  if (std::holds_alternative<double>(v)) {
    return cell.numeric.has_value() && close(*cell.numeric, std::get<double>(v));
  }
  const std::string& s = std::get<std::string>(v);
  if (cell.numeric) {
    auto parsed = parse_number(s);
    if (parsed) return close(*cell.numeric, *parsed);
  }
  return normalize(cell.raw) == normalize(s);
}

inline int col_or_throw(const Table& t, const std::string& name) {
  auto idx = t.column_index(normalize(name));
  if (!idx) throw Err::UnknownColumn;
  return *idx;
}

struct Thrown {
  Err e;
};

inline RefVal ref_eval(const NodePtr& n, const Table& t) {
  if (n->is_literal()) {
    switch (n->lit.kind) {
      case Literal::Kind::NumberLit: return n->lit.number;
      case Literal::Kind::TextLit:
      case Literal::Kind::ColumnRef: return n->lit.text;
      case Literal::Kind::AllRows: {
        RefView v;
        for (int i = 0; i < t.row_count(); ++i) v.rows.push_back(i);
        return v;
      }
    }
  }
  std::vector<RefVal> a;
  for (const auto& c : n->children) a.push_back(ref_eval(c, t));
  const std::string& op = n->op->name;

  auto view = [&](int i) -> const std::vector<int>& { return std::get<RefView>(a[i]).rows; };
  auto num = [&](int i) -> double {
    if (std::holds_alternative<double>(a[i])) return std::get<double>(a[i]);
    if (std::holds_alternative<std::string>(a[i])) throw Err::NonNumericColumn;
    throw Err::KindMismatch;
  };
  auto text = [&](int i) -> const std::string& { return std::get<std::string>(a[i]); };
  auto single_row = [&](int i) -> int {
    if (std::holds_alternative<RefRow>(a[i])) return std::get<RefRow>(a[i]).index;
    const auto& rows = std::get<RefView>(a[i]).rows;
    if (rows.empty()) throw Err::EmptyViewAggregate;
    return rows.front();
  };
  auto column_values = [&](const std::vector<int>& rows, int c) {
    std::vector<double> out;
    for (int r : rows) {
      const Cell& cell = t.at(r, c);
      if (!cell.numeric) throw Err::NonNumericColumn;
      out.push_back(*cell.numeric);
    }
    return out;
  };

  if (op == "count") return static_cast<double>(view(0).size());
  if (op == "only") return view(0).size() == 1;
  if (op == "several") return view(0).size() > 1;
  if (op == "zero") return close(num(0), 0.0);
  if (op == "none") {
    std::string s = normalize(text(0));
    return s == "none" || s == "no" || s == "-" || s == "n/a" || s.empty();
  }
  if (op == "with" || op == "without") {
    int c = col_or_throw(t, text(1));
    bool found = false;
    for (int r : view(0))
      if (match_cell(t.at(r, c), a[2])) found = true;
    return op == "with" ? found : !found;
  }
  if (op == "before") return std::get<RefRow>(a[0]).index < std::get<RefRow>(a[1]).index;
  if (op == "after") return std::get<RefRow>(a[0]).index > std::get<RefRow>(a[1]).index;
  if (op == "first" || op == "second" || op == "third" || op == "fourth") {
    size_t pos = op == "first" ? 0u : op == "second" ? 1u : op == "third" ? 2u : 3u;
    const auto& rows = view(0);
    return rows.size() > pos && rows[pos] == std::get<RefRow>(a[1]).index;
  }
  if (op == "avg" || op == "sum" || op == "max" || op == "min") {
    if (view(0).empty()) throw Err::EmptyViewAggregate;
    auto vals = column_values(view(0), col_or_throw(t, text(1)));
    double acc = 0;
    if (op == "max") {
      acc = vals[0];
      for (double v : vals) acc = std::max(acc, v);
    } else if (op == "min") {
      acc = vals[0];
      for (double v : vals) acc = std::min(acc, v);
    } else {
      for (double v : vals) acc += v;
      if (op == "avg") acc /= static_cast<double>(vals.size());
    }
    return acc;
  }
  if (op == "argmax" || op == "argmin") {
    if (view(0).empty()) throw Err::EmptyViewAggregate;
    auto vals = column_values(view(0), col_or_throw(t, text(1)));
    size_t best = 0;
    for (size_t i = 1; i < vals.size(); ++i) {
      if (op == "argmax" && vals[i] > vals[best]) best = i;
      if (op == "argmin" && vals[i] < vals[best]) best = i;
    }
    return RefRow{view(0)[best]};
  }
  if (op == "hop" || op == "num_hop") {
    const Cell& cell = t.at(single_row(0), col_or_throw(t, text(1)));
    if (op == "num_hop") {
      if (!cell.numeric) throw Err::NonNumericColumn;
      return *cell.numeric;
    }
    if (cell.numeric) return *cell.numeric;
    return cell.raw;
  }
  if (op == "diff") return num(0) - num(1);
  if (op == "add") return num(0) + num(1);
  if (op == "half") return std::round(num(0) / 2.0 * 1e6) / 1e6;
  if (op == "one_third") return std::round(num(0) / 3.0 * 1e6) / 1e6;
  if (op == "greater" || op == "less") {
    double x = num(0), y = num(1);
    if (close(x, y)) return false;
    return op == "greater" ? x > y : x < y;
  }
  if (op == "equal" || op == "unequal") {
    bool eq = false;
    if (std::holds_alternative<double>(a[0]) && std::holds_alternative<double>(a[1]))
      eq = close(std::get<double>(a[0]), std::get<double>(a[1]));
    else if (std::holds_alternative<std::string>(a[0]) &&
             std::holds_alternative<std::string>(a[1]))
      eq = normalize(std::get<std::string>(a[0])) == normalize(std::get<std::string>(a[1]));
    return op == "equal" ? eq : !eq;
  }
  if (op == "and") return std::get<bool>(a[0]) && std::get<bool>(a[1]);
  if (op == "or") return std::get<bool>(a[0]) || std::get<bool>(a[1]);
  if (op.rfind("filter_", 0) == 0) {
    int c = col_or_throw(t, text(1));
    RefView out;
    for (int r : view(0)) {
      const Cell& cell = t.at(r, c);
      bool keep = false;
      if (op == "filter_eq") {
        keep = match_cell(cell, a[2]);
      } else if (cell.numeric) {
        double x = *cell.numeric, y = num(2);
        bool eq = close(x, y);
        if (op == "filter_greater") keep = x > y && !eq;
        if (op == "filter_less") keep = x < y && !eq;
        if (op == "filter_greater_or_equal") keep = x > y || eq;
        if (op == "filter_less_or_equal") keep = x < y || eq;
      }
      if (keep) out.rows.push_back(r);
    }
    return out;
  }
  if (op.rfind("all_", 0) == 0) {
    int c = col_or_throw(t, text(1));
    for (int r : view(0)) {
      const Cell& cell = t.at(r, c);
      bool ok = false;
      if (op == "all_eq") {
        ok = match_cell(cell, a[2]);
      } else if (cell.numeric) {
        double x = *cell.numeric, y = num(2);
        bool eq = close(x, y);
        if (op == "all_greater") ok = x > y && !eq;
        if (op == "all_less") ok = x < y && !eq;
        if (op == "all_greater_or_equal") ok = x > y || eq;
        if (op == "all_less_or_equal") ok = x < y || eq;
      }
      if (!ok) return false;
    }
    return true;
  }
  if (op == "uniq_num") {
    int c = col_or_throw(t, text(1));
    std::vector<double> seen;
    for (int r : view(0)) {
      auto numeric = t.at(r, c).numeric;
      if (!numeric) continue;
      if (std::find(seen.begin(), seen.end(), *numeric) == seen.end()) seen.push_back(*numeric);
    }
    return static_cast<double>(seen.size());
  }
  if (op == "uniq_string") {
    int c = col_or_throw(t, text(1));
    std::vector<std::string> seen;
    for (int r : view(0)) {
      std::string s = normalize(t.at(r, c).raw);
      if (std::find(seen.begin(), seen.end(), s) == seen.end()) seen.push_back(s);
    }
    return static_cast<double>(seen.size());
  }
  if (op == "most_freq") {
    if (view(0).empty()) throw Err::EmptyViewAggregate;
    int c = col_or_throw(t, text(1));
    std::vector<std::pair<std::string, int>> counts;  // first-occurrence order
    for (int r : view(0)) {
      std::string key = normalize(t.at(r, c).raw);
      bool found = false;
      for (auto& [k, n] : counts)
        if (k == key) {
          ++n;
          found = true;
        }
      if (!found) counts.emplace_back(key, 1);
    }
    size_t best = 0;
    for (size_t i = 1; i < counts.size(); ++i)
      if (counts[i].second > counts[best].second) best = i;
    // find first row carrying the winner, numeric cells come back as numbers
    for (int r : view(0)) {
      const Cell& cell = t.at(r, c);
      if (normalize(cell.raw) == counts[best].first) {
        if (cell.numeric) return *cell.numeric;
        return cell.raw;
      }
    }
    throw Err::KindMismatch;
  }
  throw Err::KindMismatch;
}

}  // namespace refdetail

inline RefOutcome reference_execute(const Program& p, const Table& t) {
  try {
    return RefOutcome::ok(refdetail::ref_eval(p.root, t));
  } catch (Err e) {
    return RefOutcome::err(e);
  }
}

}  // namespace veritab::testing
