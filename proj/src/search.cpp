#include "veritab/search.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "veritab/errors.hpp"

using nlohmann::json;

namespace veritab {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Word-boundary substring occurrences of needle in hay (both normalized).
std::vector<std::pair<size_t, size_t>> find_occurrences(const std::string& hay,
                                                        const std::string& needle) {
  std::vector<std::pair<size_t, size_t>> out;
  if (needle.empty()) return out;
  size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    size_t end = pos + needle.size();
    bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]) || !is_word_char(needle.front());
    bool right_ok = end == hay.size() || !is_word_char(hay[end]) || !is_word_char(needle.back());
    if (left_ok && right_ok) out.emplace_back(pos, end);
    ++pos;
  }
  return out;
}

// Drops ranges strictly contained in a longer kept range (longest-match rule).
template <typename T>
void drop_nested(std::vector<T>& links) {
  std::vector<T> kept;
  for (const auto& a : links) {
    bool nested = false;
    for (const auto& b : links) {
      if (b.begin <= a.begin && a.end <= b.end && (b.end - b.begin) > (a.end - a.begin)) {
        nested = true;
        break;
      }
    }
    if (!nested) kept.push_back(a);
  }
  links = std::move(kept);
}

}  // namespace

LinkedEntities link_entities(const Statement& s, const Table& t) {
  LinkedEntities out;
  std::string text = normalize(s.text);

  for (const auto& header : t.headers)
    for (auto [b, e] : find_occurrences(text, header))
      out.columns.push_back({header, b, e});

  // Distinct normalized cell texts in row-major order.
  std::vector<std::pair<std::string, std::string>> seen_cells;  // (text, header)
  for (int r = 0; r < t.row_count(); ++r) {
    for (int c = 0; c < t.col_count(); ++c) {
      std::string norm = t.at(r, c).norm();
      if (norm.empty()) continue;
      std::pair<std::string, std::string> key{norm, t.headers[c]};
      if (std::find(seen_cells.begin(), seen_cells.end(), key) != seen_cells.end()) continue;
      seen_cells.push_back(key);
      for (auto [b, e] : find_occurrences(text, norm))
        out.cells.push_back({norm, t.headers[c], b, e});
    }
  }

  // Standalone numeric tokens.
  size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i]) && text[i] != '.') {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < text.size() && (is_word_char(text[j]) || text[j] == '.' || text[j] == ',')) ++j;
    std::string token = text.substr(i, j - i);
    if (auto n = parse_number(token)) out.numbers.push_back({*n, i, j});
    i = j;
  }

  drop_nested(out.columns);
  drop_nested(out.cells);
  drop_nested(out.numbers);
  return out;
}

// ---------------------------------------------------------------------------
// Trigger lexicon

namespace {

using Lexicon = std::vector<std::pair<Family, std::vector<std::string>>>;

Lexicon default_lexicon() {
  return {
      {Family::aggregate,
       {"number of", "times", "total", "rows", "average", "sum", "count", "amount",
        "frequent", "unique"}},
      {Family::superlative,
       {"most", "highest", "lowest", "least", "best", "worst", "top", "maximum", "minimum"}},
      {Family::compare,
       {"more", "greater", "over", "less", "fewer", "under", "than", "same", "equal",
        "different", "exceeds"}},
      {Family::boolean_op, {"and", "or", "both", "either", "neither"}},
      {Family::positional,
       {"first", "second", "third", "fourth", "before", "after", "only", "several"}},
      {Family::arithmetic, {"difference", "plus", "minus", "half", "combined", "added"}},
      {Family::filter, {"where", "with", "without", "whose", "which"}},
      {Family::hop, {"value of", "record", "entry"}},
  };
}

Lexicon& active_lexicon() {
  static Lexicon lex = default_lexicon();
  return lex;
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_word_char(c) || c == '_') {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool phrase_present(const std::vector<std::string>& tokens, const std::string& phrase) {
  auto words = word_tokens(phrase);
  if (words.empty()) return false;
  for (size_t i = 0; i + words.size() <= tokens.size(); ++i) {
    bool all = true;
    for (size_t k = 0; k < words.size(); ++k)
      if (tokens[i + k] != words[k]) {
        all = false;
        break;
      }
    if (all) return true;
  }
  return false;
}

}  // namespace

std::set<Family> trigger_map(const std::string& statement_text) {
  auto tokens = word_tokens(normalize(statement_text));
  std::set<Family> fired;
  for (const auto& [family, phrases] : active_lexicon())
    for (const auto& phrase : phrases)
      if (phrase_present(tokens, phrase)) {
        fired.insert(family);
        break;
      }
  if (fired.empty()) {
    for (Family f : {Family::aggregate, Family::filter, Family::compare, Family::boolean_op,
                     Family::positional, Family::arithmetic, Family::hop, Family::superlative})
      fired.insert(f);
  }
  return fired;
}

void load_trigger_lexicon(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) fail(Err::BadFormat, "cannot open trigger lexicon " + json_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Err::BadFormat, json_path + ": " + e.what());
  }
  Lexicon lex;
  auto family_of = [&](const std::string& name) -> Family {
    for (Family f : {Family::aggregate, Family::filter, Family::compare, Family::boolean_op,
                     Family::positional, Family::arithmetic, Family::hop, Family::superlative})
      if (name == family_name(f)) return f;
    fail(Err::BadFormat, json_path + ": unknown family " + name);
  };
  for (const auto& [name, phrases] : j.items())
    lex.emplace_back(family_of(name), phrases.get<std::vector<std::string>>());
  active_lexicon() = std::move(lex);
}

// ---------------------------------------------------------------------------
// Candidate enumeration

namespace {

struct Entry {
  NodePtr node;
  int size = 0;             // operation-node count
  Value value;
  bool table_dep = false;   // contains all_rows somewhere
};

struct Pools {
  // pool[kind][size] -> entries
  std::map<ValueKind, std::map<int, std::vector<Entry>>> by_kind;

  void add(ValueKind k, Entry e, int cap) {
    auto& bucket = by_kind[k][e.size];
    if (static_cast<int>(bucket.size()) < cap) bucket.push_back(std::move(e));
  }

  const std::vector<Entry>& at(ValueKind k, int size) {
    static const std::vector<Entry> empty;
    auto it = by_kind.find(k);
    if (it == by_kind.end()) return empty;
    auto jt = it->second.find(size);
    return jt == it->second.end() ? empty : jt->second;
  }
};

struct Enumerator {
  const Statement& stmt;
  const Table& table;
  const LinkedEntities& ents;
  const SearchLimits& limits;
  std::set<Family> families;

  Pools pools;
  std::unordered_set<std::string> seen;  // canonical prints
  CandidateSet result;
  std::chrono::steady_clock::time_point deadline;
  bool stop = false;

  std::vector<std::string> columns;                          // candidate column names
  std::vector<std::pair<std::string, NodePtr>> cell_fills;   // (column, cell literal)
  std::vector<std::pair<std::string, NodePtr>> num_fills;    // (column, number literal)

  bool allowed(const Operator& op) const { return families.count(op.family) > 0; }

  bool over_budget() {
    if (stop) return true;
    if (std::chrono::steady_clock::now() > deadline) {
      result.budget_exceeded = true;
      stop = true;
    }
    return stop;
  }

  NodePtr column_literal(const std::string& header) {
    Literal lit;
    lit.kind = Literal::Kind::ColumnRef;
    lit.text = header;
    return make_literal(std::move(lit));
  }

  void offer(const Operator* op, std::vector<NodePtr> children, std::vector<Value> arg_values,
             int size, bool dep) {
    if (stop) return;
    if (!dep) return;  // programs without table access are vacuous
    NodePtr node;
    try {
      node = make_operation(op, std::move(children));
    } catch (const Error&) {
      return;
    }
    std::string printed = print_node(node);
    if (!seen.insert(printed).second) return;
    Value value;
    try {
      value = apply_operator(*op, arg_values, table);
    } catch (const Error&) {
      return;  // execution error: candidate discarded
    }
    Entry e{node, size, value, dep};
    if (value.kind == ValueKind::Bool &&
        static_cast<int>(result.programs.size()) < limits.max_candidates) {
      Program p;
      p.root = node;
      p.source_statement = stmt.text;
      int label = value.truth ? 1 : 0;
      int idx = static_cast<int>(result.programs.size());
      result.programs.emplace_back(std::move(p), label);
      if (label == stmt.label) result.consistent.push_back(idx);
      else result.inconsistent.push_back(idx);
      if (static_cast<int>(result.programs.size()) >= limits.max_candidates) stop = true;
    }
    pools.add(value.kind, std::move(e), limits.pool_cap);
  }

  // One child entry plus a column slot.
  void unary_with_column(const Operator* op, ValueKind child_kind, int size) {
    for (const auto& child : pools.at(child_kind, size - 1)) {
      for (const auto& col : columns) {
        if (over_budget()) return;
        offer(op, {child.node, column_literal(col)}, {child.value, Value::string(col)}, size,
              child.table_dep);
      }
    }
  }

  void unary(const Operator* op, ValueKind child_kind, int size) {
    for (const auto& child : pools.at(child_kind, size - 1)) {
      if (over_budget()) return;
      offer(op, {child.node}, {child.value}, size, child.table_dep);
    }
  }

  void binary(const Operator* op, ValueKind k1, ValueKind k2, int size) {
    for (int s1 = 0; s1 <= size - 1; ++s1) {
      int s2 = size - 1 - s1;
      for (const auto& a : pools.at(k1, s1)) {
        for (const auto& b : pools.at(k2, s2)) {
          if (over_budget()) return;
          if (a.node == b.node) continue;
          offer(op, {a.node, b.node}, {a.value, b.value}, size, a.table_dep || b.table_dep);
        }
      }
    }
  }

  void filter_like(const Operator* op, int size,
                   const std::vector<std::pair<std::string, NodePtr>>& fills) {
    for (const auto& view : pools.at(ValueKind::View, size - 1)) {
      for (const auto& [col, lit] : fills) {
        if (over_budget()) return;
        offer(op, {view.node, column_literal(col), lit},
              {view.value, Value::string(col), literal_value(lit->lit, table)}, size,
              view.table_dep);
      }
    }
  }

  void run() {
    deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(limits.budget_ms);

    // seeds: literals are size-0 pool entries
    Literal all;
    all.kind = Literal::Kind::AllRows;
    all.text = "all_rows";
    NodePtr all_rows = make_literal(all);
    pools.add(ValueKind::View, {all_rows, 0, literal_value(all, table), true}, limits.pool_cap);

    std::vector<double> nums_seen;
    for (const auto& n : ents.numbers) {
      if (std::find_if(nums_seen.begin(), nums_seen.end(),
                       [&](double v) { return v == n.value; }) != nums_seen.end())
        continue;
      nums_seen.push_back(n.value);
      Literal lit;
      lit.kind = Literal::Kind::NumberLit;
      lit.number = n.value;
      lit.text = format_number(n.value);
      pools.add(ValueKind::Number, {make_literal(lit), 0, Value::number(n.value), false},
                limits.pool_cap);
    }
    std::vector<std::string> texts_seen;
    for (const auto& c : ents.cells) {
      if (std::find(texts_seen.begin(), texts_seen.end(), c.text) != texts_seen.end()) continue;
      texts_seen.push_back(c.text);
      Literal lit;
      lit.kind = Literal::Kind::TextLit;
      lit.text = c.text;
      pools.add(ValueKind::Text, {make_literal(lit), 0, Value::string(c.text), false},
                limits.pool_cap);
    }

    // candidate column names: linked columns, then columns of linked cells
    for (const auto& c : ents.columns)
      if (std::find(columns.begin(), columns.end(), c.header) == columns.end())
        columns.push_back(c.header);
    for (const auto& c : ents.cells)
      if (std::find(columns.begin(), columns.end(), c.header) == columns.end())
        columns.push_back(c.header);

    for (const auto& c : ents.cells) {
      Literal lit;
      lit.kind = Literal::Kind::TextLit;
      lit.text = c.text;
      cell_fills.emplace_back(c.header, make_literal(lit));
    }
    for (const auto& col : columns) {
      for (double v : nums_seen) {
        Literal lit;
        lit.kind = Literal::Kind::NumberLit;
        lit.number = v;
        lit.text = format_number(v);
        num_fills.emplace_back(col, make_literal(lit));
      }
    }
    auto eq_fills = cell_fills;
    eq_fills.insert(eq_fills.end(), num_fills.begin(), num_fills.end());

    for (int size = 1; size <= limits.max_ops && !stop; ++size) {
      for (const auto& op : operator_registry()) {
        if (over_budget()) break;
        if (!allowed(op)) continue;
        const std::string& n = op.name;
        if (n == "count" || n == "only" || n == "several")
          unary(&op, ValueKind::View, size);
        else if (n == "avg" || n == "sum" || n == "max" || n == "min" || n == "argmax" ||
                 n == "argmin" || n == "uniq_num" || n == "uniq_string" || n == "most_freq")
          unary_with_column(&op, ValueKind::View, size);
        else if (n == "hop" || n == "num_hop")
          unary_with_column(&op, ValueKind::Row, size);
        else if (n == "half" || n == "one_third" || n == "zero")
          unary(&op, ValueKind::Number, size);
        else if (n == "none")
          unary(&op, ValueKind::Text, size);
        else if (n == "diff" || n == "add" || n == "greater" || n == "less")
          binary(&op, ValueKind::Number, ValueKind::Number, size);
        else if (n == "equal" || n == "unequal") {
          binary(&op, ValueKind::Number, ValueKind::Number, size);
          binary(&op, ValueKind::Text, ValueKind::Text, size);
        } else if (n == "and" || n == "or")
          binary(&op, ValueKind::Bool, ValueKind::Bool, size);
        else if (n == "before" || n == "after")
          binary(&op, ValueKind::Row, ValueKind::Row, size);
        else if (n == "first" || n == "second" || n == "third" || n == "fourth")
          binary(&op, ValueKind::View, ValueKind::Row, size);
        else if (n == "filter_eq" || n == "with" || n == "without" || n == "all_eq")
          filter_like(&op, size, eq_fills);
        else if (n.rfind("filter_", 0) == 0 || n.rfind("all_", 0) == 0)
          filter_like(&op, size, num_fills);
      }
    }
  }
};

}  // namespace

CandidateSet enumerate_candidates(const Statement& s, const Table& t, const LinkedEntities& ents,
                                  const SearchLimits& limits) {
  Enumerator en{s, t, ents, limits};
  en.result.statement = s;
  en.families = trigger_map(s.text);
  // Structural cues beyond the lexicon: linked cells imply filtering and row
  // lookups, linked numbers imply comparisons.
  if (!ents.cells.empty() || !ents.columns.empty()) {
    en.families.insert(Family::filter);
    en.families.insert(Family::hop);
  }
  if (!ents.numbers.empty()) en.families.insert(Family::compare);
  en.run();
  return std::move(en.result);
}

}  // namespace veritab
