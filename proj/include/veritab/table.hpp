#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace veritab {

// Lowercase, trim, collapse internal whitespace runs to a single space.
// ASCII-only case folding; non-ASCII bytes pass through untouched. Idempotent.
std::string normalize(std::string_view text);

// Lenient numeric parse used for cell typing: strips thousands separators,
// leading/trailing currency symbols and whitespace, then requires the whole
// remainder to be a plain decimal (optional sign, fraction, exponent).
// Returns nothing for anything else; never throws.
std::optional<double> parse_number(std::string_view raw);

// Shortest decimal string that round-trips through double ("29", "1.5").
std::string format_number(double v);

struct Cell {
  std::string raw;               // preserved byte-exact
  std::optional<double> numeric; // present iff raw parses as a number

  static Cell of(std::string raw_text);
  std::string norm() const { return normalize(raw); }
};

struct Table {
  std::string id;
  std::string caption;
  std::vector<std::string> headers;     // normalized; unique
  std::vector<std::vector<Cell>> rows;  // R x C, R >= 1, C >= 1

  int row_count() const { return static_cast<int>(rows.size()); }
  int col_count() const { return static_cast<int>(headers.size()); }
  // Index of a column by normalized name, or nothing.
  std::optional<int> column_index(std::string_view normalized_name) const;
  const Cell& at(int row, int col) const { return rows[row][col]; }
};

struct Statement {
  std::string table_id;
  std::string text;
  int label = 0;    // ENTAILED=1 / REFUTED=0
  std::string tag;  // optional split tag ("simple"/"complex"), empty if absent
};

enum class TableFormat { tabfact, native };
enum class StatementFormat { tabfact, jsonl };

// Loads one table per file. `path` may be a single file or a directory
// (tabfact: *.csv with '#' delimiters; native: *.json documents).
std::map<std::string, Table> load_tables(const std::string& path, TableFormat format);

// Builds a table from in-memory rows; applies the same invariant checks as
// the file loaders. `origin` names the source in error messages.
Table make_table(std::string id, std::string caption, std::vector<std::string> headers,
                 std::vector<std::vector<std::string>> raw_rows, const std::string& origin);

std::vector<Statement> load_statements(const std::string& path, StatementFormat format,
                                       const std::map<std::string, Table>& tables);

// Native-format serialization; load(serialize(t)) is the identity.
std::string table_to_native_json(const Table& t);
void save_tables_native(const std::string& dir, const std::map<std::string, Table>& tables);
void save_statements_jsonl(const std::string& path, const std::vector<Statement>& stmts);

}  // namespace veritab
