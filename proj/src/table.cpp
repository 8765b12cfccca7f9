#include "veritab/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "veritab/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace veritab {

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

namespace {

// Currency markers stripped before the numeric parse. Multi-byte entries are
// the UTF-8 encodings of EUR/GBP/JPY signs.
const char* kCurrency[] = {"$", "\xe2\x82\xac", "\xc2\xa3", "\xc2\xa5"};

std::string_view strip_currency(std::string_view s) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const char* cur : kCurrency) {
      std::string_view c(cur);
      if (s.substr(0, c.size()) == c) {
        s.remove_prefix(c.size());
        changed = true;
      }
      if (s.size() >= c.size() && s.substr(s.size() - c.size()) == c) {
        s.remove_suffix(c.size());
        changed = true;
      }
    }
  }
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<double> parse_number(std::string_view raw) {
  std::string_view s = strip_currency(trim(raw));
  s = trim(s);
  if (s.empty()) return std::nullopt;

  std::string cleaned;
  cleaned.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == ',') {
      // thousands separator: only valid between digits
      bool prev_digit = i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]));
      bool next_digit = i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]));
      if (prev_digit && next_digit) continue;
      return std::nullopt;
    }
    cleaned.push_back(c);
  }

  // Accept only plain decimals; std::from_chars would otherwise admit "inf",
  // "nan" and hex floats.
  bool seen_digit = false;
  for (size_t i = 0; i < cleaned.size(); ++i) {
    char c = cleaned[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      seen_digit = true;
      continue;
    }
    if (c == '+' || c == '-' || c == '.' || c == 'e' || c == 'E') continue;
    return std::nullopt;
  }
  if (!seen_digit) return std::nullopt;

  double value = 0;
  auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), value);
  if (ec != std::errc() || ptr != cleaned.data() + cleaned.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

Cell Cell::of(std::string raw_text) {
  Cell c;
  c.numeric = parse_number(raw_text);
  c.raw = std::move(raw_text);
  return c;
}

std::optional<int> Table::column_index(std::string_view normalized_name) const {
  for (size_t i = 0; i < headers.size(); ++i)
    if (headers[i] == normalized_name) return static_cast<int>(i);
  return std::nullopt;
}

Table make_table(std::string id, std::string caption, std::vector<std::string> headers,
                 std::vector<std::vector<std::string>> raw_rows, const std::string& origin) {
  Table t;
  t.id = std::move(id);
  t.caption = std::move(caption);
  if (headers.empty()) fail(Err::EmptyTable, origin + ": no header row");
  std::set<std::string> seen;
  for (auto& h : headers) {
    std::string n = normalize(h);
    if (!seen.insert(n).second)
      fail(Err::DuplicateHeader, origin + ": duplicate header '" + n + "'");
    t.headers.push_back(std::move(n));
  }
  if (raw_rows.empty()) fail(Err::EmptyTable, origin + ": no data rows");
  for (size_t r = 0; r < raw_rows.size(); ++r) {
    if (raw_rows[r].size() != t.headers.size())
      fail(Err::RaggedRow, origin + ": line " + std::to_string(r + 2) + " has " +
                               std::to_string(raw_rows[r].size()) + " cells, expected " +
                               std::to_string(t.headers.size()));
    std::vector<Cell> row;
    row.reserve(raw_rows[r].size());
    for (auto& cell : raw_rows[r]) row.push_back(Cell::of(std::move(cell)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Table load_tabfact_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(Err::BadFormat, "cannot open " + file.string());
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> headers;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, '#');
    if (first) {
      headers = cells;
      first = false;
    } else {
      rows.push_back(cells);
    }
  }
  if (first) fail(Err::EmptyTable, file.string() + ": empty file");
  return make_table(file.filename().string(), "", std::move(headers), std::move(rows),
                    file.string());
}

Table load_native_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(Err::BadFormat, "cannot open " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Err::BadFormat, file.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j.contains("headers") || !j.contains("rows"))
    fail(Err::BadFormat, file.string() + ": expected {id, caption, headers, rows}");
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : j["rows"]) {
    std::vector<std::string> cells;
    for (const auto& c : row)
      cells.push_back(c.is_string() ? c.get<std::string>() : c.dump());
    rows.push_back(std::move(cells));
  }
  return make_table(j["id"].get<std::string>(), j.value("caption", std::string()),
                    j["headers"].get<std::vector<std::string>>(), std::move(rows), file.string());
}

}  // namespace

std::map<std::string, Table> load_tables(const std::string& path, TableFormat format) {
  fs::path p(path);
  if (!fs::exists(p)) fail(Err::BadFormat, "no such path: " + path);
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(p);
  }
  std::map<std::string, Table> out;
  for (const auto& f : files) {
    if (fs::is_directory(p)) {
      auto ext = f.extension().string();
      if (format == TableFormat::tabfact && ext != ".csv") continue;
      if (format == TableFormat::native && ext != ".json") continue;
    }
    Table t = format == TableFormat::tabfact ? load_tabfact_csv(f) : load_native_json(f);
    out[t.id] = std::move(t);
  }
  if (out.empty()) fail(Err::BadFormat, "no tables found under " + path);
  return out;
}

std::vector<Statement> load_statements(const std::string& path, StatementFormat format,
                                       const std::map<std::string, Table>& tables) {
  std::ifstream in(path);
  if (!in) fail(Err::BadFormat, "cannot open " + path);
  std::vector<Statement> out;
  auto check = [&](Statement& s, const std::string& where) {
    if (s.text.empty()) fail(Err::BadFormat, where + ": empty statement text");
    if (s.label != 0 && s.label != 1)
      fail(Err::LabelOutOfRange, where + ": label " + std::to_string(s.label));
    if (!tables.count(s.table_id)) fail(Err::UnknownTableId, where + ": " + s.table_id);
  };
  if (format == StatementFormat::tabfact) {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(Err::BadFormat, path + ": " + e.what());
    }
    if (!j.is_object()) fail(Err::BadFormat, path + ": expected a table_id -> entry map");
    for (const auto& [table_id, entry] : j.items()) {
      if (!entry.is_array() || entry.size() < 2)
        fail(Err::BadFormat, path + ": entry for " + table_id +
                                 " must be [[statements], [labels], caption]");
      const auto& texts = entry[0];
      const auto& labels = entry[1];
      if (texts.size() != labels.size())
        fail(Err::BadFormat, path + ": " + table_id + ": statement/label count mismatch");
      for (size_t i = 0; i < texts.size(); ++i) {
        Statement s;
        s.table_id = table_id;
        s.text = texts[i].get<std::string>();
        s.label = labels[i].get<int>();
        check(s, path + ":" + table_id);
        out.push_back(std::move(s));
      }
    }
  } else {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        fail(Err::BadFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
      }
      Statement s;
      s.table_id = j.value("table_id", std::string());
      s.text = j.value("text", std::string());
      s.label = j.value("label", -1);
      s.tag = j.value("tag", std::string());
      check(s, path + ":" + std::to_string(lineno));
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string table_to_native_json(const Table& t) {
  json j;
  j["id"] = t.id;
  j["caption"] = t.caption;
  j["headers"] = t.headers;
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const auto& c : row) r.push_back(c.raw);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2);
}

void save_tables_native(const std::string& dir, const std::map<std::string, Table>& tables) {
  fs::create_directories(dir);
  for (const auto& [id, t] : tables) {
    std::ofstream out(fs::path(dir) / (id + ".json"));
    out << table_to_native_json(t) << "\n";
  }
}

void save_statements_jsonl(const std::string& path, const std::vector<Statement>& stmts) {
  std::ofstream out(path);
  for (const auto& s : stmts) {
    json j{{"table_id", s.table_id}, {"text", s.text}, {"label", s.label}};
    if (!s.tag.empty()) j["tag"] = s.tag;
    out << j.dump() << "\n";
  }
}

}  // namespace veritab
