#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "veritab/exec.hpp"
#include "veritab/program.hpp"
#include "veritab/table.hpp"

namespace veritab {

// Surface links between a statement and its table, found by greedy
// longest-substring matching on normalized text at word boundaries.
struct LinkedEntities {
  struct ColumnLink {
    std::string header;
    size_t begin, end;
  };
  struct CellLink {
    std::string text;    // normalized cell text
    std::string header;  // column the cell was found under
    size_t begin, end;
  };
  struct NumberLink {
    double value;
    size_t begin, end;
  };
  std::vector<ColumnLink> columns;
  std::vector<CellLink> cells;
  std::vector<NumberLink> numbers;

  bool empty() const { return columns.empty() && cells.empty() && numbers.empty(); }
};

LinkedEntities link_entities(const Statement& s, const Table& t);

// Operator families whose trigger lexicon intersects the normalized
// statement; all families when nothing fires.
std::set<Family> trigger_map(const std::string& statement_text);

// Replaces the built-in trigger lexicon (family name -> list of phrases).
void load_trigger_lexicon(const std::string& json_path);

struct SearchLimits {
  int max_ops = 7;          // operation nodes per program
  int max_candidates = 200;
  int budget_ms = 2000;     // soft per-statement time budget
  int pool_cap = 512;       // intermediate results kept per (kind, size)
};

struct CandidateSet {
  Statement statement;
  std::vector<std::pair<Program, int>> programs;  // program, executed label
  std::vector<int> consistent;                    // indices with label == statement.label
  std::vector<int> inconsistent;
  bool budget_exceeded = false;

  bool trainable() const { return !consistent.empty() && !inconsistent.empty(); }
};

// Typed bottom-up enumeration over (ValueKind, size) pools, seeded with the
// linked literals and all_rows. Every returned program type-checks, executes
// without error, and has a Bool root; duplicates removed by canonical print.
CandidateSet enumerate_candidates(const Statement& s, const Table& t, const LinkedEntities& ents,
                                  const SearchLimits& limits = {});

}  // namespace veritab
