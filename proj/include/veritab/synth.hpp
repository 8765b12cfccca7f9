#pragma once

#include <map>
#include <string>
#include <vector>

#include "veritab/program.hpp"
#include "veritab/table.hpp"

namespace veritab {

// Generated corpus where every statement's label is decided by a shallow
// program over its table, written in the claim's "is" form; refuted
// statements assert something whose program executes to false.
struct SynthConfig {
  int pairs = 200;
  unsigned seed = 0;
  int min_rows = 4;
  int max_rows = 8;
  int statements_per_table = 5;
};

struct SynthExample {
  Statement stmt;   // tag = "simple" (M <= 2) or "complex"
  Program prog;     // gold evidence program; label == execute_label(prog)
};

struct SynthCorpus {
  std::map<std::string, Table> tables;
  std::vector<SynthExample> examples;
};

SynthCorpus generate_corpus(const SynthConfig& cfg);

// tables/<id>.json (native), statements.jsonl, programs.jsonl keyed by
// statement index.
void save_corpus(const std::string& dir, const SynthCorpus& corpus);

}  // namespace veritab
