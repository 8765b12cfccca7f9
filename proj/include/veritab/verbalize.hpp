#pragma once

#include <string>
#include <vector>

#include "veritab/exec.hpp"
#include "veritab/program.hpp"
#include "veritab/table.hpp"

namespace veritab {

enum class ResultClass { string_number, boolean, view_row };

// One generation template per operator. operation_template describes the
// operation itself (used when it appears as a parent's argument);
// result_template adds the executed answer. Slots: [verb_arg1..3], [ans] for
// scalar answers, [is_or_not] for the true/false alternation, [rows] for
// 1-based row indices.
struct TemplateEntry {
  std::string op;
  std::string operation_template;
  std::string result_template;
  ResultClass result_class;
};

const std::vector<TemplateEntry>& template_registry();
const TemplateEntry* find_template(std::string_view op);

struct EntitySpan {
  size_t begin = 0, end = 0;  // character range within the sentence
  std::string text;
  enum class Source { argument, answer } source = Source::argument;
  int node = 0;  // post-order index of the operation the entity belongs to
};

struct VerbalizedExecution {
  // Evidence sentences v_1..v_M in post-order of execution.
  std::vector<std::string> sentences;
  // Entities whose source operation is sentence i: its own literal arguments
  // plus its own scalar answer.
  std::vector<std::vector<EntitySpan>> own_spans;
  // Every entity mention embedded in sentence i, including those inherited
  // from nested argument phrases.
  std::vector<std::vector<EntitySpan>> all_spans;

  int sentence_count() const { return static_cast<int>(sentences.size()); }
};

struct VerbalizeOptions {
  bool raw_case = false;   // render cell-derived strings with original casing
  bool drop_root = false;  // omit the root operation's sentence
};

// Executes the program and renders one evidence sentence per operation.
// Nested operations appear inside their parent through their
// operation_template phrase. Pure function of (p, t, opts).
VerbalizedExecution verbalize(const Program& p, const Table& t, VerbalizeOptions opts = {});

// All entity spans embedded in sentence `node` (see all_spans).
std::vector<EntitySpan> entity_spans(const VerbalizedExecution& v, int node);

std::string spans_to_json(const VerbalizedExecution& v);

}  // namespace veritab
