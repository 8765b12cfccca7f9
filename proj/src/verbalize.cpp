#include "veritab/verbalize.hpp"

#include <map>
#include <optional>

#include "json.hpp"
#include "veritab/errors.hpp"

using nlohmann::json;

namespace veritab {

namespace {

std::vector<TemplateEntry> build_templates() {
  using R = ResultClass;
  std::vector<TemplateEntry> t;
  auto def = [&](const char* op, const char* operation, const char* result, R klass) {
    t.push_back(TemplateEntry{op, operation, result, klass});
  };

  // string / number results
  def("count", "the number of [verb_arg1]", "the number of [verb_arg1] is [ans]", R::string_number);
  def("avg", "average [verb_arg1] where column [verb_arg2]",
      "average [verb_arg1] where column [verb_arg2] is [ans]", R::string_number);
  def("sum", "sum [verb_arg1] where column [verb_arg2]",
      "sum [verb_arg1] where column [verb_arg2] is [ans]", R::string_number);
  def("max", "maximum [verb_arg1] where column [verb_arg2]",
      "maximum [verb_arg1] where column [verb_arg2] is [ans]", R::string_number);
  def("min", "minimum [verb_arg1] where column [verb_arg2]",
      "minimum [verb_arg1] where column [verb_arg2] is [ans]", R::string_number);
  def("add", "sum of [verb_arg1] and [verb_arg2]",
      "sum of [verb_arg1] and [verb_arg2] is [ans]", R::string_number);
  def("diff", "difference of [verb_arg1] and [verb_arg2]",
      "difference of [verb_arg1] and [verb_arg2] is [ans]", R::string_number);
  def("uniq_num", "the unique value of [verb_arg1] in column [verb_arg2]",
      "the unique value of [verb_arg1] in column [verb_arg2] is [ans]", R::string_number);
  def("uniq_string", "the unique value of [verb_arg1] in column [verb_arg2]",
      "the unique value of [verb_arg1] in column [verb_arg2] is [ans]", R::string_number);
  def("most_freq", "the most frequent value of [verb_arg1] in column [verb_arg2]",
      "the most frequent value of [verb_arg1] in column [verb_arg2] is [ans]", R::string_number);
  def("half", "half of value in [verb_arg1]", "half of value in [verb_arg1] is [ans]",
      R::string_number);
  def("one_third", "one third of value in [verb_arg1]",
      "one third of value in [verb_arg1] is [ans]", R::string_number);
  def("num_hop", "the first value of [verb_arg1] where column [verb_arg2]",
      "the first value of [verb_arg1] where column [verb_arg2] is [ans]", R::string_number);
  def("hop", "the value of [verb_arg1] where column [verb_arg2]",
      "the value of [verb_arg1] where column [verb_arg2] is [ans]", R::string_number);

  // boolean results
  def("only", "number of rows in [verb_arg1]", "number of rows in [verb_arg1] [is_or_not] one",
      R::boolean);
  def("several", "number of rows in [verb_arg1]",
      "number of rows in [verb_arg1] [is_or_not] more than one", R::boolean);
  def("zero", "the [verb_arg1]", "the [verb_arg1] [is_or_not] zero", R::boolean);
  def("none", "the [verb_arg1]", "the [verb_arg1] [is_or_not] none", R::boolean);
  def("first", "the first row [verb_arg2] in [verb_arg1]",
      "the first row in [verb_arg1] [is_or_not] row [verb_arg2]", R::boolean);
  def("second", "the second row [verb_arg2] in [verb_arg1]",
      "the second row in [verb_arg1] [is_or_not] row [verb_arg2]", R::boolean);
  def("third", "the third row [verb_arg2] in [verb_arg1]",
      "the third row in [verb_arg1] [is_or_not] row [verb_arg2]", R::boolean);
  def("fourth", "the fourth row [verb_arg2] in [verb_arg1]",
      "the fourth row in [verb_arg1] [is_or_not] row [verb_arg2]", R::boolean);
  def("and", "[verb_arg1] and [verb_arg2]", "[verb_arg1] and [verb_arg2] [is_or_not] true",
      R::boolean);
  def("or", "[verb_arg1] or [verb_arg2]", "[verb_arg1] or [verb_arg2] [is_or_not] true",
      R::boolean);
  def("greater", "[verb_arg1] greater than [verb_arg2]",
      "[verb_arg1] [is_or_not] greater than [verb_arg2]", R::boolean);
  def("less", "[verb_arg1] less than [verb_arg2]", "[verb_arg1] [is_or_not] less than [verb_arg2]",
      R::boolean);
  def("equal", "[verb_arg1] equal to [verb_arg2]", "[verb_arg1] [is_or_not] equal to [verb_arg2]",
      R::boolean);
  def("unequal", "[verb_arg1] not equal to [verb_arg2]",
      "[verb_arg1] [is_or_not] not equal to [verb_arg2]", R::boolean);
  def("with", "[verb_arg1] where column [verb_arg2] with value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] with value [verb_arg3] [is_or_not] true", R::boolean);
  def("without", "[verb_arg1] where column [verb_arg2] without value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] without value [verb_arg3] [is_or_not] true",
      R::boolean);
  def("all_eq", "[verb_arg1] where column [verb_arg2] all equal to value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] all equal to value [verb_arg3] [is_or_not] true",
      R::boolean);
  def("all_greater", "[verb_arg1] where column [verb_arg2] all greater than value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] all greater than value [verb_arg3] [is_or_not] true",
      R::boolean);
  def("all_less", "[verb_arg1] where column [verb_arg2] all less than value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] all less than value [verb_arg3] [is_or_not] true",
      R::boolean);
  def("all_greater_or_equal",
      "[verb_arg1] where column [verb_arg2] all greater than or equal to value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] all greater than or equal to value [verb_arg3] "
      "[is_or_not] true",
      R::boolean);
  def("all_less_or_equal",
      "[verb_arg1] where column [verb_arg2] all less than or equal to value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] all less than or equal to value [verb_arg3] "
      "[is_or_not] true",
      R::boolean);
  def("before", "[verb_arg1] before [verb_arg2]", "[verb_arg1] [is_or_not] before [verb_arg2]",
      R::boolean);
  def("after", "[verb_arg1] after [verb_arg2]", "[verb_arg1] [is_or_not] after [verb_arg2]",
      R::boolean);

  // view / row results
  def("argmax", "row where column [verb_arg2] with maximum value in [verb_arg1]",
      "row where column [verb_arg2] with maximum value in [verb_arg1] is row [rows]",
      R::view_row);
  def("argmin", "row where column [verb_arg2] with minimum value in [verb_arg1]",
      "row where column [verb_arg2] with minimum value in [verb_arg1] is row [rows]",
      R::view_row);
  def("filter_eq", "[verb_arg1] where column [verb_arg2] equal to [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] equal to [verb_arg3] is row [rows]", R::view_row);
  def("filter_greater", "[verb_arg1] where column [verb_arg2] greater than value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] greater than value [verb_arg3] is row [rows]",
      R::view_row);
  def("filter_less", "[verb_arg1] where column [verb_arg2] less than value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] less than value [verb_arg3] is row [rows]",
      R::view_row);
  def("filter_greater_or_equal",
      "[verb_arg1] where column [verb_arg2] greater than or equal to value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] greater than or equal to value [verb_arg3] is row "
      "[rows]",
      R::view_row);
  def("filter_less_or_equal",
      "[verb_arg1] where column [verb_arg2] less than or equal to value [verb_arg3]",
      "[verb_arg1] where column [verb_arg2] less than or equal to value [verb_arg3] is row "
      "[rows]",
      R::view_row);
  return t;
}

}  // namespace

const std::vector<TemplateEntry>& template_registry() {
  static const std::vector<TemplateEntry> reg = build_templates();
  return reg;
}

const TemplateEntry* find_template(std::string_view op) {
  for (const auto& e : template_registry())
    if (e.op == op) return &e;
  return nullptr;
}

namespace {

// A rendered fragment plus the entity spans inside it (offsets relative to
// the fragment's own text).
struct Phrase {
  std::string text;
  std::vector<EntitySpan> spans;
};

void append_text(Phrase& dst, std::string_view s) { dst.text += s; }

void append_phrase(Phrase& dst, const Phrase& src) {
  size_t off = dst.text.size();
  dst.text += src.text;
  for (EntitySpan s : src.spans) {
    s.begin += off;
    s.end += off;
    dst.spans.push_back(std::move(s));
  }
}

void append_entity(Phrase& dst, const std::string& s, EntitySpan::Source source, int node) {
  EntitySpan span;
  span.begin = dst.text.size();
  span.end = span.begin + s.size();
  span.text = s;
  span.source = source;
  span.node = node;
  dst.text += s;
  dst.spans.push_back(std::move(span));
}

struct AnswerFill {
  std::optional<Phrase> ans;  // scalar answers only
  std::string is_or_not;
  std::string rows;
};

Phrase instantiate(const std::string& tmpl, const std::vector<Phrase>& args,
                   const AnswerFill& fill) {
  Phrase out;
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '[') {
      out.text.push_back(tmpl[i++]);
      continue;
    }
    size_t close = tmpl.find(']', i);
    std::string slot = tmpl.substr(i + 1, close - i - 1);
    if (slot == "verb_arg1" && args.size() > 0) append_phrase(out, args[0]);
    else if (slot == "verb_arg2" && args.size() > 1) append_phrase(out, args[1]);
    else if (slot == "verb_arg3" && args.size() > 2) append_phrase(out, args[2]);
    else if (slot == "ans" && fill.ans) append_phrase(out, *fill.ans);
    else if (slot == "is_or_not") append_text(out, fill.is_or_not);
    else if (slot == "rows") append_text(out, fill.rows);
    else out.text += tmpl.substr(i, close - i + 1);  // leave unknown slots visible
    i = close + 1;
  }
  return out;
}

struct Verbalizer {
  const Table& table;
  VerbalizeOptions opts;
  std::map<std::vector<int>, const TraceRecord*> by_path;
  VerbalizedExecution out;
  int counter = 0;

  Phrase literal_phrase(const Literal& lit, int node) {
    Phrase p;
    switch (lit.kind) {
      case Literal::Kind::AllRows:
        append_text(p, "all rows");
        break;
      case Literal::Kind::NumberLit:
        append_entity(p, format_number(lit.number), EntitySpan::Source::argument, node);
        break;
      case Literal::Kind::ColumnRef:
      case Literal::Kind::TextLit:
        append_entity(p, lit.text, EntitySpan::Source::argument, node);
        break;
    }
    return p;
  }

  std::string render_scalar(const Value& v) const {
    if (v.kind == ValueKind::Number) return format_number(v.num);
    return opts.raw_case ? v.text : normalize(v.text);
  }

  static std::string render_rows(const Value& v) {
    if (v.kind == ValueKind::Row) return std::to_string(v.row + 1);
    if (v.view.empty()) return "none";
    std::string out;
    for (size_t i = 0; i < v.view.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(v.view[i] + 1);
    }
    return out;
  }

  Phrase render(const NodePtr& n, std::vector<int>& path) {
    std::vector<std::optional<Phrase>> argp(n->children.size());
    for (size_t i = 0; i < n->children.size(); ++i) {
      if (!n->children[i]->is_literal()) {
        path.push_back(static_cast<int>(i));
        argp[i] = render(n->children[i], path);
        path.pop_back();
      }
    }
    int idx = counter++;
    std::vector<Phrase> args;
    for (size_t i = 0; i < n->children.size(); ++i) {
      if (argp[i]) args.push_back(std::move(*argp[i]));
      else args.push_back(literal_phrase(n->children[i]->lit, idx));
    }

    const TemplateEntry* te = find_template(n->op->name);
    if (!te) fail(Err::MissingTemplate, n->op->name);
    auto it = by_path.find(path);
    const Value& result = it->second->result;

    AnswerFill fill;
    switch (te->result_class) {
      case ResultClass::boolean:
        fill.is_or_not = result.truth ? "is" : "is not";
        break;
      case ResultClass::string_number: {
        Phrase ans;
        append_entity(ans, render_scalar(result), EntitySpan::Source::answer, idx);
        fill.ans = std::move(ans);
        break;
      }
      case ResultClass::view_row:
        fill.rows = render_rows(result);
        break;
    }

    Phrase sentence = instantiate(te->result_template, args, fill);
    out.sentences.push_back(sentence.text);
    std::vector<EntitySpan> own;
    for (const auto& s : sentence.spans)
      if (s.node == idx) own.push_back(s);
    out.own_spans.push_back(std::move(own));
    out.all_spans.push_back(std::move(sentence.spans));

    return instantiate(te->operation_template, args, AnswerFill{});
  }
};

}  // namespace

VerbalizedExecution verbalize(const Program& p, const Table& t, VerbalizeOptions opts) {
  auto [root, trace] = execute(p, t);
  (void)root;
  Verbalizer v{t, opts};
  for (const auto& rec : trace.records) v.by_path[rec.path] = &rec;
  std::vector<int> path;
  v.render(p.root, path);
  if (opts.drop_root && v.out.sentence_count() > 0) {
    v.out.sentences.pop_back();
    v.out.own_spans.pop_back();
    v.out.all_spans.pop_back();
  }
  return std::move(v.out);
}

std::vector<EntitySpan> entity_spans(const VerbalizedExecution& v, int node) {
  if (node < 0 || node >= v.sentence_count())
    fail(Err::SpanOutOfRange, "sentence " + std::to_string(node));
  return v.all_spans[node];
}

std::string spans_to_json(const VerbalizedExecution& v) {
  json j;
  j["sentences"] = v.sentences;
  auto dump_spans = [](const std::vector<std::vector<EntitySpan>>& groups) {
    json out = json::array();
    for (const auto& group : groups) {
      json g = json::array();
      for (const auto& s : group)
        g.push_back(json{{"begin", s.begin},
                         {"end", s.end},
                         {"text", s.text},
                         {"source", s.source == EntitySpan::Source::argument ? "argument" : "answer"},
                         {"node", s.node}});
      out.push_back(std::move(g));
    }
    return out;
  };
  j["own_spans"] = dump_spans(v.own_spans);
  j["all_spans"] = dump_spans(v.all_spans);
  return j.dump();
}

}  // namespace veritab
