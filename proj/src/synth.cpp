#include "veritab/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"
#include "veritab/exec.hpp"
#include "veritab/verbalize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace veritab {

namespace {

const char* kSyllables[] = {"ka", "ro", "mi", "ta", "len", "sor", "vi", "na", "del", "bo"};
const char* kTeams[] = {"red", "blue", "green", "gold", "black", "white"};

struct Gen {
  std::mt19937_64 rng;

  int uniform(int lo, int hi) {  // inclusive
    return static_cast<int>(std::uniform_int_distribution<int>(lo, hi)(rng));
  }

  std::string name() {
    std::string out;
    int syllables = uniform(2, 3);
    for (int i = 0; i < syllables; ++i) out += kSyllables[uniform(0, 9)];
    return out;
  }

  Table table(const std::string& id, int rows) {
    std::vector<std::vector<std::string>> data;
    std::set<std::string> used;
    for (int r = 0; r < rows; ++r) {
      std::string player = name();
      while (used.count(player)) player = name();
      used.insert(player);
      data.push_back({player, kTeams[uniform(0, 3)], std::to_string(uniform(0, 20)),
                      std::to_string(uniform(0, 9))});
    }
    return make_table(id, "synthetic season results", {"player", "team", "score", "wins"},
                      std::move(data), id);
  }

  NodePtr lit_text(const std::string& s) {
    Literal l;
    l.kind = Literal::Kind::TextLit;
    l.text = s;
    return make_literal(l);
  }
  NodePtr lit_num(double v) {
    Literal l;
    l.kind = Literal::Kind::NumberLit;
    l.number = v;
    l.text = format_number(v);
    return make_literal(l);
  }
  NodePtr all_rows() {
    Literal l;
    l.kind = Literal::Kind::AllRows;
    l.text = "all_rows";
    return make_literal(l);
  }
  NodePtr op(const char* name, std::vector<NodePtr> children) {
    return make_operation(find_operator(name), std::move(children));
  }

  std::string team_in(const Table& t) {
    std::vector<std::string> teams;
    for (int r = 0; r < t.row_count(); ++r) {
      std::string v = t.at(r, 1).norm();
      if (std::find(teams.begin(), teams.end(), v) == teams.end()) teams.push_back(v);
    }
    return teams[static_cast<size_t>(uniform(0, static_cast<int>(teams.size()) - 1))];
  }

  int team_count(const Table& t, const std::string& team) {
    int n = 0;
    for (int r = 0; r < t.row_count(); ++r)
      if (t.at(r, 1).norm() == team) ++n;
    return n;
  }

  Program claim(const Table& t) {
    Program p;
    int shape = uniform(0, 4);
    bool want_true = uniform(0, 1) == 1;
    switch (shape) {
      case 0: {  // count of a team filter vs a number, plain or negated claim
        std::string team = team_in(t);
        int c = team_count(t, team);
        int n = want_true ? c : std::max(0, c + (uniform(0, 1) ? uniform(1, 3) : -uniform(1, c > 0 ? c : 1)));
        if (!want_true && n == c) n = c + 1;
        const char* cmp = uniform(0, 2) == 0 ? "unequal" : "equal";
        p.root = op(cmp, {op("count", {op("filter_eq", {all_rows(), lit_text("team"),
                                                        lit_text(team)})}),
                          lit_num(n)});
        break;
      }
      case 1: {  // aggregate of a numeric column vs a threshold
        const char* col = uniform(0, 1) ? "score" : "wins";
        const char* agg = uniform(0, 1) ? "max" : "sum";
        Program inner;
        inner.root = op(agg, {all_rows(), lit_text(col)});
        double v = execute(inner, t).first.num;
        bool use_greater = uniform(0, 1) == 1;
        int d = uniform(1, 3);
        double n;
        if (use_greater) n = want_true ? std::floor(v) - d : std::ceil(v) + d;
        else n = want_true ? std::ceil(v) + d : std::floor(v) - d;
        if (n < 0) n = want_true == use_greater ? 0 : n;  // keep thresholds sane
        p.root = op(use_greater ? "greater" : "less",
                    {op(agg, {all_rows(), lit_text(col)}), lit_num(n)});
        break;
      }
      case 2: {  // compare two team counts
        std::string t1 = team_in(t), t2 = team_in(t);
        int guard = 0;
        while (t2 == t1 && guard++ < 8) t2 = team_in(t);
        auto count_of = [&](const std::string& team) {
          return op("count", {op("filter_eq", {all_rows(), lit_text("team"), lit_text(team)})});
        };
        p.root = op("greater", {count_of(t1), count_of(t2)});
        break;
      }
      case 3: {  // player with the best score
        Program inner;
        inner.root = op("hop", {op("argmax", {all_rows(), lit_text("score")}), lit_text("player")});
        std::string best = execute(inner, t).first.text;
        std::string claimed = best;
        if (!want_true) {
          int r = uniform(0, t.row_count() - 1);
          claimed = t.at(r, 0).norm();
          if (claimed == best) claimed = t.at((r + 1) % t.row_count(), 0).norm();
        }
        const char* cmp = uniform(0, 2) == 0 ? "unequal" : "equal";
        p.root = op(cmp, {op("hop", {op("argmax", {all_rows(), lit_text("score")}),
                                     lit_text("player")}),
                          lit_text(normalize(claimed))});
        break;
      }
      default: {  // how many rows a team filter keeps
        std::string team = team_in(t);
        p.root = op(uniform(0, 1) ? "only" : "several",
                    {op("filter_eq", {all_rows(), lit_text("team"), lit_text(team)})});
        break;
      }
    }
    return p;
  }
};

// The claim text asserts the root sentence in its "is" form; when the
// program executes to false the verbalized root says "is not" and the claim
// flips it, producing a refuted statement.
std::string claim_text(const Program& p, const Table& t) {
  VerbalizedExecution v = verbalize(p, t);
  std::string root = v.sentences.back();
  size_t at = root.find(" is not ");
  if (at != std::string::npos) root = root.substr(0, at) + " is " + root.substr(at + 8);
  return root;
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  SynthCorpus corpus;
  Gen gen{std::mt19937_64(cfg.seed * 2654435761ULL + 97531ULL)};

  int made = 0;
  int table_idx = 0;
  while (made < cfg.pairs) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synt_%03d", table_idx++);
    Table t = gen.table(idbuf, gen.uniform(cfg.min_rows, cfg.max_rows));
    corpus.tables[t.id] = t;
    const Table& stored = corpus.tables[t.id];
    for (int k = 0; k < cfg.statements_per_table && made < cfg.pairs; ++k) {
      Program prog = gen.claim(stored);
      int label = execute_label(prog, stored);
      SynthExample ex;
      ex.prog = prog;
      ex.stmt.table_id = stored.id;
      ex.stmt.text = claim_text(prog, stored);
      ex.stmt.label = label;
      ex.stmt.tag = prog.op_count() <= 2 ? "simple" : "complex";
      ex.prog.source_statement = ex.stmt.text;
      corpus.examples.push_back(std::move(ex));
      ++made;
    }
  }
  return corpus;
}

void save_corpus(const std::string& dir, const SynthCorpus& corpus) {
  fs::create_directories(dir);
  save_tables_native((fs::path(dir) / "tables").string(), corpus.tables);
  std::vector<Statement> stmts;
  for (const auto& ex : corpus.examples) stmts.push_back(ex.stmt);
  save_statements_jsonl((fs::path(dir) / "statements.jsonl").string(), stmts);
  std::ofstream progs((fs::path(dir) / "programs.jsonl").string());
  for (size_t i = 0; i < corpus.examples.size(); ++i) {
    progs << json{{"statement", i},
                  {"table_id", corpus.examples[i].stmt.table_id},
                  {"program", print_program(corpus.examples[i].prog)}}
                 .dump()
          << "\n";
  }
}

}  // namespace veritab
