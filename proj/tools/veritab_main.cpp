#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "veritab/errors.hpp"
#include "veritab/exec.hpp"
#include "veritab/gvat.hpp"
#include "veritab/search.hpp"
#include "veritab/select.hpp"
#include "veritab/synth.hpp"
#include "veritab/table.hpp"
#include "veritab/train.hpp"
#include "veritab/verbalize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace veritab;

namespace {

TableFormat table_format_of(const std::string& name, const std::string& path) {
  if (name == "tabfact") return TableFormat::tabfact;
  if (name == "native") return TableFormat::native;
  // infer from the extension of the file, or of the files inside a directory
  auto is_json = [](const fs::path& p) { return p.extension() == ".json"; };
  fs::path p(path);
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && is_json(e.path())) return TableFormat::native;
    return TableFormat::tabfact;
  }
  return is_json(p) ? TableFormat::native : TableFormat::tabfact;
}

StatementFormat stmt_format_of(const std::string& name) {
  return name == "tabfact" ? StatementFormat::tabfact : StatementFormat::jsonl;
}

// Deterministic parallel map: slot i always receives result i.
template <typename F>
void parallel_for(int n, int jobs, F f) {
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t)
    threads.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < n) f(i);
    });
  for (auto& th : threads) th.join();
}

const Table& single_table(const std::map<std::string, Table>& tables) {
  return tables.begin()->second;
}

std::vector<CandidateSet> search_all(const std::vector<Statement>& stmts,
                                     const std::map<std::string, Table>& tables,
                                     const SearchLimits& limits, int jobs) {
  std::vector<CandidateSet> sets(stmts.size());
  parallel_for(static_cast<int>(stmts.size()), jobs, [&](int i) {
    const Statement& s = stmts[static_cast<size_t>(i)];
    const Table& t = tables.at(s.table_id);
    sets[static_cast<size_t>(i)] = enumerate_candidates(s, t, link_entities(s, t), limits);
  });
  return sets;
}

struct ProgramRow {
  int statement = -1;
  std::string table_id;
  std::string program;
};

std::vector<ProgramRow> load_program_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::BadFormat, "cannot open " + path);
  std::vector<ProgramRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(Err::BadFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    rows.push_back({j.value("statement", -1), j.value("table_id", std::string()),
                    j.at("program").get<std::string>()});
  }
  return rows;
}

std::vector<VerifyExample> build_examples(const std::map<std::string, Table>& tables,
                                          const std::vector<Statement>& stmts,
                                          const std::string& programs_path) {
  auto rows = load_program_rows(programs_path);
  std::vector<VerifyExample> out;
  int skipped = 0;
  for (const auto& row : rows) {
    if (row.statement < 0 || row.statement >= static_cast<int>(stmts.size())) {
      ++skipped;
      continue;
    }
    VerifyExample ex;
    ex.stmt = stmts[static_cast<size_t>(row.statement)];
    ex.table = &tables.at(ex.stmt.table_id);
    ex.prog = parse_program(row.program);
    out.push_back(std::move(ex));
  }
  if (skipped) std::cerr << "skipped " << skipped << " program rows without a statement\n";
  if (out.empty()) fail(Err::EmptyDataset, "no (statement, program) pairs in " + programs_path);
  return out;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --tables/--statements fall back to $VERITAB_DATA_ROOT/{tables,statements.jsonl}.
void fill_data_paths(std::string& tables, std::string& statements) {
  const char* root = std::getenv("VERITAB_DATA_ROOT");
  if (tables.empty() && root) tables = (fs::path(root) / "tables").string();
  if (statements.empty() && root) statements = (fs::path(root) / "statements.jsonl").string();
  if (tables.empty()) throw UsageError("--tables required (or set VERITAB_DATA_ROOT)");
  if (statements.empty()) throw UsageError("--statements required (or set VERITAB_DATA_ROOT)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"table fact verification over executable programs"};
  app.require_subcommand(1);

  // ---- exec ----------------------------------------------------------------
  auto* cmd_exec = app.add_subcommand("exec", "execute a program against a table");
  std::string x_table, x_format = "auto", x_program;
  bool x_trace = false;
  cmd_exec->add_option("--table", x_table, "table file")->required();
  cmd_exec->add_option("--format", x_format, "tabfact|native (default: by extension)");
  cmd_exec->add_option("--program", x_program, "program text")->required();
  cmd_exec->add_flag("--trace", x_trace, "print the execution trace as JSON");

  // ---- verbalize -----------------------------------------------------------
  auto* cmd_verb = app.add_subcommand("verbalize", "render evidence sentences for a program");
  std::string v_table, v_format = "auto", v_program;
  bool v_spans = false, v_raw = false, v_drop_root = false;
  cmd_verb->add_option("--table", v_table)->required();
  cmd_verb->add_option("--format", v_format, "tabfact|native");
  cmd_verb->add_option("--program", v_program)->required();
  cmd_verb->add_flag("--spans", v_spans, "emit JSON with entity spans");
  cmd_verb->add_flag("--raw-case", v_raw, "keep original cell casing in answers");
  cmd_verb->add_flag("--drop-root", v_drop_root, "omit the root operation's sentence");

  // ---- search --------------------------------------------------------------
  auto* cmd_search = app.add_subcommand("search", "enumerate candidate programs");
  std::string s_table, s_format = "auto", s_statement, s_statements, s_stmt_format = "jsonl",
              s_triggers;
  int s_label = 1, s_jobs = 1;
  SearchLimits s_limits;
  cmd_search->add_option("--table", s_table, "table file (single-statement mode)");
  cmd_search->add_option("--format", s_format);
  cmd_search->add_option("--statement", s_statement, "statement text");
  cmd_search->add_option("--label", s_label, "gold label for the partition (default 1)");
  cmd_search->add_option("--tables", s_table, "tables path (batch mode)");
  cmd_search->add_option("--statements", s_statements, "statements file (batch mode)");
  cmd_search->add_option("--stmt-format", s_stmt_format, "tabfact|jsonl");
  cmd_search->add_option("--max-ops", s_limits.max_ops);
  cmd_search->add_option("--max-candidates", s_limits.max_candidates);
  cmd_search->add_option("--budget-ms", s_limits.budget_ms);
  cmd_search->add_option("--pool-cap", s_limits.pool_cap);
  cmd_search->add_option("--triggers", s_triggers, "trigger lexicon JSON to load");
  cmd_search->add_option("--jobs", s_jobs, "parallel statements (default 1)");

  // ---- graph ---------------------------------------------------------------
  auto* cmd_graph = app.add_subcommand("graph", "emit the evidence graph for a program");
  std::string g_table, g_format = "auto", g_statement, g_program;
  bool g_dot = false;
  cmd_graph->add_option("--table", g_table)->required();
  cmd_graph->add_option("--format", g_format);
  cmd_graph->add_option("--statement", g_statement)->required();
  cmd_graph->add_option("--program", g_program)->required();
  cmd_graph->add_flag("--dot", g_dot, "emit DOT instead of JSON");

  // ---- rank-train ----------------------------------------------------------
  auto* cmd_rt = app.add_subcommand("rank-train", "train the program selector");
  std::string rt_tables, rt_table_format = "auto", rt_statements, rt_stmt_format = "jsonl",
              rt_loss = "margin", rt_out;
  SelectorConfig rt_cfg;
  SearchLimits rt_limits;
  int rt_jobs = 1, rt_seed = 0;
  cmd_rt->add_option("--tables", rt_tables);
  cmd_rt->add_option("--table-format", rt_table_format);
  cmd_rt->add_option("--statements", rt_statements);
  cmd_rt->add_option("--stmt-format", rt_stmt_format);
  cmd_rt->add_option("--loss", rt_loss, "margin|ce");
  cmd_rt->add_option("--gamma", rt_cfg.gamma, "margin width (default 0.15)");
  cmd_rt->add_option("--epochs", rt_cfg.epochs);
  cmd_rt->add_option("--lr", rt_cfg.lr);
  cmd_rt->add_option("--dim", rt_cfg.dim);
  cmd_rt->add_option("--batch-size", rt_cfg.batch_size);
  cmd_rt->add_option("--seed", rt_seed)->required();
  cmd_rt->add_option("--max-ops", rt_limits.max_ops);
  cmd_rt->add_option("--max-candidates", rt_limits.max_candidates);
  cmd_rt->add_option("--budget-ms", rt_limits.budget_ms);
  cmd_rt->add_option("--jobs", rt_jobs);
  cmd_rt->add_option("--out", rt_out, "output model directory")->required();

  // ---- rank-eval -----------------------------------------------------------
  auto* cmd_re = app.add_subcommand("rank-eval", "selection accuracy of a trained selector");
  std::string re_tables, re_table_format = "auto", re_statements, re_stmt_format = "jsonl",
              re_model, re_emit;
  SearchLimits re_limits;
  int re_jobs = 1, re_seed = 0;
  cmd_re->add_option("--tables", re_tables);
  cmd_re->add_option("--table-format", re_table_format);
  cmd_re->add_option("--statements", re_statements);
  cmd_re->add_option("--stmt-format", re_stmt_format);
  cmd_re->add_option("--model", re_model, "model directory from rank-train")->required();
  cmd_re->add_option("--seed", re_seed)->required();
  cmd_re->add_option("--max-ops", re_limits.max_ops);
  cmd_re->add_option("--max-candidates", re_limits.max_candidates);
  cmd_re->add_option("--budget-ms", re_limits.budget_ms);
  cmd_re->add_option("--jobs", re_jobs);
  cmd_re->add_option("--emit-programs", re_emit, "write selected programs JSONL here");

  // ---- verify-train --------------------------------------------------------
  auto* cmd_vt = app.add_subcommand("verify-train", "train the graph verification network");
  std::string vt_tables, vt_table_format = "auto", vt_statements, vt_stmt_format = "jsonl",
              vt_programs, vt_out, vt_config;
  TrainConfig vt_cfg;
  bool vt_no_graph = false, vt_gate_updated = false;
  cmd_vt->add_option("--tables", vt_tables);
  cmd_vt->add_option("--table-format", vt_table_format);
  cmd_vt->add_option("--statements", vt_statements);
  cmd_vt->add_option("--stmt-format", vt_stmt_format);
  cmd_vt->add_option("--programs", vt_programs, "programs JSONL (selected or gold)")->required();
  cmd_vt->add_option("--config", vt_config, "JSON config file (flags override it)");
  cmd_vt->add_option("--seed", vt_cfg.seed)->required();
  cmd_vt->add_option("--epochs", vt_cfg.epochs);
  cmd_vt->add_option("--lr", vt_cfg.lr);
  cmd_vt->add_option("--batch-size", vt_cfg.batch_size);
  cmd_vt->add_option("--dim", vt_cfg.dim, "feature width F");
  cmd_vt->add_option("--heads-dim", vt_cfg.att_dim, "attention width L");
  cmd_vt->add_option("--layers", vt_cfg.layers);
  cmd_vt->add_option("--freeze-statement-table-steps", vt_cfg.freeze_steps);
  cmd_vt->add_option("--patience", vt_cfg.patience);
  cmd_vt->add_option("--val-fraction", vt_cfg.val_fraction);
  cmd_vt->add_option("--stop-at-train-acc", vt_cfg.stop_at_train_accuracy);
  cmd_vt->add_flag("--no-graph-attention", vt_no_graph, "ablation: gate the initial features");
  cmd_vt->add_flag("--gate-updated", vt_gate_updated, "gate with the propagated node K-1");
  cmd_vt->add_option("--out", vt_out)->required();

  // ---- verify-eval ---------------------------------------------------------
  auto* cmd_ve = app.add_subcommand("verify-eval", "evaluate a trained verifier");
  std::string ve_tables, ve_table_format = "auto", ve_statements, ve_stmt_format = "jsonl",
              ve_programs, ve_model, ve_metrics_out;
  int ve_seed = 0, ve_jobs = 1;
  cmd_ve->add_option("--tables", ve_tables);
  cmd_ve->add_option("--table-format", ve_table_format);
  cmd_ve->add_option("--statements", ve_statements);
  cmd_ve->add_option("--stmt-format", ve_stmt_format);
  cmd_ve->add_option("--programs", ve_programs)->required();
  cmd_ve->add_option("--model", ve_model)->required();
  cmd_ve->add_option("--seed", ve_seed)->required();
  cmd_ve->add_option("--jobs", ve_jobs);
  cmd_ve->add_option("--metrics-out", ve_metrics_out, "write EvalResult JSON here");

  // ---- report --------------------------------------------------------------
  auto* cmd_report = app.add_subcommand("report", "render a metrics JSON as markdown");
  std::string rp_metrics;
  cmd_report->add_option("--metrics", rp_metrics, "metrics JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems exit 1, --help exits 0
  }

  try {
    if (*cmd_exec) {
      auto tables = load_tables(x_table, table_format_of(x_format, x_table));
      const Table& t = single_table(tables);
      Program p = parse_program(x_program);
      auto [root, trace] = execute(p, t);
      std::cout << root.describe() << "\n";
      if (x_trace) std::cout << trace_to_json(trace) << "\n";
    } else if (*cmd_verb) {
      auto tables = load_tables(v_table, table_format_of(v_format, v_table));
      const Table& t = single_table(tables);
      Program p = parse_program(v_program);
      VerbalizeOptions opts;
      opts.raw_case = v_raw;
      opts.drop_root = v_drop_root;
      VerbalizedExecution verb = verbalize(p, t, opts);
      if (v_spans) {
        std::cout << spans_to_json(verb) << "\n";
      } else {
        for (const auto& s : verb.sentences) std::cout << s << "\n";
      }
    } else if (*cmd_search) {
      if (!s_triggers.empty()) load_trigger_lexicon(s_triggers);
      auto tables = load_tables(s_table, table_format_of(s_format, s_table));
      std::vector<Statement> stmts;
      if (!s_statements.empty()) {
        stmts = load_statements(s_statements, stmt_format_of(s_stmt_format), tables);
      } else {
        if (s_statement.empty()) fail(Err::BadFormat, "need --statement or --statements");
        Statement s;
        s.table_id = single_table(tables).id;
        s.text = s_statement;
        s.label = s_label;
        stmts.push_back(std::move(s));
      }
      auto sets = search_all(stmts, tables, s_limits, s_jobs);
      for (size_t i = 0; i < sets.size(); ++i) {
        for (size_t k = 0; k < sets[i].programs.size(); ++k) {
          const auto& [prog, label] = sets[i].programs[k];
          bool consistent = label == sets[i].statement.label;
          std::cout << json{{"statement", i},
                            {"program", print_program(prog)},
                            {"label", label},
                            {"consistent", consistent}}
                           .dump()
                    << "\n";
        }
        if (sets[i].budget_exceeded)
          std::cerr << "statement " << i << ": search budget exceeded\n";
      }
    } else if (*cmd_graph) {
      auto tables = load_tables(g_table, table_format_of(g_format, g_table));
      const Table& t = single_table(tables);
      Program p = parse_program(g_program);
      VerbalizedExecution verb = verbalize(p, t);
      GraphStructure gs = build_graph_structure(p, verb);
      gs.labels[static_cast<size_t>(gs.K - 1)] =
          "statement-table: " + normalize(g_statement);
      std::cout << (g_dot ? graph_to_dot(gs) : graph_to_json(gs)) << "\n";
    } else if (*cmd_rt) {
      fill_data_paths(rt_tables, rt_statements);
      auto tables = load_tables(rt_tables, table_format_of(rt_table_format, rt_tables));
      auto stmts = load_statements(rt_statements, stmt_format_of(rt_stmt_format), tables);
      auto sets = search_all(stmts, tables, rt_limits, rt_jobs);
      std::vector<std::string> corpus;
      for (const auto& cs : sets) {
        corpus.push_back(cs.statement.text);
        for (const auto& [prog, label] : cs.programs) corpus.push_back(print_program(prog));
      }
      Vocab vocab = Vocab::build(corpus, 2);
      rt_cfg.use_margin = rt_loss != "ce";
      rt_cfg.seed = rt_seed;
      ParamStore store;
      std::mt19937_64 rng(static_cast<unsigned long long>(rt_seed) * 40503ULL + 9973ULL);
      init_selector_params(store, rt_cfg, vocab.size(), rng);
      auto result = train_selector(sets, store, vocab, rt_cfg);
      fs::create_directories(rt_out);
      store.save((fs::path(rt_out) / "params.bin").string(),
                 (fs::path(rt_out) / "manifest.json").string());
      vocab.save((fs::path(rt_out) / "vocab.json").string());
      std::ofstream((fs::path(rt_out) / "selector.json").string())
          << json{{"dim", rt_cfg.dim},
                  {"gamma", rt_cfg.gamma},
                  {"loss", rt_loss},
                  {"seed", rt_seed},
                  {"epochs", rt_cfg.epochs},
                  {"lr", rt_cfg.lr}}
                 .dump(2)
          << "\n";
      std::ofstream metrics((fs::path(rt_out) / "metrics.json").string());
      metrics << json{{"train_selection_accuracy", result.train_accuracy},
                      {"skipped_statements", result.skipped_statements},
                      {"epoch_loss", result.epoch_loss}}
                     .dump(2)
              << "\n";
      std::cout << "train_selection_accuracy " << format_number(result.train_accuracy) << "\n";
    } else if (*cmd_re) {
      fill_data_paths(re_tables, re_statements);
      auto tables = load_tables(re_tables, table_format_of(re_table_format, re_tables));
      auto stmts = load_statements(re_statements, stmt_format_of(re_stmt_format), tables);
      ParamStore store = ParamStore::load((fs::path(re_model) / "params.bin").string(),
                                          (fs::path(re_model) / "manifest.json").string());
      Vocab vocab = Vocab::load((fs::path(re_model) / "vocab.json").string());
      auto sets = search_all(stmts, tables, re_limits, re_jobs);
      double acc = selection_accuracy(sets, store, vocab);
      std::cout << "selection_accuracy " << format_number(acc) << "\n";
      if (!re_emit.empty()) {
        std::ofstream out(re_emit);
        for (size_t i = 0; i < sets.size(); ++i) {
          if (sets[i].programs.empty()) continue;
          Program top = select_top(sets[i].statement, sets[i], store, vocab);
          out << json{{"statement", i},
                      {"table_id", sets[i].statement.table_id},
                      {"program", print_program(top)}}
                     .dump()
              << "\n";
        }
      }
    } else if (*cmd_vt) {
      if (!vt_config.empty()) {
        // file supplies defaults; explicitly passed flags win
        TrainConfig base = TrainConfig::load(vt_config);
        auto passed = [&](const char* flag) { return cmd_vt->count(flag) > 0; };
        if (passed("--seed")) base.seed = vt_cfg.seed;
        if (passed("--epochs")) base.epochs = vt_cfg.epochs;
        if (passed("--lr")) base.lr = vt_cfg.lr;
        if (passed("--batch-size")) base.batch_size = vt_cfg.batch_size;
        if (passed("--dim")) base.dim = vt_cfg.dim;
        if (passed("--heads-dim")) base.att_dim = vt_cfg.att_dim;
        if (passed("--layers")) base.layers = vt_cfg.layers;
        if (passed("--freeze-statement-table-steps")) base.freeze_steps = vt_cfg.freeze_steps;
        if (passed("--patience")) base.patience = vt_cfg.patience;
        if (passed("--val-fraction")) base.val_fraction = vt_cfg.val_fraction;
        if (passed("--stop-at-train-acc"))
          base.stop_at_train_accuracy = vt_cfg.stop_at_train_accuracy;
        vt_cfg = base;
      }
      vt_cfg.no_graph = vt_no_graph || vt_cfg.no_graph;
      vt_cfg.gate_updated = vt_gate_updated || vt_cfg.gate_updated;
      fill_data_paths(vt_tables, vt_statements);
      auto tables = load_tables(vt_tables, table_format_of(vt_table_format, vt_tables));
      auto stmts = load_statements(vt_statements, stmt_format_of(vt_stmt_format), tables);
      auto examples = build_examples(tables, stmts, vt_programs);
      VerifierModel model;
      TrainMetrics metrics = train_verifier(examples, vt_cfg, model);
      fs::create_directories(vt_out);
      model.save(vt_out);
      metrics.write_csv((fs::path(vt_out) / "metrics.csv").string());
      metrics.write_jsonl((fs::path(vt_out) / "metrics.jsonl").string());
      std::ofstream((fs::path(vt_out) / "config.json").string()) << vt_cfg.to_json() << "\n";
      std::ofstream((fs::path(vt_out) / "summary.json").string())
          << json{{"final_train_accuracy", metrics.final_train_accuracy},
                  {"best_val_accuracy", metrics.best_val_accuracy},
                  {"best_epoch", metrics.best_epoch},
                  {"epochs_run", metrics.rows.size()},
                  {"train_count", metrics.train_count},
                  {"val_count", metrics.val_count}}
                 .dump(2)
          << "\n";
      std::cout << "final_train_accuracy " << format_number(metrics.final_train_accuracy) << "\n"
                << "best_val_accuracy " << format_number(metrics.best_val_accuracy) << "\n";
    } else if (*cmd_ve) {
      fill_data_paths(ve_tables, ve_statements);
      auto tables = load_tables(ve_tables, table_format_of(ve_table_format, ve_tables));
      auto stmts = load_statements(ve_statements, stmt_format_of(ve_stmt_format), tables);
      auto examples = build_examples(tables, stmts, ve_programs);
      VerifierModel model = VerifierModel::load(ve_model);
      EvalResult result = evaluate(model, examples, ve_jobs);
      std::cout << "accuracy " << format_number(result.accuracy) << " on " << result.count
                << " examples\n";
      for (const auto& [tag, acc_n] : result.by_tag)
        std::cout << "accuracy[" << tag << "] " << format_number(acc_n.first) << " on "
                  << acc_n.second << "\n";
      if (!ve_metrics_out.empty()) std::ofstream(ve_metrics_out) << result.to_json() << "\n";
    } else if (*cmd_report) {
      std::ifstream in(rp_metrics);
      if (!in) fail(Err::BadFormat, "cannot open " + rp_metrics);
      std::stringstream ss;
      ss << in.rdbuf();
      std::cout << render_report(ss.str());
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
