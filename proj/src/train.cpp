#include "veritab/train.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "veritab/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace veritab {

std::string TrainConfig::to_json() const {
  json j{{"seed", seed},
         {"epochs", epochs},
         {"lr", lr},
         {"batch_size", batch_size},
         {"dim", dim},
         {"att_dim", att_dim},
         {"layers", layers},
         {"freeze_steps", freeze_steps},
         {"patience", patience},
         {"val_fraction", val_fraction},
         {"no_graph", no_graph},
         {"gate_updated", gate_updated},
         {"min_token_freq", min_token_freq},
         {"stop_at_train_accuracy", stop_at_train_accuracy}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Err::BadFormat, std::string("config: ") + e.what());
  }
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.dim = j.value("dim", c.dim);
  c.att_dim = j.value("att_dim", c.att_dim);
  c.layers = j.value("layers", c.layers);
  c.freeze_steps = j.value("freeze_steps", c.freeze_steps);
  c.patience = j.value("patience", c.patience);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.no_graph = j.value("no_graph", c.no_graph);
  c.gate_updated = j.value("gate_updated", c.gate_updated);
  c.min_token_freq = j.value("min_token_freq", c.min_token_freq);
  c.stop_at_train_accuracy = j.value("stop_at_train_accuracy", c.stop_at_train_accuracy);
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::BadFormat, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void TrainMetrics::write_csv(const std::string& path) const {
  std::ofstream out(path);
  out << "epoch,train_loss,train_accuracy,val_accuracy\n";
  for (const auto& r : rows)
    out << r.epoch << "," << format_number(r.train_loss) << ","
        << format_number(r.train_accuracy) << "," << format_number(r.val_accuracy) << "\n";
}

void TrainMetrics::write_jsonl(const std::string& path) const {
  std::ofstream out(path);
  for (const auto& r : rows)
    out << json{{"epoch", r.epoch},
                {"train_loss", r.train_loss},
                {"train_accuracy", r.train_accuracy},
                {"val_accuracy", r.val_accuracy}}
               .dump()
        << "\n";
}

void VerifierModel::save(const std::string& dir) const {
  fs::create_directories(dir);
  store.save((fs::path(dir) / "params.bin").string(), (fs::path(dir) / "manifest.json").string());
  vocab.save((fs::path(dir) / "vocab.json").string());
  json g{{"dim", gvat.dim},
         {"att_dim", gvat.att_dim},
         {"layers", gvat.layers},
         {"gate_updated", gvat.gate_updated},
         {"no_graph", gvat.no_graph}};
  std::ofstream((fs::path(dir) / "model.json").string()) << g.dump(2) << "\n";
}

VerifierModel VerifierModel::load(const std::string& dir) {
  VerifierModel m;
  m.store = ParamStore::load((fs::path(dir) / "params.bin").string(),
                             (fs::path(dir) / "manifest.json").string());
  m.vocab = Vocab::load((fs::path(dir) / "vocab.json").string());
  std::ifstream in((fs::path(dir) / "model.json").string());
  if (!in) fail(Err::BadFormat, "cannot open model.json under " + dir);
  json g;
  in >> g;
  m.gvat.dim = g.value("dim", 32);
  m.gvat.att_dim = g.value("att_dim", 12);
  m.gvat.layers = g.value("layers", 1);
  m.gvat.gate_updated = g.value("gate_updated", false);
  m.gvat.no_graph = g.value("no_graph", false);
  return m;
}

namespace {

struct Prepared {
  const VerifyExample* ex = nullptr;
  VerbalizedExecution verb;
  GraphStructure structure;
};

Prepared prepare(const VerifyExample& ex) {
  Prepared p;
  p.ex = &ex;
  p.verb = verbalize(ex.prog, *ex.table);
  p.structure = build_graph_structure(ex.prog, p.verb);
  return p;
}

ad::Var example_logit(ParamBinder& bind, const Vocab& vocab, const GvatConfig& gcfg,
                      const Prepared& p) {
  DocEncoding doc = encode_document(bind, "doc", vocab, p.verb.sentences);
  ad::Var h_st = encode_statement_table(bind, "st", vocab, *p.ex->table, p.ex->stmt);
  EvidenceGraph graph = build_graph(bind, p.structure, doc, h_st);
  return verification_logit(bind, "gvat", graph, gcfg);
}

double accuracy_of(std::vector<Prepared>& set, ParamStore& store, const Vocab& vocab,
                   const GvatConfig& gcfg) {
  if (set.empty()) return 0;
  int correct = 0;
  for (auto& p : set) {
    ad::Tape tape;
    ParamBinder bind(tape, store);
    double logit = example_logit(bind, vocab, gcfg, p).scalar();
    int pred = logit > 0 ? 1 : 0;
    if (pred == p.ex->stmt.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

}  // namespace

double predict_probability(VerifierModel& model, const VerifyExample& ex) {
  Prepared p = prepare(ex);
  ad::Tape tape;
  ParamBinder bind(tape, model.store);
  double logit = example_logit(bind, model.vocab, model.gvat, p).scalar();
  return 1.0 / (1.0 + std::exp(-logit));
}

TrainMetrics train_verifier(const std::vector<VerifyExample>& examples, const TrainConfig& cfg,
                            VerifierModel& model) {
  if (examples.empty()) fail(Err::EmptyDataset, "no training examples");

  // vocabulary over everything the encoders will see
  std::vector<std::string> corpus;
  std::vector<Prepared> prepared;
  prepared.reserve(examples.size());
  for (const auto& ex : examples) {
    prepared.push_back(prepare(ex));
    corpus.push_back(ex.stmt.text);
    corpus.push_back(linearize_table(*ex.table, ex.stmt));
    for (const auto& s : prepared.back().verb.sentences) corpus.push_back(s);
  }
  model.vocab = Vocab::build(corpus, cfg.min_token_freq);

  model.gvat.dim = cfg.dim;
  model.gvat.att_dim = cfg.att_dim;
  model.gvat.layers = cfg.layers;
  model.gvat.gate_updated = cfg.gate_updated;
  model.gvat.no_graph = cfg.no_graph;

  std::mt19937_64 rng(static_cast<unsigned long long>(cfg.seed) * 6364136223846793005ULL + 1442695040888963407ULL);
  model.store = ParamStore();
  init_encoder_params(model.store, "doc", cfg.dim, model.vocab.size(), rng, /*segments=*/true);
  init_encoder_params(model.store, "st", cfg.dim, model.vocab.size(), rng, /*segments=*/false);
  init_gvat_params(model.store, "gvat", model.gvat, rng);

  // train / val split
  std::vector<int> order(prepared.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);
  size_t val_n = static_cast<size_t>(cfg.val_fraction * static_cast<double>(order.size()));
  std::vector<Prepared> val_set, train_set;
  for (size_t i = 0; i < order.size(); ++i) {
    Prepared& p = prepared[static_cast<size_t>(order[i])];
    if (i < val_n) val_set.push_back(std::move(p));
    else train_set.push_back(std::move(p));
  }
  if (train_set.empty()) fail(Err::EmptyDataset, "validation fraction leaves no training data");

  TrainMetrics metrics;
  metrics.train_count = static_cast<int>(train_set.size());
  metrics.val_count = static_cast<int>(val_set.size());

  Adam opt;
  opt.lr = cfg.lr;
  long steps_done = 0;
  if (cfg.freeze_steps > 0) model.store.set_frozen("st.", true);

  std::vector<int> train_order(train_set.size());
  for (size_t i = 0; i < train_order.size(); ++i) train_order[i] = static_cast<int>(i);

  int stale = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_order.begin(), train_order.end(), rng);
    double loss_sum = 0;
    int loss_n = 0;
    for (size_t at = 0; at < train_order.size(); at += static_cast<size_t>(cfg.batch_size)) {
      size_t stop = std::min(train_order.size(), at + static_cast<size_t>(cfg.batch_size));
      model.store.zero_grad();
      int batch_n = static_cast<int>(stop - at);
      for (size_t k = at; k < stop; ++k) {
        Prepared& p = train_set[static_cast<size_t>(train_order[k])];
        ad::Tape tape;
        ParamBinder bind(tape, model.store);
        ad::Var logit = example_logit(bind, model.vocab, model.gvat, p);
        ad::Var loss = tape.bce_with_logits(logit, p.ex->stmt.label);
        tape.backward(loss);
        bind.accumulate(1.0 / static_cast<double>(batch_n));
        loss_sum += loss.scalar();
        ++loss_n;
      }
      opt.step(model.store);
      ++steps_done;
      if (cfg.freeze_steps > 0 && steps_done == cfg.freeze_steps)
        model.store.set_frozen("st.", false);
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_n ? loss_sum / loss_n : 0.0;
    row.train_accuracy = accuracy_of(train_set, model.store, model.vocab, model.gvat);
    row.val_accuracy = accuracy_of(val_set, model.store, model.vocab, model.gvat);
    metrics.rows.push_back(row);
    metrics.final_train_accuracy = row.train_accuracy;

    if (row.val_accuracy > metrics.best_val_accuracy) {
      metrics.best_val_accuracy = row.val_accuracy;
      metrics.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    if (cfg.patience > 0 && stale >= cfg.patience) break;
    if (cfg.stop_at_train_accuracy > 0 && row.train_accuracy >= cfg.stop_at_train_accuracy) break;
  }
  return metrics;
}

EvalResult evaluate(VerifierModel& model, const std::vector<VerifyExample>& examples,
                    int jobs) {
  EvalResult result;
  std::vector<char> ok_flags(examples.size(), 0);
  auto judge = [&](size_t i) {
    double p = predict_probability(model, examples[i]);
    int pred = p > 0.5 ? 1 : 0;
    ok_flags[i] = pred == examples[i].stmt.label ? 1 : 0;
  };
  if (jobs <= 1) {
    for (size_t i = 0; i < examples.size(); ++i) judge(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < jobs; ++t)
      workers.emplace_back([&] {
        size_t i;
        while ((i = next.fetch_add(1)) < examples.size()) judge(i);
      });
    for (auto& w : workers) w.join();
  }
  std::map<std::string, std::pair<int, int>> tag_counts;  // tag -> (correct, n)
  int correct = 0;
  for (size_t i = 0; i < examples.size(); ++i) {
    bool ok = ok_flags[i] != 0;
    correct += ok ? 1 : 0;
    if (!examples[i].stmt.tag.empty()) {
      auto& [c, n] = tag_counts[examples[i].stmt.tag];
      c += ok ? 1 : 0;
      n += 1;
    }
  }
  result.count = static_cast<int>(examples.size());
  result.accuracy = examples.empty() ? 0 : static_cast<double>(correct) / result.count;
  for (const auto& [tag, cn] : tag_counts)
    result.by_tag[tag] = {static_cast<double>(cn.first) / cn.second, cn.second};
  return result;
}

std::string EvalResult::to_json() const {
  json tags = json::object();
  for (const auto& [tag, acc_n] : by_tag)
    tags[tag] = json{{"accuracy", acc_n.first}, {"count", acc_n.second}};
  return json{{"accuracy", accuracy}, {"count", count}, {"tags", tags}}.dump(2);
}

std::string render_report(const std::string& metrics_json) {
  json j;
  try {
    j = json::parse(metrics_json);
  } catch (const json::exception& e) {
    fail(Err::BadFormat, std::string("metrics: ") + e.what());
  }
  std::ostringstream out;
  out << "# Verification report\n\n";
  out << "| split | accuracy | examples |\n";
  out << "|-------|----------|----------|\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", j.value("accuracy", 0.0));
  out << "| overall | " << buf << " | " << j.value("count", 0) << " |\n";
  if (j.contains("tags")) {
    for (const auto& [tag, entry] : j.at("tags").items()) {
      std::snprintf(buf, sizeof(buf), "%.4f", entry.value("accuracy", 0.0));
      out << "| " << tag << " | " << buf << " | " << entry.value("count", 0) << " |\n";
    }
  }
  return out.str();
}

}  // namespace veritab
