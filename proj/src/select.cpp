#include "veritab/select.hpp"

#include <algorithm>
#include <cmath>

#include "veritab/errors.hpp"

namespace veritab {

void init_selector_params(ParamStore& store, const SelectorConfig& cfg, int vocab_size,
                          std::mt19937_64& rng) {
  init_encoder_params(store, "sel", cfg.dim, vocab_size, rng, /*with_segments=*/false);
  store.add_randn("sel.w_r", 1, cfg.dim, rng, 0.1);
}

ad::Var score_var(ParamBinder& bind, const Vocab& vocab, const Statement& s, const Program& z) {
  ad::Var h = encode_pair(bind, "sel", vocab, s.text, print_program(z));
  ad::Var logit = bind.tape().matmul(bind("sel.w_r"), h);
  return bind.tape().sigmoid(logit);
}

double score(const Statement& s, const Program& z, ParamStore& store, const Vocab& vocab) {
  ad::Tape tape;
  ParamBinder bind(tape, store);
  return score_var(bind, vocab, s, z).scalar();
}

RankedCandidates rank_candidates(const Statement& s, const CandidateSet& cands, ParamStore& store,
                                 const Vocab& vocab) {
  RankedCandidates rc;
  rc.consistent = cands.consistent;
  rc.inconsistent = cands.inconsistent;
  for (const auto& [prog, label] : cands.programs) rc.probs.push_back(score(s, prog, store, vocab));
  return rc;
}

namespace {

int argmax_in(const std::vector<double>& probs, const std::vector<int>& subset) {
  int best = subset.front();
  for (int i : subset)
    if (probs[i] > probs[best]) best = i;
  return best;
}

}  // namespace

double margin_loss(const RankedCandidates& rc, double gamma) {
  if (rc.consistent.empty()) fail(Err::NoPositive, "no label-consistent candidate");
  if (rc.inconsistent.empty()) fail(Err::NoNegative, "no label-inconsistent candidate");
  double p_pos = rc.probs[argmax_in(rc.probs, rc.consistent)];
  double p_neg = rc.probs[argmax_in(rc.probs, rc.inconsistent)];
  return std::max(p_neg - p_pos + gamma, 0.0);
}

double ce_loss(const RankedCandidates& rc) {
  double loss = 0;
  for (int i : rc.consistent) loss -= std::log(rc.probs[i]);
  return loss;
}

int select_top_index(const std::vector<double>& probs, const std::vector<std::string>& printed) {
  if (probs.empty()) fail(Err::EmptyCandidateSet, "no candidates to select from");
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] > probs[best] || (probs[i] == probs[best] && printed[i] < printed[best]))
      best = i;
  }
  return best;
}

Program select_top(const Statement& s, const CandidateSet& cands, ParamStore& store,
                   const Vocab& vocab) {
  if (cands.programs.empty()) fail(Err::EmptyCandidateSet, "statement: " + s.text);
  auto rc = rank_candidates(s, cands, store, vocab);
  std::vector<std::string> printed;
  for (const auto& [prog, label] : cands.programs) printed.push_back(print_program(prog));
  return cands.programs[static_cast<size_t>(select_top_index(rc.probs, printed))].first;
}

double selection_accuracy(const std::vector<CandidateSet>& sets, ParamStore& store,
                          const Vocab& vocab) {
  if (sets.empty()) return 0;
  int correct = 0;
  for (const auto& cs : sets) {
    if (cs.programs.empty()) continue;  // counts as incorrect
    auto rc = rank_candidates(cs.statement, cs, store, vocab);
    std::vector<std::string> printed;
    for (const auto& [prog, label] : cs.programs) printed.push_back(print_program(prog));
    int top = select_top_index(rc.probs, printed);
    if (cs.programs[static_cast<size_t>(top)].second == cs.statement.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(sets.size());
}

std::optional<ad::Var> statement_loss_var(ParamBinder& bind, const Vocab& vocab,
                                          const CandidateSet& cands, const SelectorConfig& cfg) {
  ad::Tape& tape = bind.tape();
  if (cfg.use_margin) {
    if (cands.consistent.empty() || cands.inconsistent.empty()) return std::nullopt;
    // z'_pos / z'_neg are the current-parameter argmaxes of each partition
    std::vector<ad::Var> probs(cands.programs.size(), ad::Var{});
    auto prob_of = [&](int i) {
      if (probs[static_cast<size_t>(i)].tape == nullptr)
        probs[static_cast<size_t>(i)] =
            score_var(bind, vocab, cands.statement, cands.programs[static_cast<size_t>(i)].first);
      return probs[static_cast<size_t>(i)];
    };
    int best_pos = cands.consistent.front();
    for (int i : cands.consistent)
      if (prob_of(i).scalar() > prob_of(best_pos).scalar()) best_pos = i;
    int best_neg = cands.inconsistent.front();
    for (int i : cands.inconsistent)
      if (prob_of(i).scalar() > prob_of(best_neg).scalar()) best_neg = i;
    ad::Var delta = tape.sub(prob_of(best_neg), prob_of(best_pos));
    return tape.hinge(tape.add(delta, tape.constant(cfg.gamma)));
  }
  // cross entropy over the label-consistent candidates: -log sigmoid(logit)
  // computed as softplus(-logit) for stability
  if (cands.consistent.empty()) return std::nullopt;
  std::vector<ad::Var> terms;
  for (int i : cands.consistent) {
    const Program& z = cands.programs[static_cast<size_t>(i)].first;
    ad::Var h = encode_pair(bind, "sel", vocab, cands.statement.text, print_program(z));
    ad::Var logit = tape.matmul(bind("sel.w_r"), h);
    terms.push_back(tape.softplus(tape.scale(logit, -1.0)));
  }
  return tape.add_n(terms);
}

SelectorTrainResult train_selector(const std::vector<CandidateSet>& sets, ParamStore& store,
                                   const Vocab& vocab, const SelectorConfig& cfg) {
  if (sets.empty()) fail(Err::EmptyDataset, "no candidate sets");
  SelectorTrainResult result;
  Adam opt;
  opt.lr = cfg.lr;
  std::mt19937_64 rng(static_cast<unsigned long long>(cfg.seed) * 7919 + 17);
  std::vector<int> order(sets.size());
  for (size_t i = 0; i < sets.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    int counted = 0;
    int skipped = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch_size)) {
      size_t stop = std::min(order.size(), at + static_cast<size_t>(cfg.batch_size));
      store.zero_grad();
      int batch_n = 0;
      double batch_loss = 0;
      for (size_t k = at; k < stop; ++k) {
        const CandidateSet& cs = sets[static_cast<size_t>(order[k])];
        ad::Tape tape;
        ParamBinder bind(tape, store);
        auto loss = statement_loss_var(bind, vocab, cs, cfg);
        if (!loss) {
          ++skipped;
          continue;
        }
        tape.backward(*loss);
        batch_loss += loss->scalar();
        ++batch_n;
        bind.accumulate();
      }
      if (batch_n == 0) continue;
      // batch loss is the mean of per-statement losses
      for (auto& [name, e] : store.tensors) e.grad /= static_cast<double>(batch_n);
      opt.step(store);
      epoch_loss += batch_loss;
      counted += batch_n;
    }
    result.epoch_loss.push_back(counted ? epoch_loss / counted : 0.0);
    if (epoch == cfg.epochs - 1) result.skipped_statements = skipped;
  }
  result.train_accuracy = selection_accuracy(sets, store, vocab);
  return result;
}

}  // namespace veritab
