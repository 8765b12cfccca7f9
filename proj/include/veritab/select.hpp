#pragma once

#include <optional>
#include <string>
#include <vector>

#include "veritab/encode.hpp"
#include "veritab/search.hpp"

namespace veritab {

// Selector tensors: its own encoder under "sel" plus the scoring head
// "sel.w_r" (1 x F). gamma is the hinge margin.
struct SelectorConfig {
  int dim = 64;
  double gamma = 0.15;
  double lr = 1e-3;
  int epochs = 30;
  int batch_size = 8;
  int seed = 0;
  bool use_margin = true;  // false -> cross-entropy baseline
};

void init_selector_params(ParamStore& store, const SelectorConfig& cfg, int vocab_size,
                          std::mt19937_64& rng);

// sigmoid(w_r . encode_pair(statement, printed program)).
double score(const Statement& s, const Program& z, ParamStore& store, const Vocab& vocab);

struct RankedCandidates {
  std::vector<double> probs;  // sigmoid outputs, strictly in (0, 1)
  std::vector<int> consistent;
  std::vector<int> inconsistent;
};

RankedCandidates rank_candidates(const Statement& s, const CandidateSet& cands, ParamStore& store,
                                 const Vocab& vocab);

// max(p(top inconsistent) - p(top consistent) + gamma, 0).
// Throws NoPositive / NoNegative when a partition side is empty.
double margin_loss(const RankedCandidates& rc, double gamma);

// -sum over label-consistent candidates of log p; empty set gives 0.
double ce_loss(const RankedCandidates& rc);

// Argmax probability over all candidates; ties broken by the smaller
// canonical program text. No label access.
int select_top_index(const std::vector<double>& probs, const std::vector<std::string>& printed);
Program select_top(const Statement& s, const CandidateSet& cands, ParamStore& store,
                   const Vocab& vocab);

// Fraction of statements whose top program executes to the statement label;
// empty candidate sets count as incorrect.
double selection_accuracy(const std::vector<CandidateSet>& sets, ParamStore& store,
                          const Vocab& vocab);

struct SelectorTrainResult {
  std::vector<double> epoch_loss;
  double train_accuracy = 0;
  int skipped_statements = 0;  // margin loss without both partitions
};

// Trains on the candidate sets in place (store must hold selector tensors).
SelectorTrainResult train_selector(const std::vector<CandidateSet>& sets, ParamStore& store,
                                   const Vocab& vocab, const SelectorConfig& cfg);

// Tape versions used by training and the gradient-fidelity checks.
ad::Var score_var(ParamBinder& bind, const Vocab& vocab, const Statement& s, const Program& z);
std::optional<ad::Var> statement_loss_var(ParamBinder& bind, const Vocab& vocab,
                                          const CandidateSet& cands, const SelectorConfig& cfg);

}  // namespace veritab
