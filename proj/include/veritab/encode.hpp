#pragma once

#include <optional>
#include <string>
#include <vector>

#include "veritab/params.hpp"
#include "veritab/table.hpp"
#include "veritab/verbalize.hpp"

namespace veritab {

struct Token {
  std::string text;
  size_t begin = 0, end = 0;  // char range in the source string
};

// Whitespace tokenizer with punctuation split off as single-char tokens.
std::vector<Token> tokenize(std::string_view text);

struct Vocab {
  std::map<std::string, int> ids;  // regular tokens, dense after the specials
  int cls = 0, sep = 1, unk = 2, pad = 3;

  int size() const { return 4 + static_cast<int>(ids.size()); }
  int id(const std::string& token) const;

  // Builds from corpus lines; tokens below min_freq map to UNK.
  static Vocab build(const std::vector<std::string>& lines, int min_freq = 2);
  std::string to_json() const;
  static Vocab from_json(const std::string& text);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);
};

// Trainable encoder tensors under `prefix`: <prefix>.tok_emb (F x V),
// <prefix>.pos_mix (F x F) and, when with_segments, <prefix>.seg_a/.seg_b
// (F x 1). Stands in for the pretrained encoders behind the same interface.
void init_encoder_params(ParamStore& store, const std::string& prefix, int dim, int vocab_size,
                         std::mt19937_64& rng, bool with_segments);

// Replaces embedding columns from a word2vec-style text file:
// first line "<count> <dim>", then "<token> v1 .. vF" per line.
// Tokens absent from the vocab are ignored; returns how many were imported.
int import_external_embeddings(ParamStore& store, const std::string& prefix, const Vocab& vocab,
                               const std::string& path);

// Contextual vector of token j: emb + c_j * (pos_mix @ emb) + segment, where
// c_j is the position within its sequence scaled to [0, 1].
// encode_pair pools the sequence [CLS] tokens(a) [SEP] tokens(b).
ad::Var encode_pair(ParamBinder& bind, const std::string& prefix, const Vocab& vocab,
                    const std::string& a, const std::string& b);

struct DocEncoding {
  int sentence_count = 0;
  std::vector<ad::Var> cls;                      // one pooled vector per sentence
  std::vector<std::vector<ad::Var>> token_ctx;   // contextual vectors per sentence
  std::vector<std::vector<Token>> tokens;        // alignment back to char ranges
};

// Document-style encoding: each sentence gets [CLS] ... [SEP] with segment
// embedding seg_a when its 1-based index is odd and seg_b when even.
DocEncoding encode_document(ParamBinder& bind, const std::string& prefix, const Vocab& vocab,
                            const std::vector<std::string>& sentences);

// Mean of the contextual vectors of tokens intersecting [begin, end) of
// sentence `sentence`; SpanOutOfRange if the span misses every token.
ad::Var entity_vector(ad::Tape& tape, const DocEncoding& doc, int sentence, size_t begin,
                      size_t end);

// Horizontal linearization: "row 1's h is c ; ... . <statement>".
std::string linearize_table(const Table& t, const Statement& s);

ad::Var encode_statement_table(ParamBinder& bind, const std::string& prefix, const Vocab& vocab,
                               const Table& t, const Statement& s);

// Frozen-parameter convenience evaluation.
Eigen::VectorXd encode_pair_value(ParamStore& store, const std::string& prefix,
                                  const Vocab& vocab, const std::string& a, const std::string& b);

}  // namespace veritab
