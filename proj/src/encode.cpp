#include "veritab/encode.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "veritab/errors.hpp"

using nlohmann::json;

namespace veritab {

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  size_t i = 0;
  auto word_char = [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c >= 0x80;
  };
  while (i < text.size()) {
    unsigned char c = text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    size_t start = i;
    if (word_char(c)) {
      while (i < text.size() && word_char(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;  // punctuation: one char per token
    }
    out.push_back(Token{std::string(text.substr(start, i - start)), start, i});
  }
  return out;
}

int Vocab::id(const std::string& token) const {
  auto it = ids.find(token);
  return it == ids.end() ? unk : it->second;
}

Vocab Vocab::build(const std::vector<std::string>& lines, int min_freq) {
  std::map<std::string, int> freq;
  for (const auto& line : lines)
    for (const auto& tok : tokenize(normalize(line))) freq[tok.text]++;
  Vocab v;
  int next = 4;  // after CLS/SEP/UNK/PAD
  for (const auto& [tok, n] : freq)
    if (n >= min_freq) v.ids[tok] = next++;
  return v;
}

std::string Vocab::to_json() const {
  json j;
  j["specials"] = {{"cls", cls}, {"sep", sep}, {"unk", unk}, {"pad", pad}};
  j["tokens"] = ids;
  return j.dump();
}

Vocab Vocab::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Err::BadFormat, std::string("vocab: ") + e.what());
  }
  Vocab v;
  v.ids = j.at("tokens").get<std::map<std::string, int>>();
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  out << to_json() << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::BadFormat, "cannot open vocab " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void init_encoder_params(ParamStore& store, const std::string& prefix, int dim, int vocab_size,
                         std::mt19937_64& rng, bool with_segments) {
  store.add_randn(prefix + ".tok_emb", dim, vocab_size, rng, 0.1);
  store.add_randn(prefix + ".pos_mix", dim, dim, rng, 0.1);
  if (with_segments) {
    store.add_randn(prefix + ".seg_a", dim, 1, rng, 0.1);
    store.add_randn(prefix + ".seg_b", dim, 1, rng, 0.1);
  }
}

int import_external_embeddings(ParamStore& store, const std::string& prefix, const Vocab& vocab,
                               const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::BadFormat, "cannot open embeddings " + path);
  long count = 0, dim = 0;
  in >> count >> dim;
  ad::Mat& emb = store.at(prefix + ".tok_emb").value;
  if (dim != emb.rows())
    fail(Err::BadFormat, "embedding dim " + std::to_string(dim) + " != encoder dim " +
                             std::to_string(emb.rows()));
  int imported = 0;
  for (long i = 0; i < count; ++i) {
    std::string token;
    in >> token;
    std::vector<double> vec(static_cast<size_t>(dim));
    for (auto& x : vec) in >> x;
    if (!in) fail(Err::BadFormat, path + ": truncated at entry " + std::to_string(i));
    auto it = vocab.ids.find(token);
    if (it == vocab.ids.end()) continue;
    for (long r = 0; r < dim; ++r) emb(r, it->second) = vec[static_cast<size_t>(r)];
    ++imported;
  }
  return imported;
}

namespace {

// Contextual vectors for one id sequence. Position coordinate is local to
// the sequence; `segment` is added to every token when present.
std::vector<ad::Var> context_vectors(ParamBinder& bind, const std::string& prefix,
                                     const std::vector<int>& token_ids,
                                     std::optional<ad::Var> segment) {
  ad::Tape& tape = bind.tape();
  ad::Var emb = bind(prefix + ".tok_emb");
  ad::Var mix = bind(prefix + ".pos_mix");
  size_t n = token_ids.size();
  std::vector<ad::Var> out;
  out.reserve(n);
  for (size_t j = 0; j < n; ++j) {
    ad::Var e = tape.gather_cols(emb, {token_ids[j]});
    double c = n > 1 ? static_cast<double>(j) / static_cast<double>(n - 1) : 0.0;
    ad::Var ctx = tape.add(e, tape.scale(tape.matmul(mix, e), c));
    if (segment) ctx = tape.add(ctx, *segment);
    out.push_back(ctx);
  }
  return out;
}

std::vector<int> ids_of(const Vocab& vocab, const std::string& text) {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.id(normalize(tok.text)));
  return ids;
}

}  // namespace

ad::Var encode_pair(ParamBinder& bind, const std::string& prefix, const Vocab& vocab,
                    const std::string& a, const std::string& b) {
  std::vector<int> ids;
  ids.push_back(vocab.cls);
  auto a_ids = ids_of(vocab, a);
  if (a_ids.empty()) fail(Err::EmptyInput, "first segment has no tokens");
  ids.insert(ids.end(), a_ids.begin(), a_ids.end());
  ids.push_back(vocab.sep);
  auto b_ids = ids_of(vocab, b);
  ids.insert(ids.end(), b_ids.begin(), b_ids.end());
  auto ctx = context_vectors(bind, prefix, ids, std::nullopt);
  return bind.tape().mean(ctx);
}

DocEncoding encode_document(ParamBinder& bind, const std::string& prefix, const Vocab& vocab,
                            const std::vector<std::string>& sentences) {
  ad::Tape& tape = bind.tape();
  DocEncoding doc;
  doc.sentence_count = static_cast<int>(sentences.size());
  for (size_t i = 0; i < sentences.size(); ++i) {
    // 1-based sentence index: odd -> seg_a, even -> seg_b
    ad::Var seg = bind((i + 1) % 2 == 1 ? prefix + ".seg_a" : prefix + ".seg_b");
    auto toks = tokenize(sentences[i]);
    std::vector<int> ids;
    ids.push_back(vocab.cls);
    for (const auto& t : toks) ids.push_back(vocab.id(normalize(t.text)));
    ids.push_back(vocab.sep);
    auto ctx = context_vectors(bind, prefix, ids, seg);
    doc.cls.push_back(tape.mean(ctx));
    // drop CLS/SEP from the alignment; entity spans index real tokens
    doc.token_ctx.push_back(std::vector<ad::Var>(ctx.begin() + 1, ctx.end() - 1));
    doc.tokens.push_back(std::move(toks));
  }
  return doc;
}

ad::Var entity_vector(ad::Tape& tape, const DocEncoding& doc, int sentence, size_t begin,
                      size_t end) {
  if (sentence < 0 || sentence >= doc.sentence_count)
    fail(Err::SpanOutOfRange, "sentence " + std::to_string(sentence));
  std::vector<ad::Var> hit;
  const auto& toks = doc.tokens[static_cast<size_t>(sentence)];
  for (size_t j = 0; j < toks.size(); ++j)
    if (toks[j].begin < end && begin < toks[j].end)
      hit.push_back(doc.token_ctx[static_cast<size_t>(sentence)][j]);
  if (hit.empty())
    fail(Err::SpanOutOfRange, "span [" + std::to_string(begin) + ", " + std::to_string(end) +
                                  ") covers no token of sentence " + std::to_string(sentence));
  return tape.mean(hit);
}

std::string linearize_table(const Table& t, const Statement& s) {
  std::string out;
  for (int r = 0; r < t.row_count(); ++r) {
    for (int c = 0; c < t.col_count(); ++c) {
      if (!out.empty()) out += " ; ";
      out += "row " + std::to_string(r + 1) + "'s " + t.headers[static_cast<size_t>(c)] + " is " +
             t.at(r, c).raw;
    }
  }
  out += " . " + s.text;
  return out;
}

ad::Var encode_statement_table(ParamBinder& bind, const std::string& prefix, const Vocab& vocab,
                               const Table& t, const Statement& s) {
  return encode_pair(bind, prefix, vocab, linearize_table(t, s), "");
}

Eigen::VectorXd encode_pair_value(ParamStore& store, const std::string& prefix,
                                  const Vocab& vocab, const std::string& a,
                                  const std::string& b) {
  ad::Tape tape;
  ParamBinder bind(tape, store);
  ad::Var v = encode_pair(bind, prefix, vocab, a, b);
  return v.value().col(0);
}

}  // namespace veritab
