#pragma once

#include <array>
#include <string>
#include <vector>

#include "veritab/encode.hpp"
#include "veritab/verbalize.hpp"

namespace veritab {

// Typed evidence graph. Node layout: Prog-Exec nodes 0..M-1 (post-order),
// entity nodes M..K-2, statement-table node K-1. Three symmetric adjacency
// masks with zero diagonals:
//   a[0]: program-tree parent/child edges between Prog-Exec nodes
//   a[1]: Prog-Exec <-> its own argument/answer entities
//   a[2]: statement-table node <-> every Prog-Exec node
struct GraphStructure {
  int M = 0, E = 0, K = 0;
  std::array<ad::Mat, 3> a;
  std::vector<std::string> labels;           // node captions for export
  std::vector<char> types;                   // 'p', 'e', 's'
  std::vector<std::pair<int, EntitySpan>> entities;  // (owner node, span)
};

GraphStructure build_graph_structure(const Program& p, const VerbalizedExecution& v);

struct EvidenceGraph {
  GraphStructure structure;
  std::vector<ad::Var> h;  // K initial node features, each F x 1
};

// Initial features: Prog-Exec i = pooled sentence vector i, entities = span
// vectors from the document encoding, node K-1 = h_st.
// Throws CountMismatch when doc.sentence_count != M.
EvidenceGraph build_graph(ParamBinder& bind, const GraphStructure& structure,
                          const DocEncoding& doc, ad::Var h_st);

struct GvatConfig {
  int dim = 64;       // F
  int att_dim = 16;   // L
  int layers = 1;
  bool gate_updated = false;   // gate with post-propagation H_{K-1}
  bool no_graph = false;       // ablation: skip propagation entirely
  double leaky_slope = 0.2;
};

// Tensors under <prefix>: u1..u3 (L x F), w1..w3 (F x F), a1..a3 (2L x 1),
// fuse_w (F x 3F), fuse_b (F x 1), cls_w (1 x 2F), cls_b (1 x 1).
void init_gvat_params(ParamStore& store, const std::string& prefix, const GvatConfig& cfg,
                      std::mt19937_64& rng);

// One masked-attention update of every node. When alpha_out is non-null it
// receives the dense K x K attention matrix per head (zeros off-mask).
std::vector<ad::Var> propagate(ParamBinder& bind, const std::string& prefix,
                               const EvidenceGraph& g, const GvatConfig& cfg,
                               std::array<ad::Mat, 3>* alpha_out = nullptr);

// Eq. of the gate: p_i = sigmoid(h_gate . h_new_i) over Prog-Exec nodes,
// H_final = sum p_i h_new_i.
std::pair<ad::Var, std::vector<ad::Var>> gated_aggregate(ParamBinder& bind,
                                                         const std::vector<ad::Var>& h_new,
                                                         ad::Var h_gate, int M);

ad::Var classify_logit(ParamBinder& bind, const std::string& prefix, ad::Var h_final,
                       ad::Var h_statement_table);

// Full forward pass to the verification logit; set cfg.no_graph for the
// ablation that gates the initial features directly.
ad::Var verification_logit(ParamBinder& bind, const std::string& prefix, const EvidenceGraph& g,
                           const GvatConfig& cfg);

std::string graph_to_json(const GraphStructure& g);
GraphStructure graph_from_json(const std::string& text);
std::string graph_to_dot(const GraphStructure& g);

}  // namespace veritab
