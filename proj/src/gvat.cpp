#include "veritab/gvat.hpp"

#include "json.hpp"
#include "veritab/errors.hpp"

using nlohmann::json;

namespace veritab {

GraphStructure build_graph_structure(const Program& p, const VerbalizedExecution& v) {
  GraphStructure g;
  g.M = v.sentence_count();

  // post-order index of every operation node, then tree edges between them
  std::vector<std::pair<int, int>> tree_edges;  // (child idx, parent idx)
  int counter = 0;
  auto walk = [&](auto&& self, const NodePtr& n) -> int {
    std::vector<int> child_ids;
    for (const auto& c : n->children)
      if (!c->is_literal()) child_ids.push_back(self(self, c));
    int idx = counter++;
    for (int c : child_ids) tree_edges.emplace_back(c, idx);
    return idx;
  };
  walk(walk, p.root);
  if (counter != g.M)
    fail(Err::CountMismatch, "program has " + std::to_string(counter) + " operations, " +
                                 std::to_string(g.M) + " sentences");

  for (int i = 0; i < g.M; ++i)
    for (const auto& span : v.own_spans[static_cast<size_t>(i)])
      g.entities.emplace_back(i, span);
  g.E = static_cast<int>(g.entities.size());
  g.K = g.M + g.E + 1;

  for (auto& m : g.a) m = ad::Mat::Zero(g.K, g.K);
  for (auto [c, par] : tree_edges) {
    g.a[0](c, par) = 1;
    g.a[0](par, c) = 1;
  }
  for (int e = 0; e < g.E; ++e) {
    int owner = g.entities[static_cast<size_t>(e)].first;
    int node = g.M + e;
    g.a[1](owner, node) = 1;
    g.a[1](node, owner) = 1;
  }
  for (int i = 0; i < g.M; ++i) {
    g.a[2](i, g.K - 1) = 1;
    g.a[2](g.K - 1, i) = 1;
  }

  for (int i = 0; i < g.M; ++i) {
    g.labels.push_back(v.sentences[static_cast<size_t>(i)]);
    g.types.push_back('p');
  }
  for (const auto& [owner, span] : g.entities) {
    g.labels.push_back(span.text);
    g.types.push_back('e');
  }
  g.labels.push_back("statement-table");
  g.types.push_back('s');
  return g;
}

EvidenceGraph build_graph(ParamBinder& bind, const GraphStructure& structure,
                          const DocEncoding& doc, ad::Var h_st) {
  if (doc.sentence_count != structure.M)
    fail(Err::CountMismatch, "document encodes " + std::to_string(doc.sentence_count) +
                                 " sentences, graph expects " + std::to_string(structure.M));
  EvidenceGraph g;
  g.structure = structure;
  for (int i = 0; i < structure.M; ++i) g.h.push_back(doc.cls[static_cast<size_t>(i)]);
  for (const auto& [owner, span] : structure.entities)
    g.h.push_back(entity_vector(bind.tape(), doc, owner, span.begin, span.end));
  g.h.push_back(h_st);
  return g;
}

void init_gvat_params(ParamStore& store, const std::string& prefix, const GvatConfig& cfg,
                      std::mt19937_64& rng) {
  for (int d = 1; d <= 3; ++d) {
    std::string n = std::to_string(d);
    store.add_randn(prefix + ".u" + n, cfg.att_dim, cfg.dim, rng, 0.1);
    store.add_randn(prefix + ".w" + n, cfg.dim, cfg.dim, rng, 0.1);
    store.add_randn(prefix + ".a" + n, 2 * cfg.att_dim, 1, rng, 0.1);
  }
  store.add_randn(prefix + ".fuse_w", cfg.dim, 3 * cfg.dim, rng, 0.1);
  store.add(prefix + ".fuse_b", cfg.dim, 1);
  store.add_randn(prefix + ".cls_w", 1, 2 * cfg.dim, rng, 0.1);
  store.add(prefix + ".cls_b", 1, 1);
}

std::vector<ad::Var> propagate(ParamBinder& bind, const std::string& prefix,
                               const EvidenceGraph& g, const GvatConfig& cfg,
                               std::array<ad::Mat, 3>* alpha_out) {
  ad::Tape& tape = bind.tape();
  const GraphStructure& s = g.structure;
  int K = s.K;
  int F = static_cast<int>(g.h.front().value().rows());

  if (alpha_out)
    for (auto& m : *alpha_out) m = ad::Mat::Zero(K, K);

  std::vector<ad::Var> h_new;
  h_new.reserve(static_cast<size_t>(K));

  // Per head: projections computed once per node.
  std::array<std::vector<ad::Var>, 3> proj_u, proj_w;
  for (int d = 0; d < 3; ++d) {
    std::string n = std::to_string(d + 1);
    ad::Var u = bind(prefix + ".u" + n);
    ad::Var w = bind(prefix + ".w" + n);
    for (int i = 0; i < K; ++i) {
      proj_u[static_cast<size_t>(d)].push_back(tape.matmul(u, g.h[static_cast<size_t>(i)]));
      proj_w[static_cast<size_t>(d)].push_back(tape.matmul(w, g.h[static_cast<size_t>(i)]));
    }
  }

  ad::Var zero_head = tape.constant(ad::Mat::Zero(F, 1));
  for (int i = 0; i < K; ++i) {
    std::vector<ad::Var> heads;
    for (int d = 0; d < 3; ++d) {
      ad::Var a_vec = bind(prefix + ".a" + std::to_string(d + 1));
      std::vector<int> nbrs;
      for (int j = 0; j < K; ++j)
        if (s.a[static_cast<size_t>(d)](i, j) != 0) nbrs.push_back(j);
      if (nbrs.empty()) {
        heads.push_back(zero_head);  // isolated under this head
        continue;
      }
      std::vector<ad::Var> logits;
      for (int j : nbrs) {
        ad::Var pair = tape.concat_rows({proj_u[static_cast<size_t>(d)][static_cast<size_t>(i)],
                                         proj_u[static_cast<size_t>(d)][static_cast<size_t>(j)]});
        logits.push_back(tape.leaky_relu(tape.dot(a_vec, pair), cfg.leaky_slope));
      }
      ad::Var alpha = tape.softmax(tape.concat_rows(logits));
      if (alpha_out)
        for (size_t k = 0; k < nbrs.size(); ++k)
          (*alpha_out)[static_cast<size_t>(d)](i, nbrs[k]) =
              alpha.value()(static_cast<Eigen::Index>(k), 0);
      std::vector<ad::Var> weighted;
      for (size_t k = 0; k < nbrs.size(); ++k) {
        // alpha_k as a 1x1 node: row k of the softmax output
        ad::Mat sel = ad::Mat::Zero(static_cast<Eigen::Index>(nbrs.size()), 1);
        sel(static_cast<Eigen::Index>(k), 0) = 1.0;
        ad::Var ak = tape.dot(alpha, tape.constant(sel));
        weighted.push_back(
            tape.matmul(proj_w[static_cast<size_t>(d)][static_cast<size_t>(nbrs[k])], ak));
      }
      heads.push_back(tape.elu(tape.add_n(weighted)));
    }
    ad::Var fused = tape.matmul(bind(prefix + ".fuse_w"), tape.concat_rows(heads));
    h_new.push_back(tape.elu(tape.add(fused, bind(prefix + ".fuse_b"))));
  }
  return h_new;
}

std::pair<ad::Var, std::vector<ad::Var>> gated_aggregate(ParamBinder& bind,
                                                         const std::vector<ad::Var>& h_new,
                                                         ad::Var h_gate, int M) {
  ad::Tape& tape = bind.tape();
  std::vector<ad::Var> gates;
  std::vector<ad::Var> weighted;
  for (int i = 0; i < M; ++i) {
    ad::Var p = tape.sigmoid(tape.dot(h_gate, h_new[static_cast<size_t>(i)]));
    gates.push_back(p);
    weighted.push_back(tape.matmul(h_new[static_cast<size_t>(i)], p));
  }
  return {tape.add_n(weighted), gates};
}

ad::Var classify_logit(ParamBinder& bind, const std::string& prefix, ad::Var h_final,
                       ad::Var h_statement_table) {
  ad::Tape& tape = bind.tape();
  ad::Var cat = tape.concat_rows({h_final, h_statement_table});
  return tape.add(tape.matmul(bind(prefix + ".cls_w"), cat), bind(prefix + ".cls_b"));
}

ad::Var verification_logit(ParamBinder& bind, const std::string& prefix, const EvidenceGraph& g,
                           const GvatConfig& cfg) {
  ad::Var h_st = g.h.back();
  if (cfg.no_graph) {
    auto [h_final, gates] = gated_aggregate(bind, g.h, h_st, g.structure.M);
    return classify_logit(bind, prefix, h_final, h_st);
  }
  EvidenceGraph cur = g;
  std::vector<ad::Var> h_new = g.h;
  for (int layer = 0; layer < cfg.layers; ++layer) {
    h_new = propagate(bind, prefix, cur, cfg);
    cur.h = h_new;
  }
  ad::Var gate = cfg.gate_updated ? h_new.back() : h_st;
  auto [h_final, gates] = gated_aggregate(bind, h_new, gate, g.structure.M);
  return classify_logit(bind, prefix, h_final, h_st);
}

// ---------------------------------------------------------------------------
// Export

std::string graph_to_json(const GraphStructure& g) {
  json nodes = json::array();
  for (int i = 0; i < g.K; ++i) {
    const char* type = g.types[static_cast<size_t>(i)] == 'p'   ? "prog-exec"
                       : g.types[static_cast<size_t>(i)] == 'e' ? "entity"
                                                                : "statement-table";
    nodes.push_back(json{{"id", i}, {"type", type}, {"label", g.labels[static_cast<size_t>(i)]}});
  }
  auto edges_of = [&](const ad::Mat& m) {
    json edges = json::array();
    for (int i = 0; i < g.K; ++i)
      for (int j = i + 1; j < g.K; ++j)
        if (m(i, j) != 0) edges.push_back(json::array({i, j}));
    return edges;
  };
  json j;
  j["node_count"] = g.K;
  j["prog_exec_count"] = g.M;
  j["entity_count"] = g.E;
  j["nodes"] = std::move(nodes);
  j["edges"] = {{"program_tree", edges_of(g.a[0])},
                {"entity", edges_of(g.a[1])},
                {"statement_table", edges_of(g.a[2])}};
  return j.dump(2);
}

GraphStructure graph_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Err::BadFormat, std::string("graph json: ") + e.what());
  }
  GraphStructure g;
  g.K = j.at("node_count").get<int>();
  g.M = j.at("prog_exec_count").get<int>();
  g.E = j.at("entity_count").get<int>();
  for (auto& m : g.a) m = ad::Mat::Zero(g.K, g.K);
  for (const auto& node : j.at("nodes")) {
    std::string type = node.at("type").get<std::string>();
    g.types.push_back(type == "prog-exec" ? 'p' : type == "entity" ? 'e' : 's');
    g.labels.push_back(node.at("label").get<std::string>());
  }
  const char* names[3] = {"program_tree", "entity", "statement_table"};
  for (int d = 0; d < 3; ++d) {
    for (const auto& e : j.at("edges").at(names[d])) {
      int a = e[0].get<int>(), b = e[1].get<int>();
      g.a[static_cast<size_t>(d)](a, b) = 1;
      g.a[static_cast<size_t>(d)](b, a) = 1;
    }
  }
  return g;
}

std::string graph_to_dot(const GraphStructure& g) {
  std::string out = "graph evidence {\n";
  for (int i = 0; i < g.K; ++i) {
    std::string label = g.labels[static_cast<size_t>(i)];
    for (auto& c : label)
      if (c == '"') c = '\'';
    const char* shape = g.types[static_cast<size_t>(i)] == 'p'   ? "box"
                        : g.types[static_cast<size_t>(i)] == 'e' ? "ellipse"
                                                                 : "diamond";
    out += "  n" + std::to_string(i) + " [shape=" + shape + ", label=\"" + label + "\"];\n";
  }
  const char* styles[3] = {"solid", "dashed", "bold"};
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < g.K; ++i)
      for (int j = i + 1; j < g.K; ++j)
        if (g.a[static_cast<size_t>(d)](i, j) != 0)
          out += "  n" + std::to_string(i) + " -- n" + std::to_string(j) + " [style=" +
                 styles[d] + "];\n";
  out += "}\n";
  return out;
}

}  // namespace veritab
