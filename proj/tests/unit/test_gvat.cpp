#include <random>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/progen.hpp"
#include "veritab/errors.hpp"
#include "veritab/gvat.hpp"

using namespace veritab;
using ad::Mat;

namespace {

GraphStructure structure_of(const std::string& program_text, const Table& t) {
  Program p = parse_program(program_text);
  return build_graph_structure(p, verbalize(p, t));
}

// Hand-built graph over constant features, for propagate-level tests.
EvidenceGraph constant_graph(ad::Tape& tape, const GraphStructure& s, int dim,
                             std::mt19937_64& rng) {
  EvidenceGraph g;
  g.structure = s;
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int i = 0; i < s.K; ++i) {
    Mat h(dim, 1);
    for (int r = 0; r < dim; ++r) h(r, 0) = dist(rng);
    g.h.push_back(tape.constant(h));
  }
  return g;
}

ParamStore gvat_params(const GvatConfig& cfg, unsigned seed) {
  std::mt19937_64 rng(seed);
  ParamStore store;
  init_gvat_params(store, "gvat", cfg, rng);
  return store;
}

}  // namespace

TEST_CASE("graph structure of a single operation with two entities") {
  Table t = testing::medals_table();
  GraphStructure g = structure_of("filter_eq { all_rows ; \"bronze\" ; \"lena eliasson\" }", t);
  CHECK(g.M == 1);
  CHECK(g.E == 2);  // bronze + lena eliasson; view answers are not entities
  CHECK(g.K == 4);
  CHECK(g.a[0].cwiseAbs().sum() == 0.0);
  CHECK(g.a[1].cwiseAbs().sum() == 4.0);  // two undirected edges
  CHECK(g.a[2].cwiseAbs().sum() == 2.0);  // one undirected edge to node K-1
}

TEST_CASE("chain programs connect consecutive prog-exec nodes") {
  Table t = testing::medals_table();
  GraphStructure g = structure_of("count { filter_eq { all_rows ; \"bronze\" ; \"minna kauppi\" } }", t);
  CHECK(g.M == 2);
  CHECK(g.a[0](0, 1) == 1.0);
  CHECK(g.a[0](1, 0) == 1.0);
  CHECK(g.a[0].cwiseAbs().sum() == 2.0);
}

TEST_CASE("graph invariants hold on fuzzed programs") {
  testing::ProGen gen(47);
  int built = 0;
  for (int i = 0; i < 200 && built < 120; ++i) {
    Table t = gen.random_table();
    Program p = gen.gen_bool_program(t, gen.pick(1, 4));
    VerbalizedExecution v;
    try {
      v = verbalize(p, t);
    } catch (const Error&) {
      continue;
    }
    GraphStructure g = build_graph_structure(p, v);
    ++built;
    CHECK(g.K == g.M + g.E + 1);
    for (int d = 0; d < 3; ++d) {
      const Mat& m = g.a[static_cast<size_t>(d)];
      CHECK(m.rows() == g.K);
      CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);  // symmetric
      CHECK(m.diagonal().cwiseAbs().maxCoeff() == 0.0);
    }
    // prog-tree edges only among prog nodes
    for (int i2 = 0; i2 < g.K; ++i2)
      for (int j2 = 0; j2 < g.K; ++j2)
        if (g.a[0](i2, j2) != 0) {
          CHECK(i2 < g.M);
          CHECK(j2 < g.M);
        }
    // each entity node has exactly one prog neighbor
    for (int e = g.M; e < g.K - 1; ++e) {
      CHECK(g.a[1].row(e).sum() == 1.0);
      for (int j2 = 0; j2 < g.K; ++j2)
        if (g.a[1](e, j2) != 0) CHECK(j2 < g.M);
    }
    // statement-table edges: exactly M, all touching node K-1
    CHECK(g.a[2].row(g.K - 1).sum() == static_cast<double>(g.M));
    CHECK(g.a[2].sum() == 2.0 * g.M);
  }
  CHECK(built >= 100);
}

TEST_CASE("singleton neighborhoods get attention one") {
  Table t = testing::medals_table();
  GraphStructure s = structure_of("count { filter_eq { all_rows ; \"bronze\" ; \"minna kauppi\" } }", t);
  GvatConfig cfg;
  cfg.dim = 8;
  cfg.att_dim = 4;
  ParamStore store = gvat_params(cfg, 51);
  ad::Tape tape;
  ParamBinder bind(tape, store);
  std::mt19937_64 rng(52);
  EvidenceGraph g = constant_graph(tape, s, cfg.dim, rng);
  std::array<Mat, 3> alpha;
  propagate(bind, "gvat", g, cfg, &alpha);
  // node 0's only tree neighbor is node 1
  CHECK(alpha[0](0, 1) == doctest::Approx(1.0));
  // attention rows over neighbors sum to one wherever a node has any
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < s.K; ++i) {
      double degree = s.a[static_cast<size_t>(d)].row(i).sum();
      double row = alpha[static_cast<size_t>(d)].row(i).sum();
      if (degree > 0) CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
      else CHECK(row == 0.0);
    }
}

TEST_CASE("attention never leaks off the mask") {
  testing::ProGen gen(53);
  GvatConfig cfg;
  cfg.dim = 6;
  cfg.att_dim = 3;
  ParamStore store = gvat_params(cfg, 54);
  std::mt19937_64 rng(55);
  int done = 0;
  for (int i = 0; i < 60 && done < 25; ++i) {
    Table t = gen.random_table();
    Program p = gen.gen_bool_program(t, gen.pick(1, 3));
    VerbalizedExecution v;
    try {
      v = verbalize(p, t);
    } catch (const Error&) {
      continue;
    }
    GraphStructure s = build_graph_structure(p, v);
    ad::Tape tape;
    ParamBinder bind(tape, store);
    EvidenceGraph g = constant_graph(tape, s, cfg.dim, rng);
    std::array<Mat, 3> alpha;
    propagate(bind, "gvat", g, cfg, &alpha);
    for (int d = 0; d < 3; ++d)
      for (int r = 0; r < s.K; ++r)
        for (int c = 0; c < s.K; ++c)
          if (s.a[static_cast<size_t>(d)](r, c) == 0.0)
            CHECK(alpha[static_cast<size_t>(d)](r, c) == 0.0);
    ++done;
  }
  CHECK(done == 25);
}

TEST_CASE("hand-computed softmax weights: logits ln2 and 0 give 2/3 and 1/3") {
  // node 0 with neighbors 1 and 2 under the tree mask
  GraphStructure s;
  s.M = 3;
  s.E = 0;
  s.K = 4;
  for (auto& m : s.a) m = Mat::Zero(4, 4);
  s.a[0](0, 1) = s.a[0](1, 0) = 1;
  s.a[0](0, 2) = s.a[0](2, 0) = 1;
  s.types = {'p', 'p', 'p', 's'};
  s.labels = {"a", "b", "c", "st"};

  GvatConfig cfg;
  cfg.dim = 2;
  cfg.att_dim = 1;
  ParamStore store;
  store.add("gvat.u1", 1, 2)(0, 0) = 1.0;                  // project onto feature 0
  store.add("gvat.a1", 2, 1)(1, 0) = 1.0;                  // logit = u_j only
  store.add("gvat.w1", 2, 2).setIdentity();
  store.add("gvat.u2", 1, 2);
  store.add("gvat.a2", 2, 1);
  store.add("gvat.w2", 2, 2);
  store.add("gvat.u3", 1, 2);
  store.add("gvat.a3", 2, 1);
  store.add("gvat.w3", 2, 2);
  store.add("gvat.fuse_w", 2, 6);
  store.add("gvat.fuse_b", 2, 1);
  store.add("gvat.cls_w", 1, 4);
  store.add("gvat.cls_b", 1, 1);

  ad::Tape tape;
  ParamBinder bind(tape, store);
  EvidenceGraph g;
  g.structure = s;
  auto feat = [&](double x) {
    Mat h = Mat::Zero(2, 1);
    h(0, 0) = x;
    return tape.constant(h);
  };
  g.h = {feat(0.0), feat(std::log(2.0)), feat(0.0), feat(0.0)};
  std::array<Mat, 3> alpha;
  propagate(bind, "gvat", g, cfg, &alpha);
  CHECK(alpha[0](0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(alpha[0](0, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("gate with an orthogonal statement vector is exactly one half") {
  ad::Tape tape;
  ParamStore store;
  ParamBinder bind(tape, store);
  Mat h1 = Mat::Zero(4, 1), h2 = Mat::Zero(4, 1), gate = Mat::Zero(4, 1);
  h1(0, 0) = 1.0;
  h2(1, 0) = 2.0;
  gate(2, 0) = 3.0;  // orthogonal to both
  std::vector<ad::Var> h_new = {tape.constant(h1), tape.constant(h2), tape.constant(gate)};
  auto [h_final, gates] = gated_aggregate(bind, h_new, tape.constant(gate), 2);
  REQUIRE(gates.size() == 2);
  CHECK(gates[0].scalar() == doctest::Approx(0.5));
  CHECK(gates[1].scalar() == doctest::Approx(0.5));
  CHECK((h_final.value() - 0.5 * (h1 + h2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scaling the gate vector sharpens the gates monotonically") {
  ad::Tape tape;
  ParamStore store;
  ParamBinder bind(tape, store);
  Mat aligned = Mat::Constant(3, 1, 0.5);
  Mat opposed = -aligned;
  std::vector<ad::Var> h_new = {tape.constant(aligned), tape.constant(opposed)};
  for (double t : {1.0, 10.0}) {
    auto [h_final, gates] = gated_aggregate(bind, h_new, tape.constant(Mat(aligned * t)), 2);
    double p_aligned = gates[0].scalar();
    double p_opposed = gates[1].scalar();
    CHECK(p_aligned > 0.5);
    CHECK(p_opposed < 0.5);
    if (t > 1.0) {
      CHECK(p_aligned > 0.9);
      CHECK(p_opposed < 0.1);
    }
  }
}

TEST_CASE("classifier basics") {
  GvatConfig cfg;
  cfg.dim = 3;
  ParamStore store;
  store.add("gvat.cls_w", 1, 6);
  store.add("gvat.cls_b", 1, 1);
  ad::Tape tape;
  ParamBinder bind(tape, store);
  ad::Var a = tape.constant(Mat::Constant(3, 1, 0.7));
  ad::Var b = tape.constant(Mat::Constant(3, 1, -0.2));
  CHECK(tape.sigmoid(classify_logit(bind, "gvat", a, b)).scalar() == doctest::Approx(0.5));

  std::mt19937_64 rng(59);
  ParamStore store2;
  std::normal_distribution<double> dist(0.0, 1.0);
  auto& w = store2.add("gvat.cls_w", 1, 6);
  for (int i = 0; i < 6; ++i) w(0, i) = dist(rng);
  store2.add("gvat.cls_b", 1, 1);
  auto forward = [&] {
    ad::Tape t2;
    ParamBinder b2(t2, store2);
    ad::Var a2 = t2.constant(Mat::Constant(3, 1, 0.7));
    ad::Var b2v = t2.constant(Mat::Constant(3, 1, -0.2));
    return t2.sigmoid(classify_logit(b2, "gvat", a2, b2v)).scalar();
  };
  double y = forward();
  store2.at("gvat.cls_w").value *= -1.0;
  double y_flipped = forward();
  CHECK(y_flipped == doctest::Approx(1.0 - y));
}

TEST_CASE("ablation differs from the full forward on a nontrivial graph") {
  Table t = testing::medals_table();
  Program p = parse_program(
      "greater { count { filter_eq { all_rows ; \"bronze\" ; \"tatiana ryabkina\" } } ; 1 }");
  GraphStructure s = build_graph_structure(p, verbalize(p, t));
  GvatConfig cfg;
  cfg.dim = 8;
  cfg.att_dim = 4;
  ParamStore store = gvat_params(cfg, 61);
  std::mt19937_64 rng(62);

  ad::Tape tape;
  ParamBinder bind(tape, store);
  EvidenceGraph g = constant_graph(tape, s, cfg.dim, rng);
  double full = verification_logit(bind, "gvat", g, cfg).scalar();
  GvatConfig ablated = cfg;
  ablated.no_graph = true;
  double no_graph = verification_logit(bind, "gvat", g, ablated).scalar();
  CHECK(std::fabs(full - no_graph) > 1e-9);
}

TEST_CASE("build_graph rejects a document with the wrong sentence count") {
  Table t = testing::medals_table();
  Program p = parse_program("equal { count { all_rows } ; 6 }");
  VerbalizedExecution v = verbalize(p, t);
  GraphStructure s = build_graph_structure(p, v);
  Vocab vocab = Vocab::build({"the number of all rows is 6", "the number of all rows is 6"}, 1);
  std::mt19937_64 rng(93);
  ParamStore store;
  init_encoder_params(store, "doc", 4, vocab.size(), rng, true);
  ad::Tape tape;
  ParamBinder bind(tape, store);
  DocEncoding doc = encode_document(bind, "doc", vocab, {"the number of all rows is 6"});
  ad::Var h_st = tape.constant(ad::Mat::Zero(4, 1));
  try {
    build_graph(bind, s, doc, h_st);
    FAIL("expected CountMismatch");
  } catch (const Error& e) {
    CHECK(e.code == Err::CountMismatch);
  }
}

TEST_CASE("stacked propagation layers change the output") {
  Table t = testing::medals_table();
  Program p = parse_program("equal { count { all_rows } ; 6 }");
  GraphStructure s = build_graph_structure(p, verbalize(p, t));
  GvatConfig cfg;
  cfg.dim = 6;
  cfg.att_dim = 3;
  ParamStore store = gvat_params(cfg, 91);
  std::mt19937_64 rng(92);
  ad::Tape tape;
  ParamBinder bind(tape, store);
  EvidenceGraph g = constant_graph(tape, s, cfg.dim, rng);
  double one_layer = verification_logit(bind, "gvat", g, cfg).scalar();
  GvatConfig two = cfg;
  two.layers = 2;
  double two_layers = verification_logit(bind, "gvat", g, two).scalar();
  CHECK(std::fabs(one_layer - two_layers) > 1e-9);
  GvatConfig gated = cfg;
  gated.gate_updated = true;
  double gate_flipped = verification_logit(bind, "gvat", g, gated).scalar();
  CHECK(std::fabs(one_layer - gate_flipped) > 1e-12);
}

TEST_CASE("propagation is equivariant under node permutation") {
  testing::ProGen gen(63);
  GvatConfig cfg;
  cfg.dim = 5;
  cfg.att_dim = 3;
  ParamStore store = gvat_params(cfg, 64);
  std::mt19937_64 rng(65);
  int done = 0;
  for (int trial = 0; trial < 40 && done < 12; ++trial) {
    Table t = gen.random_table();
    Program p = gen.gen_bool_program(t, gen.pick(1, 3));
    VerbalizedExecution v;
    try {
      v = verbalize(p, t);
    } catch (const Error&) {
      continue;
    }
    GraphStructure s = build_graph_structure(p, v);
    if (s.K < 3) continue;

    std::vector<int> perm(static_cast<size_t>(s.K));
    for (int i = 0; i < s.K; ++i) perm[static_cast<size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);

    ad::Tape tape;
    ParamBinder bind(tape, store);
    EvidenceGraph g = constant_graph(tape, s, cfg.dim, rng);
    auto h_new = propagate(bind, "gvat", g, cfg);

    GraphStructure ps = s;
    for (int d = 0; d < 3; ++d)
      for (int i = 0; i < s.K; ++i)
        for (int j = 0; j < s.K; ++j)
          ps.a[static_cast<size_t>(d)](perm[static_cast<size_t>(i)],
                                       perm[static_cast<size_t>(j)]) =
              s.a[static_cast<size_t>(d)](i, j);
    EvidenceGraph pg;
    pg.structure = ps;
    pg.h.resize(static_cast<size_t>(s.K));
    for (int i = 0; i < s.K; ++i) pg.h[static_cast<size_t>(perm[static_cast<size_t>(i)])] = g.h[static_cast<size_t>(i)];
    auto permuted = propagate(bind, "gvat", pg, cfg);

    for (int i = 0; i < s.K; ++i) {
      Mat diff = permuted[static_cast<size_t>(perm[static_cast<size_t>(i)])].value() -
                 h_new[static_cast<size_t>(i)].value();
      CHECK(diff.cwiseAbs().maxCoeff() < 1e-9);
    }
    ++done;
  }
  CHECK(done == 12);
}

TEST_CASE("graph export round-trips and DOT carries every edge") {
  Table t = testing::medals_table();
  GraphStructure g = structure_of(
      "greater { count { filter_eq { all_rows ; \"bronze\" ; \"tatiana ryabkina\" } } ; 1 }", t);
  GraphStructure back = graph_from_json(graph_to_json(g));
  CHECK(back.K == g.K);
  CHECK(back.M == g.M);
  for (int d = 0; d < 3; ++d)
    CHECK((back.a[static_cast<size_t>(d)] - g.a[static_cast<size_t>(d)]).cwiseAbs().maxCoeff() ==
          0.0);

  std::string dot = graph_to_dot(g);
  int edges = 0;
  for (size_t at = 0; (at = dot.find(" -- ", at)) != std::string::npos; ++at) ++edges;
  double expected = (g.a[0].sum() + g.a[1].sum() + g.a[2].sum()) / 2.0;
  CHECK(edges == static_cast<int>(expected));
}

TEST_CASE("full gvat forward matches finite differences") {
  Table t = testing::scores_table();
  Program p = parse_program("greater { count { filter_eq { all_rows ; \"score\" ; 5 } } ; 1 }");
  VerbalizedExecution v = verbalize(p, t);
  GraphStructure s = build_graph_structure(p, v);
  REQUIRE(s.K <= 8);

  GvatConfig cfg;
  cfg.dim = 4;
  cfg.att_dim = 2;
  std::mt19937_64 rng(67);
  ParamStore store;
  init_gvat_params(store, "gvat", cfg, rng);
  // initial node features as trainable leaves so the check covers them too
  for (int i = 0; i < s.K; ++i) store.add_randn("h" + std::to_string(i), cfg.dim, 1, rng, 0.8);

  auto build = [&](ad::Tape& tape, ParamBinder& bind) {
    EvidenceGraph g;
    g.structure = s;
    for (int i = 0; i < s.K; ++i) g.h.push_back(bind("h" + std::to_string(i)));
    ad::Var logit = verification_logit(bind, "gvat", g, cfg);
    return tape.bce_with_logits(logit, 1.0);
  };
  auto report = grad_check(build, store);
  CHECK_MESSAGE(report.max_rel_err < 1e-4, "worst " << report.worst);
}
