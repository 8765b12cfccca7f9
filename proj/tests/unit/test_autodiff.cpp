#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "veritab/autodiff.hpp"
#include "veritab/errors.hpp"
#include "veritab/params.hpp"

using namespace veritab;
using ad::Mat;

TEST_CASE("sigmoid gradient at zero is a quarter") {
  ad::Tape tape;
  ad::Var x = tape.leaf(Mat::Zero(1, 1), true, "x");
  ad::Var y = tape.sigmoid(x);
  tape.backward(y);
  CHECK(x.grad()(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("hinge subgradient is one inside a violation and zero outside") {
  {
    ad::Tape tape;
    ad::Var neg = tape.leaf(Mat::Constant(1, 1, 0.8), true, "p_neg");
    ad::Var pos = tape.leaf(Mat::Constant(1, 1, 0.7), true, "p_pos");
    ad::Var loss = tape.hinge(tape.add(tape.sub(neg, pos), tape.constant(0.15)));
    tape.backward(loss);
    CHECK(neg.grad()(0, 0) == doctest::Approx(1.0));
    CHECK(pos.grad()(0, 0) == doctest::Approx(-1.0));
  }
  {
    ad::Tape tape;
    ad::Var neg = tape.leaf(Mat::Constant(1, 1, 0.2), true, "p_neg");
    ad::Var pos = tape.leaf(Mat::Constant(1, 1, 0.9), true, "p_pos");
    ad::Var loss = tape.hinge(tape.add(tape.sub(neg, pos), tape.constant(0.15)));
    tape.backward(loss);
    CHECK(neg.grad()(0, 0) == 0.0);
    CHECK(pos.grad()(0, 0) == 0.0);
  }
}

TEST_CASE("softmax rows sum to one and gradients flow") {
  ad::Tape tape;
  Mat logits(3, 1);
  logits << std::log(2.0), 0.0, 0.0;
  ad::Var x = tape.leaf(logits, true, "x");
  ad::Var y = tape.softmax(x);
  CHECK(y.value().sum() == doctest::Approx(1.0));
  CHECK(y.value()(0, 0) == doctest::Approx(0.5));
  CHECK(y.value()(1, 0) == doctest::Approx(0.25));
}

TEST_CASE("random composite graphs match finite differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    ParamStore store;
    store.add_randn("w1", 3, 4, rng, 0.5);
    store.add_randn("w2", 2, 3, rng, 0.5);
    store.add_randn("v", 2, 1, rng, 0.5);
    store.add_randn("x", 4, 1, rng, 0.5);
    auto build = [](ad::Tape& tape, ParamBinder& bind) {
      ad::Var h = tape.elu(tape.matmul(bind("w1"), bind("x")));
      ad::Var z = tape.leaky_relu(tape.matmul(bind("w2"), h), 0.2);
      ad::Var s = tape.softmax(z);
      ad::Var mix = tape.add(s, tape.sigmoid(bind("v")));
      ad::Var picked = tape.dot(mix, bind("v"));
      return tape.softplus(picked);
    };
    auto report = grad_check(build, store);
    CHECK_MESSAGE(report.max_rel_err < 1e-4,
                  "worst " << report.worst << " err " << report.max_rel_err);
  }
}

TEST_CASE("linear models are exact to solver precision") {
  std::mt19937_64 rng(9);
  ParamStore store;
  store.add_randn("w", 1, 5, rng, 1.0);
  store.add_randn("x", 5, 1, rng, 1.0);
  auto build = [](ad::Tape& tape, ParamBinder& bind) {
    return tape.matmul(bind("w"), bind("x"));
  };
  auto report = grad_check(build, store);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("grad_check reports a corrupted gradient with the parameter name") {
  // negative control: the loss builder changes after the first (analytic)
  // evaluation, so finite differences see a different function
  std::mt19937_64 rng(13);
  ParamStore store;
  store.add_randn("theta", 2, 1, rng, 1.0);
  int calls = 0;
  auto build = [&calls](ad::Tape& tape, ParamBinder& bind) {
    ad::Var t = bind("theta");
    ad::Var base = tape.dot(t, t);
    ++calls;
    if (calls > 1) base = tape.add(base, tape.scale(tape.dot(t, tape.constant(Mat::Ones(2, 1))), 0.05));
    return base;
  };
  auto report = grad_check(build, store);
  CHECK(report.max_rel_err > 1e-3);
  CHECK(report.worst == "theta");
}

TEST_CASE("bce with logits matches the naive formula away from saturation") {
  ad::Tape tape;
  ad::Var z = tape.leaf(Mat::Constant(1, 1, 0.3), true, "z");
  ad::Var loss = tape.bce_with_logits(z, 1.0);
  double p = 1.0 / (1.0 + std::exp(-0.3));
  CHECK(loss.scalar() == doctest::Approx(-std::log(p)));
  tape.backward(loss);
  CHECK(z.grad()(0, 0) == doctest::Approx(p - 1.0));
}

TEST_CASE("gather and concat route gradients to the right slots") {
  ad::Tape tape;
  Mat emb(2, 3);
  emb << 1, 2, 3, 4, 5, 6;
  ad::Var e = tape.leaf(emb, true, "emb");
  ad::Var col0 = tape.gather_cols(e, {0});
  ad::Var col2 = tape.gather_cols(e, {2});
  ad::Var cat = tape.concat_rows({col0, col2});
  ad::Var target = tape.constant(Mat::Ones(4, 1));
  ad::Var loss = tape.dot(cat, target);
  tape.backward(loss);
  Mat g = e.grad();
  CHECK(g(0, 0) == 1.0);
  CHECK(g(1, 0) == 1.0);
  CHECK(g(0, 1) == 0.0);
  CHECK(g(0, 2) == 1.0);
}

TEST_CASE("adam leaves parameters alone under zero gradients and freezing") {
  std::mt19937_64 rng(21);
  ParamStore store;
  store.add_randn("a", 2, 2, rng, 1.0);
  store.add_randn("b", 2, 2, rng, 1.0);
  Mat a0 = store.at("a").value;
  Mat b0 = store.at("b").value;

  Adam opt;
  store.zero_grad();  // all-zero gradients
  opt.step(store);
  CHECK(store.at("a").value == a0);

  store.at("a").grad.setConstant(1.0);
  store.at("b").grad.setConstant(1.0);
  store.at("b").frozen = true;
  opt.step(store);
  CHECK(store.at("a").value != a0);
  CHECK(store.at("b").value == b0);  // frozen tensors never move
}

TEST_CASE("gradients require a backward pass") {
  ad::Tape tape;
  ad::Var x = tape.leaf(Mat::Zero(1, 1), true, "x");
  CHECK_THROWS_AS((void)x.grad(), Error);
}

TEST_CASE("parameter store save/load round-trip") {
  std::mt19937_64 rng(31);
  ParamStore store;
  store.add_randn("alpha", 3, 2, rng, 1.0);
  store.add_randn("beta", 1, 4, rng, 1.0);
  auto dir = std::filesystem::temp_directory_path() / "veritab_params";
  std::filesystem::create_directories(dir);
  store.save((dir / "p.bin").string(), (dir / "m.json").string());
  ParamStore loaded = ParamStore::load((dir / "p.bin").string(), (dir / "m.json").string());
  CHECK(loaded.at("alpha").value == store.at("alpha").value);
  CHECK(loaded.at("beta").value == store.at("beta").value);
}
