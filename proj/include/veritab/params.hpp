#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>

#include "veritab/autodiff.hpp"

namespace veritab {

// Named tensors with gradient buffers and per-tensor freeze flags. Iteration
// order is the sorted tensor name, which keeps training bit-reproducible.
struct ParamStore {
  struct Entry {
    ad::Mat value;
    ad::Mat grad;
    bool frozen = false;
  };
  std::map<std::string, Entry> tensors;

  ad::Mat& add(const std::string& name, int rows, int cols);
  ad::Mat& add_randn(const std::string& name, int rows, int cols, std::mt19937_64& rng,
                     double stddev);
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  void zero_grad();
  void set_frozen(const std::string& prefix, bool frozen);  // applies to name prefix
  int scalar_count() const;

  void save(const std::string& bin_path, const std::string& manifest_path) const;
  static ParamStore load(const std::string& bin_path, const std::string& manifest_path);
};

// Per-tape cache of leaves bound to store tensors; each tensor becomes one
// tape leaf the first time it is requested.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}
  ad::Var operator()(const std::string& name);
  // Adds tape gradients (times scale) into the store's gradient buffers.
  void accumulate(double scale = 1.0);
  ParamStore& store() { return store_; }
  ad::Tape& tape() { return tape_; }

 private:
  ad::Tape& tape_;
  ParamStore& store_;
  std::map<std::string, ad::Var> bound_;
};

// Adam with bias correction. Frozen tensors are skipped entirely (their
// moments stay at zero until unfrozen).
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::map<std::string, ad::Mat> m, v;

  void step(ParamStore& store);
};

// Builds the loss on a fresh tape; used by both training and grad_check.
using LossBuilder = std::function<ad::Var(ad::Tape&, ParamBinder&)>;

struct GradCheckReport {
  struct Item {
    std::string name;
    double max_rel_err = 0;
  };
  std::vector<Item> items;
  double max_rel_err = 0;
  std::string worst;

  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences against the tape gradient, step h, relative
// error |a - f| / max(1, |a|, |f|) per parameter entry.
GradCheckReport grad_check(const LossBuilder& build, ParamStore& store, double h = 1e-5);

}  // namespace veritab
