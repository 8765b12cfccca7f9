#include "veritab/params.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "json.hpp"
#include "veritab/errors.hpp"

using nlohmann::json;

namespace veritab {

ad::Mat& ParamStore::add(const std::string& name, int rows, int cols) {
  Entry e;
  e.value = ad::Mat::Zero(rows, cols);
  e.grad = ad::Mat::Zero(rows, cols);
  auto [it, fresh] = tensors.emplace(name, std::move(e));
  if (!fresh) fail(Err::BadFormat, "duplicate tensor " + name);
  return it->second.value;
}

ad::Mat& ParamStore::add_randn(const std::string& name, int rows, int cols, std::mt19937_64& rng,
                               double stddev) {
  ad::Mat& m = add(name, rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  return m;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(Err::BadFormat, "no tensor " + name);
  return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(Err::BadFormat, "no tensor " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : tensors) e.grad.setZero();
}

void ParamStore::set_frozen(const std::string& prefix, bool frozen) {
  for (auto& [name, e] : tensors)
    if (name.rfind(prefix, 0) == 0) e.frozen = frozen;
}

int ParamStore::scalar_count() const {
  int n = 0;
  for (const auto& [name, e] : tensors) n += static_cast<int>(e.value.size());
  return n;
}

void ParamStore::save(const std::string& bin_path, const std::string& manifest_path) const {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) fail(Err::BadFormat, "cannot write " + bin_path);
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, e] : tensors) {
    manifest.push_back(json{{"name", name},
                            {"rows", e.value.rows()},
                            {"cols", e.value.cols()},
                            {"offset", offset}});
    bin.write(reinterpret_cast<const char*>(e.value.data()),
              static_cast<std::streamsize>(sizeof(double) * e.value.size()));
    offset += sizeof(double) * e.value.size();
  }
  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << "\n";
}

ParamStore ParamStore::load(const std::string& bin_path, const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) fail(Err::BadFormat, "cannot open " + manifest_path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    fail(Err::BadFormat, manifest_path + ": " + e.what());
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) fail(Err::BadFormat, "cannot open " + bin_path);
  ParamStore store;
  for (const auto& entry : manifest) {
    const auto name = entry.at("name").get<std::string>();
    int rows = entry.at("rows").get<int>();
    int cols = entry.at("cols").get<int>();
    ad::Mat& m = store.add(name, rows, cols);
    bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    bin.read(reinterpret_cast<char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!bin) fail(Err::BadFormat, bin_path + ": truncated tensor " + name);
  }
  return store;
}

ad::Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  ad::Var v = tape_.leaf(store_.at(name).value, true, name);
  bound_.emplace(name, v);
  return v;
}

void ParamBinder::accumulate(double scale) {
  for (const auto& [name, var] : bound_) {
    auto& e = store_.at(name);
    if (e.frozen) continue;
    e.grad += var.grad() * scale;
  }
}

void Adam::step(ParamStore& store) {
  ++step_count;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (auto& [name, e] : store.tensors) {
    if (e.frozen) continue;
    auto mit = m.find(name);
    if (mit == m.end()) {
      m[name] = ad::Mat::Zero(e.value.rows(), e.value.cols());
      v[name] = ad::Mat::Zero(e.value.rows(), e.value.cols());
      mit = m.find(name);
    }
    ad::Mat& m1 = mit->second;
    ad::Mat& m2 = v[name];
    m1 = beta1 * m1 + (1.0 - beta1) * e.grad;
    m2 = beta2 * m2 + (1.0 - beta2) * e.grad.cwiseProduct(e.grad);
    ad::Mat mhat = m1 / bc1;
    ad::Mat vhat = m2 / bc2;
    e.value -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
  }
}

GradCheckReport grad_check(const LossBuilder& build, ParamStore& store, double h) {
  GradCheckReport report;

  // analytic gradient
  store.zero_grad();
  {
    ad::Tape tape;
    ParamBinder bind(tape, store);
    ad::Var loss = build(tape, bind);
    tape.backward(loss);
    bind.accumulate();
  }

  auto eval = [&]() {
    ad::Tape tape;
    ParamBinder bind(tape, store);
    return build(tape, bind).scalar();
  };

  for (auto& [name, e] : store.tensors) {
    GradCheckReport::Item item;
    item.name = name;
    for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
      for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
        double saved = e.value(r, c);
        e.value(r, c) = saved + h;
        double up = eval();
        e.value(r, c) = saved - h;
        double down = eval();
        e.value(r, c) = saved;
        double fd = (up - down) / (2.0 * h);
        double an = e.grad(r, c);
        double rel = std::fabs(an - fd) / std::max({1.0, std::fabs(an), std::fabs(fd)});
        item.max_rel_err = std::max(item.max_rel_err, rel);
      }
    }
    if (item.max_rel_err > report.max_rel_err) {
      report.max_rel_err = item.max_rel_err;
      report.worst = name;
    }
    report.items.push_back(std::move(item));
  }
  return report;
}

}  // namespace veritab
