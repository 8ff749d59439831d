// e2ea/tensor.hpp
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_TENSOR_HPP_
#define E2EA_TENSOR_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace e2ea {

#define E2EA_CHECK(cond, msg)                                   \
  do {                                                          \
    if (!(cond)) throw ::std::runtime_error(::std::string(msg)); \
  } while (0)

using Vec = std::vector<double>;

// Dense row-major tensor, rank 1..4, 64-bit values throughout.
struct Tensor {
  std::vector<int> dims;
  Vec data;

  Tensor() = default;
  explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
    data.assign(numel(dims), 0.0);
  }

  static std::size_t numel(const std::vector<int>& d) {
    std::size_t n = 1;
    for (int x : d) {
      E2EA_CHECK(x > 0, "tensor dims must be positive");
      n *= static_cast<std::size_t>(x);
    }
    return n;
  }

  std::size_t size() const { return data.size(); }

  double& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
  double operator()(int i) const { return data[static_cast<std::size_t>(i)]; }
  double& operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * dims[1] + j];
  }
  double operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * dims[1] + j];
  }
  double& operator()(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k];
  }
  double operator()(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k];
  }
  double& operator()(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k) *
                    dims[3] +
                l];
  }
  double operator()(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k) *
                    dims[3] +
                l];
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Lightweight row-major matrix for activations.
struct Mat {
  int rows = 0, cols = 0;
  Vec d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return d[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return d[static_cast<std::size_t>(r) * cols + c];
  }
  const double* row_ptr(int r) const { return d.data() + static_cast<std::size_t>(r) * cols; }
  double* row_ptr(int r) { return d.data() + static_cast<std::size_t>(r) * cols; }
  Vec row(int r) const {
    return Vec(row_ptr(r), row_ptr(r) + cols);
  }
  void set_row(int r, const Vec& v) {
    E2EA_CHECK(static_cast<int>(v.size()) == cols, "row size mismatch");
    std::copy(v.begin(), v.end(), row_ptr(r));
  }
  void add_row(int r, const Vec& v) {
    double* p = row_ptr(r);
    for (int c = 0; c < cols; ++c) p[c] += v[c];
  }
  void fill(double v) { std::fill(d.begin(), d.end(), v); }
};

// A parameter tensor paired with its gradient buffer.
struct ParamEntry {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Named parameters with paired gradients.  Initialization is uniform(-0.1,
// 0.1) drawn from a single seeded stream in insertion order, so a given
// construction order fully determines all initial values.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed), rng_(seed) {}

  ParamEntry* add(const std::string& name, std::vector<int> dims) {
    E2EA_CHECK(store_.find(name) == store_.end(),
               "duplicate parameter name: " + name);
    ParamEntry e;
    e.name = name;
    e.value = Tensor(dims);
    e.grad = Tensor(dims);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (double& v : e.value.data) v = u(rng_);
    auto it = store_.emplace(name, std::move(e)).first;
    order_.push_back(&it->second);
    return &it->second;
  }

  ParamEntry* add_zeros(const std::string& name, std::vector<int> dims) {
    ParamEntry* e = add(name, std::move(dims));
    e->value.fill(0.0);
    return e;
  }

  ParamEntry* find(const std::string& name) {
    auto it = store_.find(name);
    return it == store_.end() ? nullptr : &it->second;
  }
  const ParamEntry* find(const std::string& name) const {
    auto it = store_.find(name);
    return it == store_.end() ? nullptr : &it->second;
  }

  void zero_grads() {
    for (ParamEntry* e : order_) e->grad.fill(0.0);
  }

  // Entries in construction order (stable across the store's lifetime).
  const std::vector<ParamEntry*>& entries() const { return order_; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const ParamEntry* e : order_) n += e->value.size();
    return n;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::map<std::string, ParamEntry> store_;  // node-stable
  std::vector<ParamEntry*> order_;
};

}  // namespace e2ea

#endif  // E2EA_TENSOR_HPP_
