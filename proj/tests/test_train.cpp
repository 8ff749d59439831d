// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "e2ea/train.hpp"

using namespace e2ea;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.vocab_size = 3;
  cfg.encoder.input_dim = 4;
  cfg.encoder.num_layers = 2;
  cfg.encoder.hidden = 3;
  cfg.encoder.proj = 3;
  cfg.encoder.subsample_layers = {0, 1};
  cfg.decoder.hidden = 3;
  cfg.decoder.att_filters = 2;
  cfg.decoder.att_width = 3;
  cfg.decoder.att_dim = 3;
  return cfg;
}

ToyTaskSpec tiny_task() {
  ToyTaskSpec spec;
  spec.vocab_size = 3;
  spec.feature_dim = 4;
  spec.dur_min = 6;
  spec.dur_max = 8;
  spec.len_min = 2;
  spec.len_max = 4;
  return spec;
}

std::vector<Vec> snapshot(const ParamStore& ps) {
  std::vector<Vec> out;
  for (const ParamEntry* e : ps.entries()) out.push_back(e->value.data);
  return out;
}

std::vector<Vec> grads_of(const ParamStore& ps) {
  std::vector<Vec> out;
  for (const ParamEntry* e : ps.entries()) out.push_back(e->grad.data);
  return out;
}

}  // namespace

TEST_CASE("mtl_loss arithmetic and infinity silencing") {
  CHECK(mtl_loss(0.0, 2.0, 4.0) == 4.0);
  CHECK(mtl_loss(1.0, 2.0, 4.0) == 2.0);
  CHECK(mtl_loss(0.5, 2.0, 4.0) == 3.0);
  // Zero weight silences an infinite term instead of producing NaN.
  CHECK(mtl_loss(0.0, kInf, 4.0) == 4.0);
  CHECK(mtl_loss(1.0, 2.0, kInf) == 2.0);
  CHECK(std::isinf(mtl_loss(0.5, kInf, 4.0)));
}

TEST_CASE("clip_grad_norm worked examples") {
  ParamStore ps(1);
  ParamEntry* g = ps.add_zeros("g", {2});

  g->grad(0) = 3.0;
  g->grad(1) = 4.0;
  CHECK(clip_grad_norm(ps, 5.0) == doctest::Approx(5.0));
  CHECK(g->grad(0) == 3.0);  // norm exactly at threshold: unchanged
  CHECK(g->grad(1) == 4.0);

  g->grad(0) = 6.0;
  g->grad(1) = 8.0;
  CHECK(clip_grad_norm(ps, 5.0) == doctest::Approx(10.0));
  CHECK(g->grad(0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(g->grad(1) == doctest::Approx(4.0).epsilon(1e-15));

  g->grad(0) = 0.0;
  g->grad(1) = 0.0;
  clip_grad_norm(ps, 5.0);
  CHECK(g->grad(0) == 0.0);
}

TEST_CASE("clip preserves direction and caps the norm") {
  ParamStore ps(2);
  ParamEntry* g = ps.add_zeros("g", {3});
  g->grad(0) = 1.0;
  g->grad(1) = -2.0;
  g->grad(2) = 2.5;
  clip_grad_norm(ps, 1.0);
  double n = 0.0;
  for (int i = 0; i < 3; ++i) n += g->grad(i) * g->grad(i);
  CHECK(std::sqrt(n) <= 1.0 + 1e-12);
  CHECK(g->grad(0) > 0.0);
  CHECK(g->grad(1) < 0.0);
}

TEST_CASE("adadelta first-step closed form") {
  ParamStore ps(3);
  ParamEntry* x = ps.add_zeros("x", {1});
  AdaDelta opt(ps, 0.95, 1e-8);
  x->grad(0) = 1.0;
  opt.update(ps);
  double want = -std::sqrt(1e-8) / std::sqrt(0.05 + 1e-8);
  CHECK(std::fabs(x->value(0) - want) < 1e-12);
}

TEST_CASE("adadelta with zero gradient is the identity") {
  ParamStore ps(4);
  ParamEntry* x = ps.add("x", {3});
  Vec before = x->value.data;
  AdaDelta opt(ps, 0.95, 1e-8);
  ps.zero_grads();
  opt.update(ps);
  CHECK(x->value.data == before);
}

TEST_CASE("adadelta descends f(x)=x^2 from x=5 strictly") {
  ParamStore ps(5);
  ParamEntry* x = ps.add_zeros("x", {1});
  x->value(0) = 5.0;
  AdaDelta opt(ps, 0.95, 1e-8);
  double prev = 25.0;
  for (int step = 0; step < 200; ++step) {
    ps.zero_grads();
    x->grad(0) = 2.0 * x->value(0);
    opt.update(ps);
    double loss = x->value(0) * x->value(0);
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("toy templates are pairwise distinct") {
  ToyTaskSpec spec = tiny_task();
  Mat tpl = toy_templates(spec);
  REQUIRE(tpl.rows == spec.vocab_size);
  for (int a = 0; a < tpl.rows; ++a)
    for (int b = a + 1; b < tpl.rows; ++b) CHECK(tpl.row(a) != tpl.row(b));
}

TEST_CASE("toy dataset: determinism, disjoint streams, label bounds") {
  ToyTaskSpec spec = tiny_task();
  auto a = generate_toy_dataset(spec, 50, 0);
  auto b = generate_toy_dataset(spec, 50, 0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].labels == b[i].labels);
    CHECK(a[i].feats.d == b[i].feats.d);
  }
  auto dev = generate_toy_dataset(spec, 50, 1);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    any_diff = any_diff || a[i].labels != dev[i].labels || a[i].feats.d != dev[i].feats.d;
  CHECK(any_diff);

  auto big = generate_toy_dataset(spec, 10000, 2);
  for (const Utterance& utt : big) {
    CHECK(static_cast<int>(utt.labels.size()) >= spec.len_min);
    CHECK(static_cast<int>(utt.labels.size()) <= spec.len_max);
    for (int c : utt.labels) {
      CHECK(c >= 1);
      CHECK(c <= spec.vocab_size);
    }
  }
}

TEST_CASE("sigma=0 with fixed durations yields exact template concatenations") {
  ToyTaskSpec spec = tiny_task();
  spec.noise_sigma = 0.0;
  spec.dur_min = spec.dur_max = 3;
  Mat tpl = toy_templates(spec);
  auto data = generate_toy_dataset(spec, 20, 0);
  for (const Utterance& utt : data) {
    REQUIRE(utt.feats.rows == 3 * static_cast<int>(utt.labels.size()));
    for (std::size_t l = 0; l < utt.labels.size(); ++l)
      for (int r = 0; r < 3; ++r)
        CHECK(utt.feats.row(static_cast<int>(3 * l) + r) ==
              tpl.row(utt.labels[l] - 1));
  }
}

TEST_CASE("lambda=0 leaves the CTC head untouched by the loss") {
  Model model(tiny_model(), 11);
  auto data = generate_toy_dataset(tiny_task(), 1, 0);
  FusionConfig none;
  model.params().zero_grads();
  model.joint_loss(data[0].feats, data[0].labels, 0.0, none, nullptr, true);
  const ParamEntry* w = model.params().find("ctc.out.w");
  const ParamEntry* b = model.params().find("ctc.out.b");
  REQUIRE(w != nullptr);
  for (double v : w->grad.data) CHECK(v == 0.0);
  for (double v : b->grad.data) CHECK(v == 0.0);
}

TEST_CASE("mtl gradient is the lambda-combination of the head gradients") {
  Model model(tiny_model(), 12);
  auto data = generate_toy_dataset(tiny_task(), 1, 0);
  FusionConfig none;

  model.params().zero_grads();
  model.joint_loss(data[0].feats, data[0].labels, 1.0, none, nullptr, true);
  auto g_ctc = grads_of(model.params());
  model.params().zero_grads();
  model.joint_loss(data[0].feats, data[0].labels, 0.0, none, nullptr, true);
  auto g_att = grads_of(model.params());
  model.params().zero_grads();
  auto res = model.joint_loss(data[0].feats, data[0].labels, 0.3, none, nullptr, true);
  auto g_mix = grads_of(model.params());

  CHECK(res.mtl == doctest::Approx(0.3 * res.ctc_nll + 0.7 * res.att_nll).epsilon(1e-12));
  for (std::size_t p = 0; p < g_mix.size(); ++p)
    for (std::size_t i = 0; i < g_mix[p].size(); ++i) {
      double want = 0.3 * g_ctc[p][i] + 0.7 * g_att[p][i];
      CHECK(g_mix[p][i] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("unalignable utterances are skipped, not fatal") {
  Model model(tiny_model(), 13);
  AdaDelta opt(model.params());
  // 2 frames -> T'=1 < 2 labels: unalignable under lambda > 0.
  Utterance utt;
  utt.feats = Mat(2, 4);
  utt.feats.fill(0.3);
  utt.labels = {1, 2};
  MtlConfig cfg;
  cfg.lambda = 0.5;
  EpochStats st = train_epoch(model, opt, {utt}, cfg, 1);
  CHECK(st.skipped == 1);
}

TEST_CASE("train_epoch learns and is bitwise reproducible") {
  ToyTaskSpec task = tiny_task();
  auto data = generate_toy_dataset(task, 30, 0);
  MtlConfig cfg;
  cfg.lambda = 0.5;
  cfg.seed = 7;

  auto run = [&](std::vector<EpochStats>* stats) {
    Model model(tiny_model(), 21);
    AdaDelta opt(model.params());
    for (int e = 1; e <= 5; ++e) stats->push_back(train_epoch(model, opt, data, cfg, e));
    return snapshot(model.params());
  };
  std::vector<EpochStats> s1, s2;
  auto p1 = run(&s1);
  auto p2 = run(&s2);
  CHECK(s1.back().mean_mtl < s1.front().mean_mtl);
  for (std::size_t e = 0; e < s1.size(); ++e) {
    CHECK(s1[e].mean_mtl == s2[e].mean_mtl);
    CHECK(s1[e].mean_ctc_nll == s2[e].mean_ctc_nll);
  }
  CHECK(p1 == p2);
}
