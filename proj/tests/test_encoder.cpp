// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "e2ea/encoder.hpp"

using namespace e2ea;

namespace {

Mat random_frames(std::mt19937_64& rng, int t, int d) {
  Mat m(t, d);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : m.d) v = u(rng);
  return m;
}

EncoderConfig tiny_blstm() {
  EncoderConfig cfg;
  cfg.input_dim = 3;
  cfg.num_layers = 2;
  cfg.hidden = 2;
  cfg.proj = 2;
  cfg.subsample_layers = {0, 1};
  return cfg;
}

EncoderConfig tiny_vgg() {
  EncoderConfig cfg;
  cfg.variant = EncoderVariant::kVggBlstm;
  cfg.input_dim = 3;
  cfg.num_layers = 1;
  cfg.hidden = 2;
  cfg.proj = 2;
  cfg.vgg_c1 = 2;
  cfg.vgg_c2 = 2;
  return cfg;
}

}  // namespace

TEST_CASE("subsample keeps even rows, ceil semantics") {
  Mat x(5, 1);
  for (int t = 0; t < 5; ++t) x.at(t, 0) = t;
  Mat y = subsample_rows(x);
  REQUIRE(y.rows == 3);
  CHECK(y.at(0, 0) == 0);
  CHECK(y.at(1, 0) == 2);
  CHECK(y.at(2, 0) == 4);
}

TEST_CASE("blstm encode shapes: T=16 -> 4, T=17 -> 5") {
  ParamStore ps(1);
  Encoder enc(ps, tiny_blstm());
  std::mt19937_64 rng(1);
  FeatureSequence a;
  a.frames = random_frames(rng, 16, 3);
  CHECK(enc.forward(a, nullptr).hidden.rows == 4);
  FeatureSequence b;
  b.frames = random_frames(rng, 17, 3);
  CHECK(enc.forward(b, nullptr).hidden.rows == 5);  // ceil(ceil(17/2)/2)
}

TEST_CASE("encode length is ceil(T/4) for T=1..1000, both variants") {
  ParamStore ps(2);
  Encoder blstm(ps, tiny_blstm());
  ParamStore ps2(2);
  Encoder vgg(ps2, tiny_vgg());
  std::mt19937_64 rng(2);
  for (int T = 1; T <= 1000; ++T) {
    Mat frames = random_frames(rng, T, 3);
    int want = (T + 3) / 4;
    FeatureSequence x;
    x.frames = frames;
    CHECK(blstm.forward(x, nullptr).hidden.rows == want);
    x.channels = compute_deltas(frames);
    CHECK(vgg.forward(x, nullptr).hidden.rows == want);
  }
}

TEST_CASE("vgg variant: 3x100x40 input -> 25 frames, freq axis 10") {
  EncoderConfig cfg = tiny_vgg();
  cfg.input_dim = 40;
  cfg.vgg_c1 = 2;
  cfg.vgg_c2 = 3;
  ParamStore ps(3);
  Encoder enc(ps, cfg);
  std::mt19937_64 rng(3);
  Mat frames = random_frames(rng, 100, 40);
  FeatureSequence x;
  x.frames = frames;
  x.channels = compute_deltas(frames);
  Encoder::Cache cc;
  Mat out = enc.forward(x, &cc).hidden;
  CHECK(out.rows == 25);
  // Flattened conv output per frame: channels x pooled frequency bins.
  CHECK(cc.layer_in[0].cols == 3 * 10);
}

TEST_CASE("encode is deterministic") {
  ParamStore ps(4);
  Encoder enc(ps, tiny_blstm());
  std::mt19937_64 rng(4);
  FeatureSequence x;
  x.frames = random_frames(rng, 13, 3);
  Mat a = enc.forward(x, nullptr).hidden;
  Mat b = enc.forward(x, nullptr).hidden;
  CHECK(a.d == b.d);
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg = tiny_blstm();
  cfg.subsample_layers = {0};
  CHECK_THROWS(cfg.validate());  // blstm variant needs exactly two
  cfg = tiny_vgg();
  cfg.subsample_layers = {0};
  CHECK_THROWS(cfg.validate());  // vgg variant must not subsample
  cfg = tiny_blstm();
  cfg.subsample_layers = {0, 5};
  CHECK_THROWS(cfg.validate());  // out of range
}

TEST_CASE("empty input rejected") {
  ParamStore ps(5);
  Encoder enc(ps, tiny_blstm());
  FeatureSequence x;
  x.frames = Mat(0, 3);
  CHECK_THROWS(enc.forward(x, nullptr));
}

TEST_CASE("compute_deltas: constant, ramp, single frame") {
  Mat c(6, 2);
  c.fill(3.5);
  Tensor dc = compute_deltas(c);
  for (int t = 0; t < 6; ++t)
    for (int d = 0; d < 2; ++d) {
      CHECK(dc(1, t, d) == 0.0);
      CHECK(dc(2, t, d) == 0.0);
    }

  Mat ramp(9, 1);
  for (int t = 0; t < 9; ++t) ramp.at(t, 0) = t;
  Tensor dr = compute_deltas(ramp);
  // Interior frames: sum n(x_{t+n}-x_{t-n}) / (2 sum n^2) = (1*2+2*4)/10 = 1.
  for (int t = 2; t <= 6; ++t)
    CHECK(dr(1, t, 0) == doctest::Approx(1.0).epsilon(1e-15));

  Mat one(1, 3);
  one.set_row(0, {1.0, -2.0, 0.5});
  Tensor d1 = compute_deltas(one);
  for (int d = 0; d < 3; ++d) {
    CHECK(d1(0, 0, d) == one.at(0, d));
    CHECK(d1(1, 0, d) == 0.0);
    CHECK(d1(2, 0, d) == 0.0);
  }
}

TEST_CASE("speed_perturb: identity, factor 2, factor 0.9") {
  std::mt19937_64 rng(6);
  Mat x = random_frames(rng, 4, 2);
  Mat same = speed_perturb(x, 1.0);
  CHECK(same.d == x.d);

  Mat half = speed_perturb(x, 2.0);
  REQUIRE(half.rows == 2);
  CHECK(half.row(0) == x.row(0));
  CHECK(half.row(1) == x.row(2));

  Mat big = random_frames(rng, 90, 2);
  CHECK(speed_perturb(big, 0.9).rows == 100);
  CHECK_THROWS(speed_perturb(big, 0.0));
}

TEST_CASE("speed_perturb round trip restores length within two frames") {
  // Each resampling floors the length, so a round trip can shed two frames.
  std::mt19937_64 rng(7);
  for (double f : {0.9, 1.1, 1.3}) {
    Mat x = random_frames(rng, 57, 2);
    Mat y = speed_perturb(x, f);
    REQUIRE(y.rows == static_cast<int>(std::floor(57 / f)));
    Mat z = speed_perturb(y, 1.0 / f);
    CHECK(std::abs(z.rows - x.rows) <= 2);
  }
}

TEST_CASE("stacked encoder backward matches finite differences") {
  // Composition check at a coarser step than the per-layer suite: the
  // summed projection/ subsample/BLSTM chain has some tiny gradients where
  // a 1e-5 central difference is pure round-off.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParamStore ps(seed);
    Encoder enc(ps, tiny_blstm());
    std::mt19937_64 rng(seed * 13 + 1);
    FeatureSequence x;
    x.frames = random_frames(rng, 9, 3);
    Mat w(3, 2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : w.d) v = u(rng);
    auto loss_of = [&](const Mat& out) {
      double s = 0.0;
      for (std::size_t i = 0; i < out.d.size(); ++i) s += w.d[i] * out.d[i];
      return s;
    };
    auto fwd = [&]() { return loss_of(enc.forward(x, nullptr).hidden); };
    auto fwd_bwd = [&]() {
      ps.zero_grads();
      Encoder::Cache cc;
      Mat out = enc.forward(x, &cc).hidden;
      enc.backward(cc, w);
      return loss_of(out);
    };
    GradCheckReport rep = finite_diff_check(ps, fwd, fwd_bwd, 1e-3);
    INFO("seed ", seed, " worst ", rep.worst_param);
    CHECK(rep.max_rel_err < 1e-4);
  }
}
