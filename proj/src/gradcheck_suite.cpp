// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/gradcheck_suite.hpp"

#include <cmath>
#include <random>

#include "e2ea/model.hpp"

namespace e2ea {

namespace {

Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

Mat random_mat(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  Mat m(r, c);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& x : m.d) x = u(rng);
  return m;
}

NamedCheck check_linear(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  Linear lin;
  lin.init(ps, "lin", 3, 4);
  Vec x = random_vec(rng, 3);
  auto fwd = [&]() {
    Vec logp = log_softmax(lin.forward(x));
    return -logp[1];
  };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    Vec pre = lin.forward(x);
    Vec p = softmax(pre);
    p[1] -= 1.0;
    Vec dx(3, 0.0);
    lin.backward(x, p, &dx);
    return -log_softmax(pre)[1];
  };
  return {"linear_nll", finite_diff_check(ps, fwd, fwd_bwd)};
}

NamedCheck check_lstm_step(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  LstmCell cell;
  cell.init(ps, "lstm", 3, 2);
  Vec x = random_vec(rng, 3), h0 = random_vec(rng, 2), c0 = random_vec(rng, 2);
  Vec wh = random_vec(rng, 2), wc = random_vec(rng, 2);
  auto fwd = [&]() {
    auto cc = cell.step(x, h0, c0);
    double s = 0.0;
    for (int j = 0; j < 2; ++j) s += wh[j] * cc.h[j] + wc[j] * cc.c[j];
    return s;
  };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    auto cc = cell.step(x, h0, c0);
    Vec dx(3, 0.0), dh(2, 0.0), dc(2, 0.0);
    cell.backward(cc, wh, wc, &dx, &dh, &dc);
    double s = 0.0;
    for (int j = 0; j < 2; ++j) s += wh[j] * cc.h[j] + wc[j] * cc.c[j];
    return s;
  };
  return {"lstm_step", finite_diff_check(ps, fwd, fwd_bwd)};
}

NamedCheck check_blstm(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  Blstm net;
  net.init(ps, "blstm", 2, 2);
  Mat x = random_mat(rng, 3, 2);
  Mat w = random_mat(rng, 3, 4);
  auto loss_of = [&](const Blstm::Cache& cc) {
    double s = 0.0;
    for (std::size_t i = 0; i < cc.out.d.size(); ++i) s += w.d[i] * cc.out.d[i];
    return s;
  };
  auto fwd = [&]() { return loss_of(net.forward(x)); };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    auto cc = net.forward(x);
    net.backward(cc, w, nullptr);
    return loss_of(cc);
  };
  return {"blstm_forward", finite_diff_check(ps, fwd, fwd_bwd)};
}

NamedCheck check_conv(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  Conv2d conv;
  conv.init(ps, "conv", 2, 3);
  Tensor x({2, 4, 4});
  for (double& v : x.data) v = random_vec(rng, 1)[0];
  Tensor w({3, 4, 4});
  for (double& v : w.data) v = random_vec(rng, 1)[0];
  auto loss_of = [&](const Tensor& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += w.data[i] * y.data[i];
    return s;
  };
  auto fwd = [&]() { return loss_of(conv.forward(x, nullptr)); };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    Conv2d::Cache cc;
    Tensor y = conv.forward(x, &cc);
    Tensor dy = w;
    conv.backward(x, cc, dy, nullptr);
    return loss_of(y);
  };
  return {"conv2d", finite_diff_check(ps, fwd, fwd_bwd)};
}

NamedCheck check_conv_pool(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  Conv2d conv;
  conv.init(ps, "conv", 1, 2);
  Tensor x({1, 5, 4});
  for (double& v : x.data) v = random_vec(rng, 1)[0];
  Tensor w({2, 3, 2});
  for (double& v : w.data) v = random_vec(rng, 1)[0];
  auto loss_of = [&](const Tensor& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += w.data[i] * y.data[i];
    return s;
  };
  auto fwd = [&]() {
    Tensor y = conv.forward(x, nullptr);
    return loss_of(maxpool2d_forward(y, nullptr));
  };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    Conv2d::Cache cc;
    Tensor y = conv.forward(x, &cc);
    MaxPoolCache pc;
    Tensor p = maxpool2d_forward(y, &pc);
    Tensor dy({y.dims[0], y.dims[1], y.dims[2]});
    maxpool2d_backward(y, p, pc, w, &dy);
    conv.backward(x, cc, dy, nullptr);
    return loss_of(p);
  };
  return {"conv2d_maxpool", finite_diff_check(ps, fwd, fwd_bwd)};
}

NamedCheck check_attention(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  LocationAttention att;
  att.init(ps, "att", 3, 2, 2, 3, 4);
  // Spread the weights out: near the uniform init the attention softmax is
  // almost flat and some parameter gradients drop below what a 1e-5 central
  // difference resolves in 64-bit.
  for (ParamEntry* e : ps.entries())
    for (double& v : e->value.data) v *= 10.0;
  Mat keys = random_mat(rng, 5, 3);
  Vec q = random_vec(rng, 2);
  Vec a_prev = softmax(random_vec(rng, 5));
  Vec wr = random_vec(rng, 3), wa = random_vec(rng, 5);
  auto loss_of = [&](const LocationAttention::Cache& cc) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += wr[i] * cc.r[i];
    for (int t = 0; t < 5; ++t) s += wa[t] * cc.a[t];
    return s;
  };
  auto fwd = [&]() { return loss_of(att.step(keys, q, a_prev)); };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    auto cc = att.step(keys, q, a_prev);
    Vec dq(2, 0.0), dap(5, 0.0);
    Mat dkeys(5, 3);
    att.backward(keys, cc, wa, wr, &dkeys, &dq, &dap);
    return loss_of(cc);
  };
  return {"location_attention", finite_diff_check(ps, fwd, fwd_bwd)};
}

NamedCheck check_ctc(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  ParamEntry* logits = ps.add("logits", {4, 3});
  for (double& v : logits->value.data) v = random_vec(rng, 1)[0];
  LabelSequence target = {1, 2};
  auto make_grid = [&]() {
    PosteriorGrid grid;
    grid.logp = Mat(4, 3);
    for (int t = 0; t < 4; ++t) {
      Vec row(3);
      for (int k = 0; k < 3; ++k) row[k] = logits->value(t, k);
      grid.logp.set_row(t, log_softmax(row));
    }
    return grid;
  };
  auto fwd = [&]() { return ctc_loss(make_grid(), target).nll; };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    PosteriorGrid grid = make_grid();
    CtcLossResult res = ctc_loss(grid, target);
    for (int t = 0; t < 4; ++t) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += res.grad.at(t, k);
      for (int k = 0; k < 3; ++k)
        logits->grad(t, k) +=
            res.grad.at(t, k) - std::exp(grid.logp.at(t, k)) * s;
    }
    return res.nll;
  };
  return {"ctc_loss", finite_diff_check(ps, fwd, fwd_bwd)};
}

// attention_nll / fused-LM checks run on the decoder with a fixed random
// encoder output as input; that is where the NLL gradients are well
// conditioned at the pinned step size.
NamedCheck check_attention_nll(std::uint64_t seed, FusionMode fusion_mode,
                               bool check_lm, const std::string& name) {
  std::mt19937_64 rng(seed + 17);
  Vocab vocab{3};
  DecoderConfig dcfg;
  dcfg.hidden = 3;
  dcfg.att_filters = 2;
  dcfg.att_width = 3;
  dcfg.att_dim = 3;
  ParamStore ps(seed);
  AttentionDecoder dec(ps, vocab, 3, dcfg);
  ParamStore lm_store(seed ^ 0x4c4dull);
  RnnLm lm(lm_store, vocab, 3);
  // Spread the weights out: at the +-0.1 init the attention is nearly
  // uniform and some gradients shrink below what a 1e-5 central difference
  // can resolve in 64-bit.
  for (ParamEntry* e : ps.entries())
    for (double& v : e->value.data) v *= 10.0;
  for (ParamEntry* e : lm_store.entries())
    for (double& v : e->value.data) v *= 10.0;
  Mat enc = random_mat(rng, 5, 3);
  LabelSequence target = {1, 2};
  FusionConfig fusion;
  fusion.mode = fusion_mode;
  fusion.gamma = 0.3;
  RnnLm* lm_ptr = fusion_mode == FusionMode::kNone ? nullptr : &lm;
  auto fwd = [&]() {
    return attention_nll(dec, enc, target, fusion, lm_ptr, false, 1.0, nullptr)
        .nll;
  };
  auto fwd_bwd = [&]() {
    ps.zero_grads();
    lm_store.zero_grads();
    Mat d_enc(enc.rows, enc.cols);
    return attention_nll(dec, enc, target, fusion, lm_ptr, true, 1.0, &d_enc)
        .nll;
  };
  ParamStore& checked = check_lm ? lm_store : ps;
  return {name, finite_diff_check(checked, fwd, fwd_bwd)};
}

ModelConfig tiny_model_config(EncoderVariant variant) {
  ModelConfig cfg;
  cfg.vocab_size = 3;
  cfg.encoder.variant = variant;
  cfg.encoder.input_dim = 4;
  cfg.encoder.num_layers = 1;
  cfg.encoder.hidden = 3;
  cfg.encoder.proj = 3;
  if (variant == EncoderVariant::kBlstm) {
    cfg.encoder.num_layers = 2;
    cfg.encoder.subsample_layers = {0, 1};
  } else {
    cfg.encoder.vgg_c1 = 2;
    cfg.encoder.vgg_c2 = 3;
  }
  cfg.decoder.hidden = 3;
  cfg.decoder.att_filters = 2;
  cfg.decoder.att_width = 3;
  cfg.decoder.att_dim = 3;
  return cfg;
}

// Whole-model composition check (features -> encoder -> both heads). Uses a
// coarser step: the MTL loss is O(1) while some encoder gradients are microscopic,
// so the pinned 1e-5 step leaves the central difference dominated by round-off.
NamedCheck check_model(std::uint64_t seed, EncoderVariant variant,
                       double lambda, FusionMode fusion_mode, bool check_lm,
                       const std::string& name, double eps = 1e-3) {
  std::mt19937_64 rng(seed + 17);
  Model model(tiny_model_config(variant), seed);
  Mat frames = random_mat(rng, 9, 4);
  LabelSequence target = {1, 2};
  FusionConfig fusion;
  fusion.mode = fusion_mode;
  fusion.gamma = 0.3;
  ParamStore lm_store(seed ^ 0x4c4dull);
  RnnLm lm(lm_store, model.vocab(), 3);
  RnnLm* lm_ptr = fusion_mode == FusionMode::kNone ? nullptr : &lm;
  auto fwd = [&]() {
    Model::LossResult r = model.joint_loss(frames, target, lambda, fusion,
                                           lm_ptr, /*with_grad=*/false);
    return r.mtl;
  };
  auto fwd_bwd = [&]() {
    model.params().zero_grads();
    lm_store.zero_grads();
    Model::LossResult r = model.joint_loss(frames, target, lambda, fusion,
                                           lm_ptr, /*with_grad=*/true);
    return r.mtl;
  };
  ParamStore& checked = check_lm ? lm_store : model.params();
  return {name, finite_diff_check(checked, fwd, fwd_bwd, eps)};
}

}  // namespace

std::vector<NamedCheck> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<NamedCheck> out;
  out.push_back(check_linear(seed));
  out.push_back(check_lstm_step(seed + 1));
  out.push_back(check_blstm(seed + 2));
  out.push_back(check_conv(seed + 3));
  out.push_back(check_conv_pool(seed + 4));
  out.push_back(check_attention(seed + 5));
  out.push_back(check_ctc(seed + 6));
  out.push_back(check_attention_nll(seed + 7, FusionMode::kNone, false,
                                    "attention_nll"));
  out.push_back(check_attention_nll(seed + 8, FusionMode::kSeparate, false,
                                    "fused_lm_nll_dec_params"));
  out.push_back(check_attention_nll(seed + 8, FusionMode::kSeparate, true,
                                    "fused_lm_nll_lm_params"));
  out.push_back(check_attention_nll(seed + 9, FusionMode::kJoint, true,
                                    "joint_lm_nll_lm_params"));
  out.push_back(check_model(seed + 10, EncoderVariant::kBlstm, 1.0,
                            FusionMode::kNone, false, "model_ctc_head_nll"));
  out.push_back(check_model(seed + 11, EncoderVariant::kBlstm, 0.0,
                            FusionMode::kNone, false, "model_attention_nll"));
  out.push_back(check_model(seed + 12, EncoderVariant::kBlstm, 0.5,
                            FusionMode::kNone, false, "model_mtl_blstm"));
  out.push_back(check_model(seed + 13, EncoderVariant::kVggBlstm, 0.5,
                            FusionMode::kNone, false, "model_mtl_vgg"));
  return out;
}

}  // namespace e2ea
