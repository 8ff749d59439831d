// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/encoder.hpp"

#include <cmath>

namespace e2ea {

void EncoderConfig::validate() const {
  E2EA_CHECK(input_dim >= 1, "encoder: input_dim must be >= 1");
  E2EA_CHECK(num_layers >= 1, "encoder: need at least one BLSTM layer");
  E2EA_CHECK(hidden >= 1 && proj >= 1, "encoder: hidden/proj must be >= 1");
  for (int l : subsample_layers)
    E2EA_CHECK(l >= 0 && l < num_layers, "encoder: bad subsample layer index");
  if (variant == EncoderVariant::kBlstm) {
    // Total subsampling factor 4 is the contract (T' == ceil(T/4)).
    E2EA_CHECK(subsample_layers.size() == 2,
               "blstm variant requires exactly two subsampling layers");
  } else {
    E2EA_CHECK(subsample_layers.empty(),
               "vgg-blstm variant must not subsample in the BLSTM stack");
    E2EA_CHECK(vgg_c1 >= 1 && vgg_c2 >= 1, "encoder: bad vgg channel widths");
  }
}

Encoder::Encoder(ParamStore& ps, const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int in = cfg_.input_dim;
  if (cfg_.variant == EncoderVariant::kVggBlstm) {
    convs_.resize(4);
    convs_[0].init(ps, "enc.vgg.conv0", 3, cfg_.vgg_c1);
    convs_[1].init(ps, "enc.vgg.conv1", cfg_.vgg_c1, cfg_.vgg_c1);
    convs_[2].init(ps, "enc.vgg.conv2", cfg_.vgg_c1, cfg_.vgg_c2);
    convs_[3].init(ps, "enc.vgg.conv3", cfg_.vgg_c2, cfg_.vgg_c2);
    int f1 = (cfg_.input_dim + 1) / 2;   // after first pool
    vgg_freq_out_ = (f1 + 1) / 2;        // after second pool
    in = cfg_.vgg_c2 * vgg_freq_out_;    // channel x freq flattened per frame
  }
  blstms_.resize(cfg_.num_layers);
  projs_.resize(cfg_.num_layers);
  char name[64];
  for (int l = 0; l < cfg_.num_layers; ++l) {
    std::snprintf(name, sizeof(name), "enc.blstm%d", l);
    blstms_[l].init(ps, name, in, cfg_.hidden);
    std::snprintf(name, sizeof(name), "enc.proj%d", l);
    projs_[l].init(ps, name, 2 * cfg_.hidden, cfg_.proj);
    in = cfg_.proj;
  }
}

Mat Encoder::vgg_forward(const Tensor& in, Cache* cache) const {
  Tensor cur = in;
  Cache scratch;
  Cache* cc = cache ? cache : &scratch;
  cc->conv_in.clear();
  cc->conv.assign(4, {});
  cc->pool_in.clear();
  cc->pool_out.clear();
  cc->pool.assign(2, {});
  for (int i = 0; i < 4; ++i) {
    cc->conv_in.push_back(cur);
    cur = convs_[i].forward(cur, &cc->conv[i]);
    if (i == 1 || i == 3) {
      cc->pool_in.push_back(cur);
      cur = maxpool2d_forward(cur, &cc->pool[i / 2]);
      cc->pool_out.push_back(cur);
    }
  }
  // Flatten {C, T', F'} to T' x (C*F').
  const int C = cur.dims[0], Tp = cur.dims[1], Fp = cur.dims[2];
  Mat flat(Tp, C * Fp);
  for (int t = 0; t < Tp; ++t)
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < Fp; ++f) flat.at(t, c * Fp + f) = cur(c, t, f);
  return flat;
}

void Encoder::vgg_backward(const Cache& cc, const Mat& d_flat) const {
  const Tensor& top = cc.pool_out[1];
  const int C = top.dims[0], Tp = top.dims[1], Fp = top.dims[2];
  Tensor dcur({C, Tp, Fp});
  for (int t = 0; t < Tp; ++t)
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < Fp; ++f) dcur(c, t, f) = d_flat.at(t, c * Fp + f);
  for (int i = 3; i >= 0; --i) {
    if (i == 1 || i == 3) {
      const Tensor& pin = cc.pool_in[i / 2];
      Tensor dpin({pin.dims[0], pin.dims[1], pin.dims[2]});
      maxpool2d_backward(pin, cc.pool_out[i / 2], cc.pool[i / 2], dcur, &dpin);
      dcur = std::move(dpin);
    }
    const Tensor& cin = cc.conv_in[i];
    if (i == 0) {
      convs_[i].backward(cin, cc.conv[i], dcur, nullptr);
    } else {
      Tensor dcin({cin.dims[0], cin.dims[1], cin.dims[2]});
      convs_[i].backward(cin, cc.conv[i], dcur, &dcin);
      dcur = std::move(dcin);
    }
  }
}

EncoderOutput Encoder::forward(const FeatureSequence& x, Cache* cache) const {
  E2EA_CHECK(x.length() >= 1, "encode: empty input");
  Cache scratch;
  Cache* cc = cache ? cache : &scratch;
  Mat cur;
  if (cfg_.variant == EncoderVariant::kVggBlstm) {
    E2EA_CHECK(x.channels.has_value(),
               "encode: vgg variant requires 3-channel input");
    E2EA_CHECK(x.channels->dims[0] == 3 && x.channels->dims[2] == cfg_.input_dim,
               "encode: channel shape mismatch");
    cur = vgg_forward(*x.channels, cc);
  } else {
    E2EA_CHECK(x.frames.cols == cfg_.input_dim, "encode: feature dim mismatch");
    cur = x.frames;
  }
  cc->layer_in.clear();
  cc->blstm.clear();
  cc->sub.clear();
  for (int l = 0; l < cfg_.num_layers; ++l) {
    cc->layer_in.push_back(cur);
    cc->blstm.push_back(blstms_[l].forward(cur));
    Mat h = cc->blstm.back().out;
    if (cfg_.subsample_layers.count(l)) h = subsample_rows(h);
    cc->sub.push_back(h);
    Mat p(h.rows, cfg_.proj);
    for (int t = 0; t < h.rows; ++t) p.set_row(t, projs_[l].forward(h.row(t)));
    cur = std::move(p);
  }
  cc->out = cur;
  return EncoderOutput{cur};
}

void Encoder::backward(const Cache& cc, const Mat& d_out) const {
  Mat dcur = d_out;
  for (int l = cfg_.num_layers - 1; l >= 0; --l) {
    const Mat& h = cc.sub[l];
    Mat dh(h.rows, h.cols);
    for (int t = 0; t < h.rows; ++t) {
      Vec dx(h.cols, 0.0);
      projs_[l].backward(h.row(t), dcur.row(t), &dx);
      dh.set_row(t, dx);
    }
    const Mat& full = cc.blstm[l].out;
    Mat dfull(full.rows, full.cols);
    if (cfg_.subsample_layers.count(l)) {
      for (int t = 0; t < dh.rows; ++t) dfull.set_row(2 * t, dh.row(t));
    } else {
      dfull = dh;
    }
    const Mat& lin = cc.layer_in[l];
    Mat dlin(lin.rows, lin.cols);
    blstms_[l].backward(cc.blstm[l], dfull, &dlin);
    dcur = std::move(dlin);
  }
  if (cfg_.variant == EncoderVariant::kVggBlstm) vgg_backward(cc, dcur);
}

Mat subsample_rows(const Mat& x) {
  int To = (x.rows + 1) / 2;
  Mat y(To, x.cols);
  for (int t = 0; t < To; ++t) y.set_row(t, x.row(2 * t));
  return y;
}

Tensor compute_deltas(const Mat& x) {
  const int T = x.rows, D = x.cols;
  E2EA_CHECK(T >= 1, "compute_deltas: empty input");
  auto clamp = [T](int t) { return t < 0 ? 0 : (t >= T ? T - 1 : t); };
  // d_t = sum_{n=1..2} n (x_{t+n} - x_{t-n}) / (2 sum n^2)
  const double denom = 2.0 * (1.0 + 4.0);
  auto regress = [&](const Mat& m, Mat* out) {
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) {
        double s = 0.0;
        for (int n = 1; n <= 2; ++n)
          s += n * (m.at(clamp(t + n), d) - m.at(clamp(t - n), d));
        out->at(t, d) = s / denom;
      }
  };
  Mat delta(T, D), ddelta(T, D);
  regress(x, &delta);
  regress(delta, &ddelta);
  Tensor out({3, T, D});
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d) {
      out(0, t, d) = x.at(t, d);
      out(1, t, d) = delta.at(t, d);
      out(2, t, d) = ddelta.at(t, d);
    }
  return out;
}

Mat speed_perturb(const Mat& x, double factor) {
  E2EA_CHECK(factor > 0.0, "speed_perturb: factor must be positive");
  const int T = x.rows, D = x.cols;
  int To = std::max(1, static_cast<int>(std::floor(T / factor)));
  Mat y(To, D);
  for (int i = 0; i < To; ++i) {
    double pos = i * factor;
    if (pos >= T - 1) {
      y.set_row(i, x.row(T - 1));
      continue;
    }
    int lo = static_cast<int>(std::floor(pos));
    double w = pos - lo;
    for (int d = 0; d < D; ++d)
      y.at(i, d) = (1.0 - w) * x.at(lo, d) + w * x.at(lo + 1, d);
  }
  return y;
}

}  // namespace e2ea
