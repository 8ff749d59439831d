// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/model.hpp"

#include <cmath>

namespace e2ea {

Model::Model(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), vocab_{cfg.vocab_size}, params_(seed) {
  encoder_ = std::make_unique<Encoder>(params_, cfg.encoder);
  ctc_head_.init(params_, "ctc.out", encoder_->output_dim(), vocab_.grid_dim());
  decoder_ = std::make_unique<AttentionDecoder>(params_, vocab_,
                                                encoder_->output_dim(),
                                                cfg.decoder);
}

FeatureSequence Model::make_features(const Mat& frames) const {
  FeatureSequence x;
  x.frames = frames;
  if (cfg_.encoder.variant == EncoderVariant::kVggBlstm)
    x.channels = compute_deltas(frames);
  return x;
}

Mat Model::encode(const FeatureSequence& x, Encoder::Cache* cache) const {
  return encoder_->forward(x, cache).hidden;
}

PosteriorGrid Model::ctc_grid(const Mat& enc) const {
  PosteriorGrid grid;
  grid.logp = Mat(enc.rows, vocab_.grid_dim());
  for (int t = 0; t < enc.rows; ++t)
    grid.logp.set_row(t, log_softmax(ctc_head_.forward(enc.row(t))));
  return grid;
}

void Model::ctc_head_backward(const Mat& enc, const PosteriorGrid& grid,
                              const Mat& d_logp, Mat* d_enc) const {
  const int K = grid.dim();
  for (int t = 0; t < enc.rows; ++t) {
    // Through log-softmax: dz_k = dlogp_k - p_k * sum_j dlogp_j.
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += d_logp.at(t, k);
    Vec dz(K);
    for (int k = 0; k < K; ++k)
      dz[k] = d_logp.at(t, k) - std::exp(grid.logp.at(t, k)) * s;
    Vec dx(enc.cols, 0.0);
    ctc_head_.backward(enc.row(t), dz, &dx);
    d_enc->add_row(t, dx);
  }
}

Model::LossResult Model::joint_loss(const Mat& frames,
                                    const LabelSequence& target, double lambda,
                                    const FusionConfig& fusion, RnnLm* lm,
                                    bool with_grad) {
  E2EA_CHECK(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0,1]");
  FeatureSequence x = make_features(frames);
  Encoder::Cache enc_cache;
  Mat enc = encode(x, with_grad ? &enc_cache : nullptr);

  LossResult res;
  PosteriorGrid grid = ctc_grid(enc);
  CtcLossResult ctc = ctc_loss(grid, target);
  res.ctc_nll = ctc.nll;
  res.alignable = ctc.alignable;

  Mat d_enc(enc.rows, enc.cols);
  bool att_grad = with_grad && lambda < 1.0;
  AttNllResult att = attention_nll(*decoder_, enc, target, fusion, lm,
                                   att_grad, 1.0 - lambda, &d_enc);
  res.att_nll = att.nll;
  // lambda-weighted combination; a zero weight silences an infinite term.
  res.mtl = (lambda > 0.0 ? lambda * ctc.nll : 0.0) +
            (lambda < 1.0 ? (1.0 - lambda) * att.nll : 0.0);

  if (with_grad) {
    if (lambda > 0.0 && ctc.alignable) {
      Mat d_logp = ctc.grad;
      for (double& v : d_logp.d) v *= lambda;
      ctc_head_backward(enc, grid, d_logp, &d_enc);
    }
    encoder_->backward(enc_cache, d_enc);
  }
  return res;
}

}  // namespace e2ea
