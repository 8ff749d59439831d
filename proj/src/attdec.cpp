// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/attdec.hpp"

#include <cmath>

namespace e2ea {

AttentionDecoder::AttentionDecoder(ParamStore& ps, const Vocab& vocab,
                                   int enc_dim, const DecoderConfig& cfg)
    : vocab_(vocab), cfg_(cfg) {
  embed_ = ps.add("dec.embed", {vocab.n_chars + 1, cfg.hidden});
  attn_.init(ps, "dec.att", enc_dim, cfg.hidden, cfg.att_filters,
             cfg.att_width, cfg.att_dim);
  lstm_.init(ps, "dec.lstm", cfg.hidden + enc_dim, cfg.hidden);
  out_.init(ps, "dec.out", cfg.hidden, vocab.dec_dim());
}

DecoderState AttentionDecoder::init_state(int frames) const {
  E2EA_CHECK(frames >= 1, "decoder: empty encoder output");
  DecoderState s;
  s.h.assign(cfg_.hidden, 0.0);
  s.c.assign(cfg_.hidden, 0.0);
  s.a_prev.assign(frames, 1.0 / frames);
  s.last_label = vocab_.sos();
  return s;
}

Vec AttentionDecoder::step(const Mat& enc, const DecoderState& state,
                           DecoderState* next, StepCache* cache) const {
  E2EA_CHECK(enc.rows >= 1, "decoder_step: empty encoder output");
  StepCache scratch;
  StepCache* cc = cache ? cache : &scratch;
  cc->in_label = state.last_label;
  int row = vocab_.emb_index(state.last_label);
  Vec emb(embed_->value.data.begin() + static_cast<std::size_t>(row) * cfg_.hidden,
          embed_->value.data.begin() + static_cast<std::size_t>(row + 1) * cfg_.hidden);
  cc->att = attn_.step(enc, state.h, state.a_prev);
  cc->x = emb;
  cc->x.insert(cc->x.end(), cc->att.r.begin(), cc->att.r.end());
  cc->lstm = lstm_.step(cc->x, state.h, state.c);
  cc->pre = out_.forward(cc->lstm.h);
  if (next) {
    next->h = cc->lstm.h;
    next->c = cc->lstm.c;
    next->a_prev = cc->att.a;
    next->last_label = -1;  // chosen by the caller
  }
  return cc->pre;
}

void AttentionDecoder::step_backward(const Mat& enc, const StepCache& cc,
                                     const Vec& dpre, const Vec& dh,
                                     const Vec& dc, const Vec& da, Mat* d_enc,
                                     Vec* dh_prev, Vec* dc_prev,
                                     Vec* da_prev) const {
  const int H = cfg_.hidden;
  const int E = static_cast<int>(cc.att.r.size());
  Vec dh_total = dh;
  out_.backward(cc.lstm.h, dpre, &dh_total);
  Vec dx(H + E, 0.0);
  lstm_.backward(cc.lstm, dh_total, dc, &dx, dh_prev, dc_prev);
  // Split LSTM input grad into embedding and context parts.
  int row = vocab_.emb_index(cc.in_label);
  for (int j = 0; j < H; ++j) embed_->grad(row, j) += dx[j];
  Vec dr(dx.begin() + H, dx.end());
  // The attention query was the previous hidden state.
  attn_.backward(enc, cc.att, da, dr, d_enc, dh_prev, da_prev);
}

// ------------------------------------------------------------------ RnnLm

RnnLm::RnnLm(ParamStore& ps, const Vocab& vocab, int hidden)
    : vocab_(vocab), hidden_(hidden), store_(&ps) {
  embed_ = ps.add("lm.embed", {vocab.n_chars + 1, hidden});
  lstm_.init(ps, "lm.lstm", hidden, hidden);
  out_.init(ps, "lm.out", hidden, vocab.dec_dim());
}

RnnLmState RnnLm::init_state() const {
  RnnLmState s;
  s.h.assign(hidden_, 0.0);
  s.c.assign(hidden_, 0.0);
  s.last_label = vocab_.sos();
  return s;
}

Vec RnnLm::step(const RnnLmState& state, int label, RnnLmState* next,
                StepCache* cache) const {
  StepCache scratch;
  StepCache* cc = cache ? cache : &scratch;
  cc->in_label = label;
  int row = vocab_.emb_index(label);
  cc->x.assign(embed_->value.data.begin() + static_cast<std::size_t>(row) * hidden_,
               embed_->value.data.begin() + static_cast<std::size_t>(row + 1) * hidden_);
  cc->lstm = lstm_.step(cc->x, state.h, state.c);
  cc->pre = out_.forward(cc->lstm.h);
  if (next) {
    next->h = cc->lstm.h;
    next->c = cc->lstm.c;
    next->last_label = label;
  }
  return cc->pre;
}

void RnnLm::step_backward(const StepCache& cc, const Vec& dpre, const Vec& dh,
                          const Vec& dc, Vec* dh_prev, Vec* dc_prev) const {
  Vec dh_total = dh;
  out_.backward(cc.lstm.h, dpre, &dh_total);
  Vec dx(hidden_, 0.0);
  lstm_.backward(cc.lstm, dh_total, dc, &dx, dh_prev, dc_prev);
  int row = vocab_.emb_index(cc.in_label);
  for (int j = 0; j < hidden_; ++j) embed_->grad(row, j) += dx[j];
}

double RnnLm::sequence_nll(const LabelSequence& target, bool with_grad,
                           double scale) {
  const int L = static_cast<int>(target.size());
  RnnLmState state = init_state();
  std::vector<StepCache> caches(L + 1);
  std::vector<Vec> dpres(L + 1);
  double nll = 0.0;
  for (int l = 0; l <= L; ++l) {
    int in = (l == 0) ? vocab_.sos() : target[l - 1];
    int out_label = (l == L) ? vocab_.eos() : target[l];
    RnnLmState next;
    Vec pre = step(state, in, &next, &caches[l]);
    Vec logp = log_softmax(pre);
    int k = vocab_.dec_index(out_label);
    nll -= logp[k];
    if (with_grad) {
      Vec p = softmax(pre);
      p[k] -= 1.0;
      for (double& v : p) v *= scale;
      dpres[l] = std::move(p);
    }
    state = next;
  }
  if (with_grad) {
    Vec dh(hidden_, 0.0), dc(hidden_, 0.0);
    for (int l = L; l >= 0; --l) {
      Vec dhp(hidden_, 0.0), dcp(hidden_, 0.0);
      step_backward(caches[l], dpres[l], dh, dc, &dhp, &dcp);
      dh = std::move(dhp);
      dc = std::move(dcp);
    }
  }
  return nll;
}

// ------------------------------------------------------------------- fuse

Vec fuse(const Vec& dec_pre, const Vec* lm_pre, const FusionConfig& cfg) {
  if (cfg.mode == FusionMode::kNone || lm_pre == nullptr)
    return log_softmax(dec_pre);
  E2EA_CHECK(lm_pre->size() == dec_pre.size(), "fuse: dim mismatch");
  E2EA_CHECK(cfg.gamma >= 0.0, "fuse: gamma must be non-negative");
  double g = (cfg.mode == FusionMode::kJoint) ? 1.0 : cfg.gamma;
  Vec s(dec_pre.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = dec_pre[i] + g * (*lm_pre)[i];
  return log_softmax(s);
}

// ---------------------------------------------------------- attention_nll

AttNllResult attention_nll(const AttentionDecoder& dec, const Mat& enc,
                           const LabelSequence& target,
                           const FusionConfig& fusion, RnnLm* lm,
                           bool with_grad, double scale, Mat* d_enc) {
  const Vocab& vocab = dec.vocab();
  const int L = static_cast<int>(target.size());
  const bool use_lm = fusion.mode != FusionMode::kNone && lm != nullptr;
  const double g = (fusion.mode == FusionMode::kJoint) ? 1.0 : fusion.gamma;

  DecoderState state = dec.init_state(enc.rows);
  RnnLmState lm_state;
  if (use_lm) lm_state = lm->init_state();

  std::vector<AttentionDecoder::StepCache> caches(L + 1);
  std::vector<RnnLm::StepCache> lm_caches(L + 1);
  std::vector<Vec> d_dec_pre(L + 1), d_lm_pre(L + 1);
  double nll = 0.0;
  for (int l = 0; l <= L; ++l) {
    int in = (l == 0) ? vocab.sos() : target[l - 1];
    int out_label = (l == L) ? vocab.eos() : target[l];
    state.last_label = in;
    DecoderState next;
    Vec pre = dec.step(enc, state, &next, &caches[l]);
    Vec lm_pre;
    if (use_lm) {
      RnnLmState lm_next;
      lm_pre = lm->step(lm_state, in, &lm_next, &lm_caches[l]);
      lm_state = lm_next;
    }
    Vec logp = fuse(pre, use_lm ? &lm_pre : nullptr, fusion);
    int k = vocab.dec_index(out_label);
    nll -= logp[k];
    if (with_grad) {
      // d nll / d s where s is the fused pre-activation.
      Vec ds(logp.size());
      for (std::size_t i = 0; i < logp.size(); ++i) ds[i] = std::exp(logp[i]);
      ds[k] -= 1.0;
      for (double& v : ds) v *= scale;
      if (use_lm) {
        d_lm_pre[l].resize(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) d_lm_pre[l][i] = g * ds[i];
      }
      d_dec_pre[l] = std::move(ds);
    }
    state = next;
  }
  if (with_grad) {
    const int H = dec.config().hidden;
    Vec dh(H, 0.0), dc(H, 0.0), da(enc.rows, 0.0);
    for (int l = L; l >= 0; --l) {
      Vec dhp(H, 0.0), dcp(H, 0.0), dap(enc.rows, 0.0);
      dec.step_backward(enc, caches[l], d_dec_pre[l], dh, dc, da, d_enc, &dhp,
                        &dcp, &dap);
      dh = std::move(dhp);
      dc = std::move(dcp);
      da = std::move(dap);
    }
    if (use_lm) {
      Vec lh(lm->hidden(), 0.0), lc(lm->hidden(), 0.0);
      for (int l = L; l >= 0; --l) {
        Vec lhp(lm->hidden(), 0.0), lcp(lm->hidden(), 0.0);
        lm->step_backward(lm_caches[l], d_lm_pre[l], lh, lc, &lhp, &lcp);
        lh = std::move(lhp);
        lc = std::move(lcp);
      }
    }
  }
  return AttNllResult{nll};
}

}  // namespace e2ea
