// e2ea/attdec.hpp -- attention decoder (one LSTM layer + location attention
// + output projection), character RNN-LM, and logit-level fusion.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_ATTDEC_HPP_
#define E2EA_ATTDEC_HPP_

#include <optional>
#include <vector>

#include "e2ea/ctc.hpp"
#include "e2ea/nn.hpp"
#include "e2ea/tensor.hpp"

namespace e2ea {

enum class FusionMode { kNone, kSeparate, kJoint };

struct FusionConfig {
  FusionMode mode = FusionMode::kNone;
  double gamma = 0.3;  // scaling factor for the separately trained LM
};

struct DecoderState {
  Vec h, c;       // decoder LSTM state (q_{l-1})
  Vec a_prev;     // previous attention weights
  int last_label; // previously emitted label (char or sos)
};

struct RnnLmState {
  Vec h, c;
  int last_label;
};

struct DecoderConfig {
  int hidden = 16;
  int att_filters = 4;
  int att_width = 5;
  int att_dim = 16;
};

class AttentionDecoder {
 public:
  AttentionDecoder(ParamStore& ps, const Vocab& vocab, int enc_dim,
                   const DecoderConfig& cfg);

  const Vocab& vocab() const { return vocab_; }
  const DecoderConfig& config() const { return cfg_; }

  DecoderState init_state(int frames) const;

  struct StepCache {
    int in_label;
    LocationAttention::Cache att;
    LstmCell::Cache lstm;
    Vec x;    // [embedding; context]
    Vec pre;  // pre-softmax logits over U + eos
  };

  // One decoding step: returns pre-softmax logits; fills *next (except
  // next->last_label, which the caller sets once the emission is chosen).
  Vec step(const Mat& enc, const DecoderState& state, DecoderState* next,
           StepCache* cache) const;

  // Backward through one step. dpre: grad wrt the returned logits;
  // dh/dc/da: grads wrt the produced state, carried in from the next step.
  // Outputs the carries for the previous step and accumulates d_enc.
  void step_backward(const Mat& enc, const StepCache& cc, const Vec& dpre,
                     const Vec& dh, const Vec& dc, const Vec& da, Mat* d_enc,
                     Vec* dh_prev, Vec* dc_prev, Vec* da_prev) const;

 private:
  Vocab vocab_;
  DecoderConfig cfg_;
  ParamEntry* embed_;  // (n+1) x hidden; rows: chars then sos
  LocationAttention attn_;
  LstmCell lstm_;
  Linear out_;
};

class RnnLm {
 public:
  RnnLm(ParamStore& ps, const Vocab& vocab, int hidden);

  const Vocab& vocab() const { return vocab_; }
  int hidden() const { return hidden_; }
  // The store the LM's parameters were registered in (not owned).
  ParamStore* params_store() const { return store_; }
  RnnLmState init_state() const;

  struct StepCache {
    int in_label;
    LstmCell::Cache lstm;
    Vec x;
    Vec pre;
  };

  Vec step(const RnnLmState& state, int label, RnnLmState* next,
           StepCache* cache) const;
  void step_backward(const StepCache& cc, const Vec& dpre, const Vec& dh,
                     const Vec& dc, Vec* dh_prev, Vec* dc_prev) const;

  // Teacher-forced NLL of a label sequence (predicting c_1..c_L then eos).
  // with_grad backpropagates into the LM parameters.
  double sequence_nll(const LabelSequence& target, bool with_grad,
                      double scale = 1.0);

 private:
  Vocab vocab_;
  int hidden_;
  ParamStore* store_ = nullptr;
  ParamEntry* embed_;  // (n+1) x hidden; rows: chars then sos
  LstmCell lstm_;
  Linear out_;
};

// Log-probability vector from decoder and (optional) LM pre-activations:
// none -> log softmax(dec); separate -> log softmax(dec + gamma*lm);
// joint -> log softmax(dec + lm).
Vec fuse(const Vec& dec_pre, const Vec* lm_pre, const FusionConfig& cfg);

struct AttNllResult {
  double nll = 0.0;
};

// Teacher-forced attention NLL with optional LM fusion. If with_grad, the
// (scaled) gradients accumulate into decoder and LM parameters and *d_enc.
AttNllResult attention_nll(const AttentionDecoder& dec, const Mat& enc,
                           const LabelSequence& target,
                           const FusionConfig& fusion, RnnLm* lm,
                           bool with_grad, double scale, Mat* d_enc);

}  // namespace e2ea

#endif  // E2EA_ATTDEC_HPP_
