// e2ea/model.hpp -- shared-encoder model with CTC and attention heads.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_MODEL_HPP_
#define E2EA_MODEL_HPP_

#include <memory>

#include "e2ea/attdec.hpp"
#include "e2ea/ctc.hpp"
#include "e2ea/encoder.hpp"

namespace e2ea {

struct ModelConfig {
  int vocab_size = 5;
  EncoderConfig encoder;
  DecoderConfig decoder;
};

// Encoder shared by a CTC head (linear + log softmax) and the attention
// decoder. All parameters live in one store so one optimizer step covers
// the whole network.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Encoder& encoder() const { return *encoder_; }
  const AttentionDecoder& decoder() const { return *decoder_; }

  // Builds the feature view the configured encoder variant expects.
  FeatureSequence make_features(const Mat& frames) const;

  Mat encode(const FeatureSequence& x, Encoder::Cache* cache) const;

  // Framewise log-posterior grid from encoder output (with cache for
  // backward: pre-softmax logits are recomputable from rows).
  PosteriorGrid ctc_grid(const Mat& enc) const;

  // Backward of the CTC head given d(logp): through log-softmax and the
  // linear head, accumulating d_enc.
  void ctc_head_backward(const Mat& enc, const PosteriorGrid& grid,
                         const Mat& d_logp, Mat* d_enc) const;

  struct LossResult {
    double ctc_nll = 0.0;
    double att_nll = 0.0;
    double mtl = 0.0;
    bool alignable = true;
  };

  // Forward both heads; if with_grad, accumulates lambda-weighted gradients
  // over all parameters (and the LM's, when fusion is active).
  LossResult joint_loss(const Mat& frames, const LabelSequence& target,
                        double lambda, const FusionConfig& fusion, RnnLm* lm,
                        bool with_grad);

 private:
  ModelConfig cfg_;
  Vocab vocab_;
  ParamStore params_;
  std::unique_ptr<Encoder> encoder_;
  Linear ctc_head_;
  std::unique_ptr<AttentionDecoder> decoder_;
};

}  // namespace e2ea

#endif  // E2EA_MODEL_HPP_
