// e2ea/decode.hpp -- beam-search decoding: attention-only, CTC rescoring of
// n-best lists, one-pass joint CTC/attention(/LM) scoring; exhaustive oracle;
// CER metric.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_DECODE_HPP_
#define E2EA_DECODE_HPP_

#include <utility>
#include <vector>

#include "e2ea/model.hpp"

namespace e2ea {

enum class DecodeMode { kAttention, kRescoring, kOnePass };

struct BeamConfig {
  int beam_width = 20;
  double lambda = 0.5;
  DecodeMode mode = DecodeMode::kOnePass;
  FusionConfig fusion;
  double max_len_ratio = 1.0;  // of the encoder output length
  int max_len = 0;             // explicit cap; 0 = use the ratio
  int nbest = 0;               // 0 = beam_width
};

struct ScoredSeq {
  LabelSequence seq;
  double att = 0.0;
  double ctc = 0.0;
  double joint = 0.0;
};

struct DecodeResult {
  LabelSequence best;
  std::vector<ScoredSeq> nbest;  // sorted by joint score descending
  long expanded = 0;
};

// Output-label synchronous beam search scored by the attention decoder only
// (joint column equals the attention score).
DecodeResult beam_search_attention(const Model& model, const Mat& enc,
                                   const BeamConfig& cfg,
                                   const RnnLm* lm = nullptr);

// Re-rank complete hypotheses by lambda*ctc_full_logprob + (1-lambda)*att.
DecodeResult rescore_with_ctc(const Model& model, const Mat& enc,
                              const DecodeResult& nbest, double lambda);

// One-pass joint search: candidates scored by
// lambda*alpha_ctc(g) + (1-lambda)*alpha_att(g) during expansion, with the
// CTC prefix probabilities advanced incrementally per hypothesis.
DecodeResult beam_search_one_pass(const Model& model, const Mat& enc,
                                  const BeamConfig& cfg,
                                  const RnnLm* lm = nullptr);

// Scores every sequence of length <= max_len by the joint criterion
// (teacher-forced attention); ties broken lexicographically by label ids.
// Refuses instances with (|U|+1)^max_len > 1e5.
std::pair<LabelSequence, double> exhaustive_oracle(
    const Model& model, const Mat& enc, double lambda, int max_len,
    const FusionConfig& fusion = {}, const RnnLm* lm = nullptr);

int levenshtein(const LabelSequence& a, const LabelSequence& b);

// Edit distance over reference length; ref must be non-empty.
double cer(const LabelSequence& ref, const LabelSequence& hyp);

}  // namespace e2ea

#endif  // E2EA_DECODE_HPP_
