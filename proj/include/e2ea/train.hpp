// e2ea/train.hpp -- multi-task objective, AdaDelta with gradient clipping,
// synthetic toy-task generation, training loop.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_TRAIN_HPP_
#define E2EA_TRAIN_HPP_

#include <vector>

#include "e2ea/model.hpp"

namespace e2ea {

struct MtlConfig {
  double lambda = 0.5;  // weight of the CTC objective
  int epochs = 15;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
};

// loss = lambda * ctc_nll + (1 - lambda) * att_nll; a zero weight silences
// an infinite term.
double mtl_loss(double lambda, double ctc_nll, double att_nll);

// Scales all gradients by tau/norm when the global L2 norm exceeds tau.
// Returns the pre-clip norm.
double clip_grad_norm(ParamStore& ps, double tau);

// AdaDelta accumulators, one pair per parameter tensor (construction order).
class AdaDelta {
 public:
  explicit AdaDelta(ParamStore& ps, double rho = 0.95, double eps = 1e-8);

  double rho() const { return rho_; }
  double eps() const { return eps_; }

  // x += -(sqrt(E[dx^2]+eps)/sqrt(E[g^2]+eps)) * g with decaying averages.
  void update(ParamStore& ps);

 private:
  double rho_, eps_;
  std::vector<Vec> eg2_, edx2_;
};

struct Utterance {
  Mat feats;
  LabelSequence labels;
};

// Synthetic character-transduction task: each label emits its template
// vector for a sampled duration, plus Gaussian noise.
struct ToyTaskSpec {
  int vocab_size = 5;
  int feature_dim = 8;
  int dur_min = 2, dur_max = 4;
  int len_min = 2, len_max = 8;
  double noise_sigma = 0.1;
  std::uint64_t seed = 7;
};

// Per-character template vectors, derived deterministically from the spec
// seed; pairwise distinct.
Mat toy_templates(const ToyTaskSpec& spec);

// Deterministic dataset: `stream` selects a substream so train/dev/test
// splits are disjoint under one spec.
std::vector<Utterance> generate_toy_dataset(const ToyTaskSpec& spec, int n,
                                            std::uint64_t stream = 0);

struct EpochStats {
  double mean_ctc_nll = 0.0;
  double mean_att_nll = 0.0;
  double mean_mtl = 0.0;
  int skipped = 0;  // unalignable utterances
};

// One pass over the dataset, batch size 1: forward both heads, combine,
// backprop, clip, AdaDelta update. Deterministic given (cfg.seed, epoch).
EpochStats train_epoch(Model& model, AdaDelta& opt,
                       const std::vector<Utterance>& data,
                       const MtlConfig& cfg, int epoch,
                       const FusionConfig& fusion = {}, RnnLm* lm = nullptr,
                       AdaDelta* lm_opt = nullptr);

}  // namespace e2ea

#endif  // E2EA_TRAIN_HPP_
