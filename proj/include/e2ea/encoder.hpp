// e2ea/encoder.hpp -- shared encoder: pyramid BLSTM stack with per-layer
// linear projections, optional VGG-style convolutional front-end, feature
// augmentation helpers.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_ENCODER_HPP_
#define E2EA_ENCODER_HPP_

#include <optional>
#include <set>
#include <vector>

#include "e2ea/nn.hpp"
#include "e2ea/tensor.hpp"

namespace e2ea {

enum class EncoderVariant { kBlstm, kVggBlstm };

struct EncoderConfig {
  EncoderVariant variant = EncoderVariant::kBlstm;
  int input_dim = 0;       // feature dim D
  int num_layers = 2;      // BLSTM layers
  int hidden = 16;         // cells per direction
  int proj = 16;           // projection size after each BLSTM layer
  std::set<int> subsample_layers;  // layer indices whose output is decimated
  int vgg_c1 = 64, vgg_c2 = 128;   // conv channel widths for the VGG variant

  void validate() const;
};

struct FeatureSequence {
  Mat frames;                     // T x D
  std::optional<Tensor> channels;  // {3, T, D}: static / delta / delta-delta
  int length() const { return frames.rows; }
};

struct EncoderOutput {
  Mat hidden;  // T' x E
};

class Encoder {
 public:
  Encoder(ParamStore& ps, const EncoderConfig& cfg);

  int output_dim() const { return cfg_.proj; }
  const EncoderConfig& config() const { return cfg_; }

  struct Cache {
    // VGG front-end intermediates (vgg variant only).
    std::vector<Tensor> conv_in;           // input of each conv
    std::vector<Conv2d::Cache> conv;       // per conv layer
    std::vector<Tensor> pool_in, pool_out;
    std::vector<MaxPoolCache> pool;
    // Per BLSTM layer.
    std::vector<Mat> layer_in;             // input matrix of each layer
    std::vector<Blstm::Cache> blstm;
    std::vector<Mat> sub;                  // post-subsample matrix (proj input)
    Mat out;                               // final T' x proj
  };

  EncoderOutput forward(const FeatureSequence& x, Cache* cache) const;
  // d_out is the grad wrt the encoder output. Parameter grads accumulate in
  // the store; input grads are not produced (features are data).
  void backward(const Cache& cc, const Mat& d_out) const;

 private:
  Mat vgg_forward(const Tensor& in, Cache* cache) const;
  void vgg_backward(const Cache& cc, const Mat& d_flat) const;

  EncoderConfig cfg_;
  std::vector<Conv2d> convs_;
  std::vector<Blstm> blstms_;
  std::vector<Linear> projs_;
  int vgg_freq_out_ = 0;
};

// Regression deltas (window 2, edge replication); output {3, T, D}.
Tensor compute_deltas(const Mat& x);

// Linear time-axis rescaling; output length max(1, floor(T/factor)).
Mat speed_perturb(const Mat& x, double factor);

// Keeps rows 0, 2, 4, ... (ceil semantics).
Mat subsample_rows(const Mat& x);

}  // namespace e2ea

#endif  // E2EA_ENCODER_HPP_
