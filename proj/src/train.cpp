// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace e2ea {

double mtl_loss(double lambda, double ctc_nll, double att_nll) {
  E2EA_CHECK(lambda >= 0.0 && lambda <= 1.0, "mtl_loss: lambda out of range");
  double loss = 0.0;
  if (lambda > 0.0) loss += lambda * ctc_nll;
  if (lambda < 1.0) loss += (1.0 - lambda) * att_nll;
  return loss;
}

double clip_grad_norm(ParamStore& ps, double tau) {
  E2EA_CHECK(tau > 0.0, "clip_grad_norm: tau must be positive");
  double sq = 0.0;
  for (ParamEntry* e : ps.entries())
    for (double g : e->grad.data) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > tau) {
    double scale = tau / norm;
    for (ParamEntry* e : ps.entries())
      for (double& g : e->grad.data) g *= scale;
  }
  return norm;
}

AdaDelta::AdaDelta(ParamStore& ps, double rho, double eps)
    : rho_(rho), eps_(eps) {
  for (ParamEntry* e : ps.entries()) {
    eg2_.emplace_back(e->value.size(), 0.0);
    edx2_.emplace_back(e->value.size(), 0.0);
  }
}

void AdaDelta::update(ParamStore& ps) {
  const auto& entries = ps.entries();
  E2EA_CHECK(entries.size() == eg2_.size(), "AdaDelta: store shape changed");
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& x = entries[p]->value;
    const Tensor& g = entries[p]->grad;
    Vec& eg2 = eg2_[p];
    Vec& edx2 = edx2_[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      double gi = g.data[i];
      eg2[i] = rho_ * eg2[i] + (1.0 - rho_) * gi * gi;
      double dx = -std::sqrt(edx2[i] + eps_) / std::sqrt(eg2[i] + eps_) * gi;
      edx2[i] = rho_ * edx2[i] + (1.0 - rho_) * dx * dx;
      x.data[i] += dx;
    }
  }
}

Mat toy_templates(const ToyTaskSpec& spec) {
  std::mt19937_64 rng(spec.seed ^ 0x7e3a11ce5u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat tmpl(spec.vocab_size, spec.feature_dim);
  for (double& v : tmpl.d) v = u(rng);
  // Templates must be pairwise distinct; identical random draws would need
  // an astronomically unlucky seed.
  for (int a = 0; a < tmpl.rows; ++a)
    for (int b = a + 1; b < tmpl.rows; ++b) {
      double diff = 0.0;
      for (int d = 0; d < tmpl.cols; ++d)
        diff += std::fabs(tmpl.at(a, d) - tmpl.at(b, d));
      E2EA_CHECK(diff > 1e-9, "toy templates collided; change the seed");
    }
  return tmpl;
}

std::vector<Utterance> generate_toy_dataset(const ToyTaskSpec& spec, int n,
                                            std::uint64_t stream) {
  E2EA_CHECK(n >= 1, "generate_toy_dataset: n must be >= 1");
  E2EA_CHECK(spec.dur_min >= 1 && spec.dur_max >= spec.dur_min,
             "generate_toy_dataset: bad duration range");
  E2EA_CHECK(spec.len_min >= 1 && spec.len_max >= spec.len_min,
             "generate_toy_dataset: bad length range");
  Mat tmpl = toy_templates(spec);
  std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ull + stream + 1);
  std::uniform_int_distribution<int> len_d(spec.len_min, spec.len_max);
  std::uniform_int_distribution<int> lab_d(1, spec.vocab_size);
  std::uniform_int_distribution<int> dur_d(spec.dur_min, spec.dur_max);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Utterance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Utterance utt;
    int L = len_d(rng);
    utt.labels.resize(L);
    std::vector<int> durs(L);
    int T = 0;
    for (int l = 0; l < L; ++l) {
      utt.labels[l] = lab_d(rng);
      durs[l] = dur_d(rng);
      T += durs[l];
    }
    utt.feats = Mat(T, spec.feature_dim);
    int t = 0;
    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < durs[l]; ++k, ++t) {
        for (int d = 0; d < spec.feature_dim; ++d)
          utt.feats.at(t, d) =
              tmpl.at(utt.labels[l] - 1, d) + spec.noise_sigma * noise(rng);
      }
    }
    out.push_back(std::move(utt));
  }
  return out;
}

EpochStats train_epoch(Model& model, AdaDelta& opt,
                       const std::vector<Utterance>& data,
                       const MtlConfig& cfg, int epoch,
                       const FusionConfig& fusion, RnnLm* lm,
                       AdaDelta* lm_opt) {
  E2EA_CHECK(!data.empty(), "train_epoch: empty dataset");
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed + 0x5851f42d4c957f2dull * (epoch + 1));
  std::shuffle(order.begin(), order.end(), rng);

  EpochStats stats;
  int counted = 0;
  const bool joint_lm = fusion.mode != FusionMode::kNone && lm != nullptr;
  for (int idx : order) {
    const Utterance& utt = data[idx];
    model.params().zero_grads();
    if (joint_lm) lm->params_store()->zero_grads();
    Model::LossResult r = model.joint_loss(utt.feats, utt.labels, cfg.lambda,
                                           fusion, joint_lm ? lm : nullptr,
                                           /*with_grad=*/true);
    if (!r.alignable && cfg.lambda > 0.0) {
      ++stats.skipped;
      continue;
    }
    clip_grad_norm(model.params(), cfg.clip_norm);
    opt.update(model.params());
    if (joint_lm && lm_opt) {
      clip_grad_norm(*lm->params_store(), cfg.clip_norm);
      lm_opt->update(*lm->params_store());
    }
    stats.mean_ctc_nll += r.ctc_nll;
    stats.mean_att_nll += r.att_nll;
    stats.mean_mtl += r.mtl;
    ++counted;
  }
  if (counted > 0) {
    stats.mean_ctc_nll /= counted;
    stats.mean_att_nll /= counted;
    stats.mean_mtl /= counted;
  }
  return stats;
}

}  // namespace e2ea
