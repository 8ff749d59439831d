// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/ctc.hpp"

#include <cmath>

namespace e2ea {

namespace {

// Extended label sequence with blanks: blank, c1, blank, c2, ..., blank.
std::vector<int> extend_labels(const LabelSequence& target) {
  std::vector<int> ext;
  ext.reserve(2 * target.size() + 1);
  ext.push_back(Vocab::kBlank);
  for (int c : target) {
    ext.push_back(c);
    ext.push_back(Vocab::kBlank);
  }
  return ext;
}

int min_alignment_frames(const LabelSequence& target) {
  int need = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++need;  // mandatory blank between repeats
  return need;
}

}  // namespace

CtcLossResult ctc_loss(const PosteriorGrid& grid, const LabelSequence& target) {
  const int T = grid.frames();
  E2EA_CHECK(T >= 1, "ctc_loss: empty grid");
  for (int c : target)
    E2EA_CHECK(c >= 1 && c < grid.dim(), "ctc_loss: target label out of U");
  CtcLossResult res;
  res.grad = Mat(T, grid.dim());
  if (T < min_alignment_frames(target)) {
    res.nll = std::numeric_limits<double>::infinity();
    res.alignable = false;
    return res;
  }
  const std::vector<int> ext = extend_labels(target);
  const int S = static_cast<int>(ext.size());
  // alpha(t, s): paths emitting ext[0..s] prefix with frame t consumed,
  // emission at t included. beta(t, s): paths for the suffix after frame t.
  Mat alpha(T, S), beta(T, S);
  alpha.fill(kLogZero);
  beta.fill(kLogZero);
  alpha.at(0, 0) = grid.logp.at(0, ext[0]);
  if (S > 1) alpha.at(0, 1) = grid.logp.at(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha.at(t - 1, s);
      if (s >= 1) a = log_add(a, alpha.at(t - 1, s - 1));
      if (s >= 2 && ext[s] != Vocab::kBlank && ext[s] != ext[s - 2])
        a = log_add(a, alpha.at(t - 1, s - 2));
      alpha.at(t, s) = a + grid.logp.at(t, ext[s]);
    }
  }
  double logp_total = alpha.at(T - 1, S - 1);
  if (S > 1) logp_total = log_add(logp_total, alpha.at(T - 1, S - 2));
  if (logp_total == kLogZero) {
    // All paths vanished (possible with -inf posteriors).
    res.nll = std::numeric_limits<double>::infinity();
    res.alignable = false;
    return res;
  }
  beta.at(T - 1, S - 1) = 0.0;
  if (S > 1) beta.at(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double bval = beta.at(t + 1, s) + grid.logp.at(t + 1, ext[s]);
      if (s + 1 < S)
        bval = log_add(bval, beta.at(t + 1, s + 1) + grid.logp.at(t + 1, ext[s + 1]));
      if (s + 2 < S && ext[s + 2] != Vocab::kBlank && ext[s + 2] != ext[s])
        bval = log_add(bval, beta.at(t + 1, s + 2) + grid.logp.at(t + 1, ext[s + 2]));
      beta.at(t, s) = bval;
    }
  }
  res.nll = -logp_total;
  // d(-logP)/d logp(t,k) = -sum_{s: ext[s]==k} exp(alpha + beta - logP).
  for (int t = 0; t < T; ++t) {
    Vec acc(grid.dim(), kLogZero);
    for (int s = 0; s < S; ++s) {
      double ab = alpha.at(t, s) + beta.at(t, s);
      acc[ext[s]] = log_add(acc[ext[s]], ab);
    }
    for (int k = 0; k < grid.dim(); ++k)
      if (acc[k] != kLogZero)
        res.grad.at(t, k) = -std::exp(acc[k] - logp_total);
  }
  return res;
}

double ctc_full_logprob(const PosteriorGrid& grid, const LabelSequence& target) {
  const int T = grid.frames();
  E2EA_CHECK(T >= 1, "ctc_full_logprob: empty grid");
  if (T < min_alignment_frames(target)) return kLogZero;
  const std::vector<int> ext = extend_labels(target);
  const int S = static_cast<int>(ext.size());
  Vec alpha(S, kLogZero), next(S);
  alpha[0] = grid.logp.at(0, ext[0]);
  if (S > 1) alpha[1] = grid.logp.at(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha[s];
      if (s >= 1) a = log_add(a, alpha[s - 1]);
      if (s >= 2 && ext[s] != Vocab::kBlank && ext[s] != ext[s - 2])
        a = log_add(a, alpha[s - 2]);
      next[s] = a + grid.logp.at(t, ext[s]);
    }
    alpha.swap(next);
  }
  double lp = alpha[S - 1];
  if (S > 1) lp = log_add(lp, alpha[S - 2]);
  return lp;
}

CtcPrefixState prefix_init(const PosteriorGrid& grid) {
  const int T = grid.frames();
  CtcPrefixState st;
  st.log_gamma_n.assign(T, kLogZero);
  st.log_gamma_b.resize(T);
  double run = 0.0;
  for (int t = 0; t < T; ++t) {
    run += grid.logp.at(t, Vocab::kBlank);
    st.log_gamma_b[t] = run;
  }
  st.prefix_logprob = 0.0;
  return st;
}

CtcPrefixState prefix_extend(const CtcPrefixState& state,
                             const PosteriorGrid& grid,
                             const LabelSequence& prefix, int c,
                             const Vocab& vocab) {
  const int T = grid.frames();
  E2EA_CHECK(c != Vocab::kBlank && c != vocab.sos(),
             "prefix_extend: c must be in U or eos");
  if (c == vocab.eos()) {
    // nu = eos closes the sequence: the score is the full-sequence
    // probability of the prefix itself.
    CtcPrefixState done;
    done.prefix_logprob =
        log_add(state.log_gamma_n[T - 1], state.log_gamma_b[T - 1]);
    return done;
  }
  E2EA_CHECK(vocab.is_char(c) && c < grid.dim(), "prefix_extend: bad label");
  const bool empty = prefix.empty();
  const int last = empty ? -1 : prefix.back();
  CtcPrefixState out;
  out.log_gamma_n.assign(T, kLogZero);
  out.log_gamma_b.assign(T, kLogZero);
  double psi = kLogZero;
  double gn_prev = kLogZero, gb_prev = kLogZero;  // new-prefix gammas at t-1
  for (int t = 0; t < T; ++t) {
    // phi(t): probability the old prefix is complete just before frame t and
    // a fresh emission of c at t is legal.
    double old_n = (t == 0) ? kLogZero : state.log_gamma_n[t - 1];
    double old_b = (t == 0) ? (empty ? 0.0 : kLogZero) : state.log_gamma_b[t - 1];
    double phi = (c == last) ? old_b : log_add(old_b, old_n);
    double p_c = grid.logp.at(t, c);
    double gn = p_c + log_add(gn_prev, phi);
    double gb = grid.logp.at(t, Vocab::kBlank) + log_add(gb_prev, gn_prev);
    psi = log_add(psi, phi + p_c);
    out.log_gamma_n[t] = gn;
    out.log_gamma_b[t] = gb;
    gn_prev = gn;
    gb_prev = gb;
  }
  out.prefix_logprob = psi;
  return out;
}

double brute_force_prefix_oracle(const PosteriorGrid& grid,
                                 const LabelSequence& prefix, int n_chars) {
  const int T = grid.frames();
  E2EA_CHECK(T <= 8 && n_chars <= 3,
             "brute_force_prefix_oracle: instance too large");
  if (static_cast<int>(prefix.size()) > T) return kLogZero;
  double total = kLogZero;
  // Enumerate every sequence prefix + suffix with total length <= T.
  LabelSequence seq = prefix;
  std::function<void()> rec = [&]() {
    total = log_add(total, ctc_full_logprob(grid, seq));
    if (static_cast<int>(seq.size()) >= T) return;
    for (int c = 1; c <= n_chars; ++c) {
      seq.push_back(c);
      rec();
      seq.pop_back();
    }
  };
  rec();
  return total;
}

}  // namespace e2ea
