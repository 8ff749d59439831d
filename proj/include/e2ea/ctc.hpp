// e2ea/ctc.hpp -- CTC loss via forward-backward, full-sequence
// log-probability, and incremental prefix-probability scoring used by the
// one-pass joint beam search.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_CTC_HPP_
#define E2EA_CTC_HPP_

#include <vector>

#include "e2ea/nn.hpp"
#include "e2ea/tensor.hpp"

namespace e2ea {

// Label ids: blank = 0, characters 1..n. sos/eos live outside the CTC grid
// and outside U; the decoder/LM output space is U + eos.
struct Vocab {
  int n_chars = 0;

  static constexpr int kBlank = 0;
  int blank() const { return 0; }
  int eos() const { return n_chars + 1; }
  int sos() const { return n_chars + 2; }
  bool is_char(int id) const { return id >= 1 && id <= n_chars; }

  int grid_dim() const { return n_chars + 1; }  // blank + chars
  int dec_dim() const { return n_chars + 1; }   // chars + eos
  // Index of a label in decoder/LM output vectors: char c -> c-1, eos -> n.
  int dec_index(int id) const {
    if (is_char(id)) return id - 1;
    E2EA_CHECK(id == eos(), "dec_index: label not in U + eos");
    return n_chars;
  }
  // Index of a label in embedding tables: char c -> c-1, sos -> n.
  int emb_index(int id) const {
    if (is_char(id)) return id - 1;
    E2EA_CHECK(id == sos(), "emb_index: label not in U + sos");
    return n_chars;
  }
};

using LabelSequence = std::vector<int>;  // char ids, 1..n

// Framewise log-posteriors, column 0 = blank, column c = character c.
// Every row is a normalized log-distribution.
struct PosteriorGrid {
  Mat logp;
  int frames() const { return logp.rows; }
  int dim() const { return logp.cols; }
};

struct CtcLossResult {
  double nll = 0.0;
  Mat grad;              // d nll / d logp, zero when unalignable
  bool alignable = true;
};

// Forward-backward over the standard blank-interleaved topology. Unalignable
// targets (T' below the minimum alignment length) give nll = +inf, zero
// gradient, alignable = false.
CtcLossResult ctc_loss(const PosteriorGrid& grid, const LabelSequence& target);

// log p_ctc(C|X), forward pass only; equals -ctc_loss(...).nll.
double ctc_full_logprob(const PosteriorGrid& grid, const LabelSequence& target);

// Per-hypothesis forward probabilities over frames, split by whether the
// last emitted symbol was a blank.
struct CtcPrefixState {
  Vec log_gamma_n;  // ends in the prefix's last character
  Vec log_gamma_b;  // ends in blank
  double prefix_logprob = 0.0;
};

// State for the empty prefix; prefix_logprob is exactly 0 (every complete
// sequence has the empty prefix).
CtcPrefixState prefix_init(const PosteriorGrid& grid);

// Extends `state` (which corresponds to `prefix`) by c in U: the new
// prefix_logprob is the cumulative probability of all complete sequences
// starting with prefix plus c, computed in O(T'). Extending by eos returns a
// terminal state whose prefix_logprob is log p_ctc(prefix|X).
CtcPrefixState prefix_extend(const CtcPrefixState& state,
                             const PosteriorGrid& grid,
                             const LabelSequence& prefix, int c,
                             const Vocab& vocab);

// Exhaustive reference for prefix_extend: sums exp(ctc_full_logprob) over
// every label sequence of length <= T' carrying the given prefix. Guarded
// against combinatorial blowup (T' <= 8, |U| <= 3).
double brute_force_prefix_oracle(const PosteriorGrid& grid,
                                 const LabelSequence& prefix, int n_chars);

}  // namespace e2ea

#endif  // E2EA_CTC_HPP_
