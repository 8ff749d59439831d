// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/decode.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace e2ea {

namespace {

// lambda-weighted joint score; a zero weight silences its term so that
// lambda = 0 is bitwise the pure attention score.
double combine(double lambda, double ctc, double att) {
  double s = 0.0;
  if (lambda > 0.0) s += lambda * ctc;
  if (lambda < 1.0) s += (1.0 - lambda) * att;
  return s;
}

struct Hyp {
  LabelSequence seq;
  double att = 0.0;
  double joint = 0.0;
  CtcPrefixState ctc;
  DecoderState dec;
  RnnLmState lm;
};

bool better_scored(const ScoredSeq& a, const ScoredSeq& b) {
  if (a.joint != b.joint) return a.joint > b.joint;
  return a.seq < b.seq;
}

// Shared engine: `lambda` > 0 switches on incremental CTC prefix scoring.
DecodeResult beam_core(const Model& model, const Mat& enc,
                       const BeamConfig& cfg, double lambda, const RnnLm* lm) {
  E2EA_CHECK(enc.rows >= 1, "beam search: empty encoder output");
  E2EA_CHECK(cfg.beam_width >= 1, "beam search: beam_width must be >= 1");
  const Vocab& vocab = model.vocab();
  const bool use_ctc = lambda > 0.0;
  const bool use_lm = cfg.fusion.mode != FusionMode::kNone && lm != nullptr;
  const int max_len =
      cfg.max_len > 0
          ? cfg.max_len
          : std::max(1, static_cast<int>(cfg.max_len_ratio * enc.rows));
  const int nbest_target = cfg.nbest > 0 ? cfg.nbest : cfg.beam_width;

  PosteriorGrid grid;
  if (use_ctc) grid = model.ctc_grid(enc);

  DecodeResult res;
  std::vector<ScoredSeq> finished;
  std::vector<Hyp> beam(1);
  beam[0].dec = model.decoder().init_state(enc.rows);
  if (use_ctc) beam[0].ctc = prefix_init(grid);
  if (use_lm) beam[0].lm = lm->init_state();

  while (!beam.empty()) {
    std::vector<Hyp> candidates;
    for (Hyp& hyp : beam) {
      hyp.dec.last_label = hyp.seq.empty() ? vocab.sos() : hyp.seq.back();
      DecoderState next;
      Vec pre = model.decoder().step(enc, hyp.dec, &next, nullptr);
      Vec lm_pre;
      RnnLmState lm_next;
      if (use_lm) lm_pre = lm->step(hyp.lm, hyp.dec.last_label, &lm_next, nullptr);
      Vec logp = fuse(pre, use_lm ? &lm_pre : nullptr, cfg.fusion);
      // Character expansions.
      if (static_cast<int>(hyp.seq.size()) < max_len) {
        for (int c = 1; c <= vocab.n_chars; ++c) {
          Hyp h2;
          h2.seq = hyp.seq;
          h2.seq.push_back(c);
          h2.att = hyp.att + logp[vocab.dec_index(c)];
          if (use_ctc) {
            h2.ctc = prefix_extend(hyp.ctc, grid, hyp.seq, c, vocab);
            h2.joint = combine(lambda, h2.ctc.prefix_logprob, h2.att);
          } else {
            h2.joint = combine(lambda, 0.0, h2.att);
          }
          h2.dec = next;
          if (use_lm) h2.lm = lm_next;
          candidates.push_back(std::move(h2));
          ++res.expanded;
        }
      }
      // End-of-sequence: move to the finished pool with the terminal score.
      ScoredSeq done;
      done.seq = hyp.seq;
      done.att = hyp.att + logp[vocab.dec_index(vocab.eos())];
      if (use_ctc) {
        done.ctc = prefix_extend(hyp.ctc, grid, hyp.seq, vocab.eos(), vocab)
                       .prefix_logprob;
        done.joint = combine(lambda, done.ctc, done.att);
      } else {
        done.ctc = 0.0;
        done.joint = combine(lambda, 0.0, done.att);
      }
      finished.push_back(std::move(done));
      ++res.expanded;
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Hyp& a, const Hyp& b) {
                if (a.joint != b.joint) return a.joint > b.joint;
                return a.seq < b.seq;
              });
    if (static_cast<int>(candidates.size()) > cfg.beam_width)
      candidates.resize(cfg.beam_width);
    beam = std::move(candidates);
    // End detection: extensions can only lower both score components, so
    // once the n-best finished pool dominates every live hypothesis the
    // search is complete.
    std::sort(finished.begin(), finished.end(), better_scored);
    if (static_cast<int>(finished.size()) >= nbest_target && !beam.empty()) {
      double bar = finished[nbest_target - 1].joint;
      if (beam.front().joint < bar) beam.clear();
    }
  }
  if (static_cast<int>(finished.size()) > nbest_target)
    finished.resize(nbest_target);
  res.nbest = std::move(finished);
  E2EA_CHECK(!res.nbest.empty(), "beam search produced no hypotheses");
  res.best = res.nbest.front().seq;
  return res;
}

}  // namespace

DecodeResult beam_search_attention(const Model& model, const Mat& enc,
                                   const BeamConfig& cfg, const RnnLm* lm) {
  return beam_core(model, enc, cfg, /*lambda=*/0.0, lm);
}

DecodeResult rescore_with_ctc(const Model& model, const Mat& enc,
                              const DecodeResult& nbest, double lambda) {
  PosteriorGrid grid = model.ctc_grid(enc);
  DecodeResult res;
  res.expanded = nbest.expanded;
  res.nbest.reserve(nbest.nbest.size());
  for (const ScoredSeq& s : nbest.nbest) {
    ScoredSeq r = s;
    r.ctc = ctc_full_logprob(grid, s.seq);  // -inf when unalignable
    r.joint = combine(lambda, r.ctc, r.att);
    res.nbest.push_back(std::move(r));
  }
  std::sort(res.nbest.begin(), res.nbest.end(), better_scored);
  res.best = res.nbest.front().seq;
  return res;
}

DecodeResult beam_search_one_pass(const Model& model, const Mat& enc,
                                  const BeamConfig& cfg, const RnnLm* lm) {
  E2EA_CHECK(cfg.lambda >= 0.0 && cfg.lambda <= 1.0,
             "beam search: lambda out of range");
  return beam_core(model, enc, cfg, cfg.lambda, lm);
}

std::pair<LabelSequence, double> exhaustive_oracle(const Model& model,
                                                   const Mat& enc,
                                                   double lambda, int max_len,
                                                   const FusionConfig& fusion,
                                                   const RnnLm* lm) {
  const Vocab& vocab = model.vocab();
  double count = std::pow(vocab.n_chars + 1.0, max_len);
  E2EA_CHECK(count <= 1e5, "exhaustive_oracle: instance too large");
  const bool use_lm = fusion.mode != FusionMode::kNone && lm != nullptr;
  PosteriorGrid grid = model.ctc_grid(enc);

  auto att_score = [&](const LabelSequence& seq) {
    DecoderState state = model.decoder().init_state(enc.rows);
    RnnLmState lm_state;
    if (use_lm) lm_state = lm->init_state();
    double s = 0.0;
    const int L = static_cast<int>(seq.size());
    for (int l = 0; l <= L; ++l) {
      state.last_label = (l == 0) ? vocab.sos() : seq[l - 1];
      DecoderState next;
      Vec pre = model.decoder().step(enc, state, &next, nullptr);
      Vec lm_pre;
      if (use_lm) {
        RnnLmState lm_next;
        lm_pre = lm->step(lm_state, state.last_label, &lm_next, nullptr);
        lm_state = lm_next;
      }
      Vec logp = fuse(pre, use_lm ? &lm_pre : nullptr, fusion);
      int out_label = (l == L) ? vocab.eos() : seq[l];
      s += logp[vocab.dec_index(out_label)];
      state = next;
    }
    return s;
  };

  LabelSequence best_seq;
  double best = kLogZero;
  bool have = false;
  LabelSequence seq;
  std::function<void()> rec = [&]() {
    double score =
        combine(lambda, ctc_full_logprob(grid, seq), att_score(seq));
    if (!have || score > best || (score == best && seq < best_seq)) {
      have = true;
      best = score;
      best_seq = seq;
    }
    if (static_cast<int>(seq.size()) >= max_len) return;
    for (int c = 1; c <= vocab.n_chars; ++c) {
      seq.push_back(c);
      rec();
      seq.pop_back();
    }
  };
  rec();
  return {best_seq, best};
}

int levenshtein(const LabelSequence& a, const LabelSequence& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  std::vector<int> prev(m + 1), cur(m + 1);
  for (int j = 0; j <= m; ++j) prev[j] = j;
  for (int i = 1; i <= n; ++i) {
    cur[0] = i;
    for (int j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    prev.swap(cur);
  }
  return prev[m];
}

double cer(const LabelSequence& ref, const LabelSequence& hyp) {
  if (ref.empty()) throw std::invalid_argument("cer: empty reference");
  return static_cast<double>(levenshtein(ref, hyp)) / ref.size();
}

}  // namespace e2ea
