// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "e2ea/ctc.hpp"

using namespace e2ea;

namespace {

PosteriorGrid uniform_grid(int t, int dim) {
  PosteriorGrid g;
  g.logp = Mat(t, dim);
  g.logp.fill(-std::log(static_cast<double>(dim)));
  return g;
}

PosteriorGrid random_grid(std::mt19937_64& rng, int t, int dim) {
  PosteriorGrid g;
  g.logp = Mat(t, dim);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int r = 0; r < t; ++r) {
    Vec row(dim);
    for (double& v : row) v = u(rng);
    g.logp.set_row(r, log_softmax(row));
  }
  return g;
}

// Reference: enumerate every framewise sequence over {blank} + U, collapse
// (drop repeats, then blanks), and sum the probability of those matching
// the target.
double enumerate_logprob(const PosteriorGrid& grid, const LabelSequence& target) {
  const int T = grid.frames(), K = grid.dim();
  double total = kLogZero;
  std::vector<int> z(T, 0);
  for (;;) {
    LabelSequence collapsed;
    int prev = -1;
    for (int t = 0; t < T; ++t) {
      if (z[t] != prev && z[t] != 0) collapsed.push_back(z[t]);
      prev = z[t];
    }
    if (collapsed == target) {
      double lp = 0.0;
      for (int t = 0; t < T; ++t) lp += grid.logp.at(t, z[t]);
      total = log_add(total, lp);
    }
    int i = T - 1;
    while (i >= 0 && z[i] == K - 1) z[i--] = 0;
    if (i < 0) break;
    ++z[i];
  }
  return total;
}

}  // namespace

TEST_CASE("ctc_loss on the uniform 2-frame grid, target 'a'") {
  PosteriorGrid g = uniform_grid(2, 2);  // p = 0.5 everywhere
  CtcLossResult res = ctc_loss(g, {1});
  // Alignments: aa, a-, -a -> 3 * 0.25.
  CHECK(res.alignable);
  CHECK(res.nll == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(ctc_full_logprob(g, {1}) == doctest::Approx(std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("repeat needs an intervening blank: 'aa' on 2 frames unalignable") {
  PosteriorGrid g = uniform_grid(2, 2);
  CtcLossResult res = ctc_loss(g, {1, 1});
  CHECK(!res.alignable);
  CHECK(std::isinf(res.nll));
  for (double v : res.grad.d) CHECK(v == 0.0);
}

TEST_CASE("empty target scores the all-blank alignment") {
  PosteriorGrid g = uniform_grid(2, 2);
  CHECK(ctc_full_logprob(g, {}) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("ctc_loss matches framewise enumeration on random grids") {
  std::mt19937_64 rng(21);
  for (int it = 0; it < 40; ++it) {
    int T = 2 + it % 4;           // up to 5 frames
    int n = 1 + it % 3;           // up to 3 characters
    PosteriorGrid g = random_grid(rng, T, n + 1);
    int L = 1 + it % 3;
    LabelSequence target;
    std::uniform_int_distribution<int> lab(1, n);
    for (int l = 0; l < L; ++l) target.push_back(lab(rng));
    double want = enumerate_logprob(g, target);
    CtcLossResult res = ctc_loss(g, target);
    if (std::isinf(want) && want < 0) {
      CHECK(!res.alignable);
    } else {
      REQUIRE(res.alignable);
      CHECK(res.nll == doctest::Approx(-want).epsilon(1e-10));
    }
  }
}

TEST_CASE("prefix_init: blank-run products and zero prefix_logprob") {
  PosteriorGrid g = uniform_grid(2, 2);
  CtcPrefixState s = prefix_init(g);
  CHECK(s.prefix_logprob == 0.0);
  CHECK(s.log_gamma_b[0] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(s.log_gamma_b[1] == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  CHECK(s.log_gamma_n[0] == kLogZero);

  PosteriorGrid g1 = uniform_grid(1, 3);
  CtcPrefixState s1 = prefix_init(g1);
  CHECK(s1.log_gamma_b[0] == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-12));
}

TEST_CASE("prefix_extend worked examples on uniform grids") {
  Vocab v{1};
  PosteriorGrid g1 = uniform_grid(1, 2);
  CtcPrefixState s1 = prefix_extend(prefix_init(g1), g1, {}, 1, v);
  CHECK(s1.prefix_logprob == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  PosteriorGrid g2 = uniform_grid(2, 2);
  CtcPrefixState s2 = prefix_extend(prefix_init(g2), g2, {}, 1, v);
  CHECK(s2.prefix_logprob == doctest::Approx(std::log(0.75)).epsilon(1e-12));

  // eos gives the terminal full-sequence probability.
  CtcPrefixState done = prefix_extend(s2, g2, {1}, v.eos(), v);
  CHECK(done.prefix_logprob == doctest::Approx(std::log(0.75)).epsilon(1e-12));

  // Decomposition on the 2-frame grid: 1.0 = p_full("") + p("a", ...).
  double p_empty = std::exp(ctc_full_logprob(g2, {}));
  CHECK(p_empty + std::exp(s2.prefix_logprob) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prefix_extend rejects blank and sos") {
  Vocab v{2};
  PosteriorGrid g = uniform_grid(3, 3);
  CtcPrefixState s = prefix_init(g);
  CHECK_THROWS(prefix_extend(s, g, {}, v.blank(), v));
  CHECK_THROWS(prefix_extend(s, g, {}, v.sos(), v));
}

TEST_CASE("brute_force_prefix_oracle basics") {
  PosteriorGrid g = uniform_grid(3, 3);
  CHECK(brute_force_prefix_oracle(g, {}, 2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(brute_force_prefix_oracle(g, {1, 2, 1, 2}, 2) == kLogZero);
  PosteriorGrid big = uniform_grid(9, 3);
  CHECK_THROWS(brute_force_prefix_oracle(big, {}, 2));
}

TEST_CASE("prefix_extend matches the brute-force oracle on random grids") {
  std::mt19937_64 rng(22);
  for (int it = 0; it < 25; ++it) {
    int n = 1 + it % 2;
    int T = 3 + it % 4;  // up to 6 frames
    Vocab v{n};
    PosteriorGrid g = random_grid(rng, T, n + 1);
    // Walk every prefix of length <= 3, comparing cumulative scores.
    std::vector<std::pair<LabelSequence, CtcPrefixState>> frontier{
        {{}, prefix_init(g)}};
    for (int depth = 0; depth < 3; ++depth) {
      std::vector<std::pair<LabelSequence, CtcPrefixState>> next;
      for (auto& [prefix, state] : frontier) {
        double children = kLogZero;
        for (int c = 1; c <= n; ++c) {
          CtcPrefixState ext = prefix_extend(state, g, prefix, c, v);
          LabelSequence np = prefix;
          np.push_back(c);
          double want = brute_force_prefix_oracle(g, np, n);
          if (std::isinf(want)) {
            CHECK(std::isinf(ext.prefix_logprob));
          } else {
            CHECK(ext.prefix_logprob == doctest::Approx(want).epsilon(1e-10));
          }
          // Monotone: a longer prefix can only lose probability mass.
          CHECK(ext.prefix_logprob <= state.prefix_logprob + 1e-12);
          children = log_add(children, ext.prefix_logprob);
          next.emplace_back(std::move(np), std::move(ext));
        }
        // Decomposition: p(g,...) = p_full(g) + sum_c p(g.c,...).
        double full = ctc_full_logprob(g, prefix);
        double recomposed = log_add(full, children);
        if (std::isinf(state.prefix_logprob)) {
          CHECK(std::isinf(recomposed));
        } else {
          CHECK(recomposed == doctest::Approx(state.prefix_logprob).epsilon(1e-10));
        }
      }
      frontier = std::move(next);
    }
  }
}

TEST_CASE("terminal eos score equals ctc_full_logprob") {
  std::mt19937_64 rng(23);
  Vocab v{2};
  PosteriorGrid g = random_grid(rng, 5, 3);
  CtcPrefixState s = prefix_init(g);
  LabelSequence prefix;
  for (int c : {1, 2}) {
    s = prefix_extend(s, g, prefix, c, v);
    prefix.push_back(c);
  }
  CtcPrefixState done = prefix_extend(s, g, prefix, v.eos(), v);
  CHECK(done.prefix_logprob ==
        doctest::Approx(ctc_full_logprob(g, prefix)).epsilon(1e-12));
}

TEST_CASE("grid rows stay normalized") {
  std::mt19937_64 rng(24);
  PosteriorGrid g = random_grid(rng, 7, 4);
  for (int t = 0; t < g.frames(); ++t)
    CHECK(std::fabs(log_sum_exp(g.logp.row(t))) < 1e-10);
}
