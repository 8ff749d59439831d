// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/nn.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace e2ea {

double log_sum_exp(const double* v, int n) {
  E2EA_CHECK(n > 0, "log_sum_exp of empty list");
  double m = kLogZero;
  for (int i = 0; i < n; ++i) {
    assert(!std::isnan(v[i]));
    m = std::max(m, v[i]);
  }
  if (m == kLogZero) return kLogZero;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double log_sum_exp(const Vec& v) {
  return log_sum_exp(v.data(), static_cast<int>(v.size()));
}

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

Vec softmax(const Vec& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

Vec log_softmax(const Vec& logits) {
  double z = log_sum_exp(logits);
  Vec out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - z;
  return out;
}

void log_softmax_rows(Mat* m) {
  for (int r = 0; r < m->rows; ++r) {
    double z = log_sum_exp(m->row_ptr(r), m->cols);
    double* p = m->row_ptr(r);
    for (int c = 0; c < m->cols; ++c) p[c] -= z;
  }
}

// ---------------------------------------------------------------- Linear

void Linear::init(ParamStore& ps, const std::string& prefix, int in_dim,
                  int out_dim) {
  in = in_dim;
  out = out_dim;
  w = ps.add(prefix + ".w", {out, in});
  b = ps.add(prefix + ".b", {out});
}

Vec Linear::forward(const Vec& x) const {
  E2EA_CHECK(static_cast<int>(x.size()) == in, "Linear: input dim mismatch");
  Vec y(out);
  const Tensor& W = w->value;
  for (int o = 0; o < out; ++o) {
    double s = b->value(o);
    const double* wrow = &W.data[static_cast<std::size_t>(o) * in];
    for (int i = 0; i < in; ++i) s += wrow[i] * x[i];
    y[o] = s;
  }
  return y;
}

void Linear::backward(const Vec& x, const Vec& dy, Vec* dx) const {
  Tensor& dW = w->grad;
  Tensor& db = b->grad;
  const Tensor& W = w->value;
  for (int o = 0; o < out; ++o) {
    double g = dy[o];
    db(o) += g;
    double* dwrow = &dW.data[static_cast<std::size_t>(o) * in];
    const double* wrow = &W.data[static_cast<std::size_t>(o) * in];
    for (int i = 0; i < in; ++i) {
      dwrow[i] += g * x[i];
      if (dx) (*dx)[i] += g * wrow[i];
    }
  }
}

// --------------------------------------------------------------- LstmCell

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

void LstmCell::init(ParamStore& ps, const std::string& prefix, int in_dim,
                    int hidden_dim) {
  in = in_dim;
  hidden = hidden_dim;
  wx = ps.add(prefix + ".wx", {4 * hidden, in});
  wh = ps.add(prefix + ".wh", {4 * hidden, hidden});
  b = ps.add(prefix + ".b", {4 * hidden});
}

LstmCell::Cache LstmCell::step(const Vec& x, const Vec& h_prev,
                               const Vec& c_prev) const {
  E2EA_CHECK(static_cast<int>(x.size()) == in, "LstmCell: input dim mismatch");
  E2EA_CHECK(static_cast<int>(h_prev.size()) == hidden &&
                 static_cast<int>(c_prev.size()) == hidden,
             "LstmCell: state dim mismatch");
  Cache cc;
  cc.x = x;
  cc.h_prev = h_prev;
  cc.c_prev = c_prev;
  Vec z(4 * hidden);
  const Tensor& Wx = wx->value;
  const Tensor& Wh = wh->value;
  for (int r = 0; r < 4 * hidden; ++r) {
    double s = b->value(r);
    const double* wxr = &Wx.data[static_cast<std::size_t>(r) * in];
    for (int i = 0; i < in; ++i) s += wxr[i] * x[i];
    const double* whr = &Wh.data[static_cast<std::size_t>(r) * hidden];
    for (int i = 0; i < hidden; ++i) s += whr[i] * h_prev[i];
    z[r] = s;
  }
  cc.i.resize(hidden);
  cc.f.resize(hidden);
  cc.g.resize(hidden);
  cc.o.resize(hidden);
  cc.c.resize(hidden);
  cc.h.resize(hidden);
  for (int j = 0; j < hidden; ++j) {
    cc.i[j] = sigmoid(z[j]);
    cc.f[j] = sigmoid(z[hidden + j]);
    cc.g[j] = std::tanh(z[2 * hidden + j]);
    cc.o[j] = sigmoid(z[3 * hidden + j]);
    cc.c[j] = cc.f[j] * c_prev[j] + cc.i[j] * cc.g[j];
    cc.h[j] = cc.o[j] * std::tanh(cc.c[j]);
  }
  return cc;
}

void LstmCell::backward(const Cache& cc, const Vec& dh, const Vec& dc,
                        Vec* dx, Vec* dh_prev, Vec* dc_prev) const {
  Vec dz(4 * hidden);
  for (int j = 0; j < hidden; ++j) {
    double tc = std::tanh(cc.c[j]);
    double d_o = dh[j] * tc;
    double d_c = dc[j] + dh[j] * cc.o[j] * (1.0 - tc * tc);
    double d_f = d_c * cc.c_prev[j];
    double d_i = d_c * cc.g[j];
    double d_g = d_c * cc.i[j];
    (*dc_prev)[j] += d_c * cc.f[j];
    dz[j] = d_i * cc.i[j] * (1.0 - cc.i[j]);
    dz[hidden + j] = d_f * cc.f[j] * (1.0 - cc.f[j]);
    dz[2 * hidden + j] = d_g * (1.0 - cc.g[j] * cc.g[j]);
    dz[3 * hidden + j] = d_o * cc.o[j] * (1.0 - cc.o[j]);
  }
  Tensor& dWx = wx->grad;
  Tensor& dWh = wh->grad;
  Tensor& dB = b->grad;
  const Tensor& Wx = wx->value;
  const Tensor& Wh = wh->value;
  for (int r = 0; r < 4 * hidden; ++r) {
    double g = dz[r];
    dB(r) += g;
    double* dwxr = &dWx.data[static_cast<std::size_t>(r) * in];
    const double* wxr = &Wx.data[static_cast<std::size_t>(r) * in];
    for (int i = 0; i < in; ++i) {
      dwxr[i] += g * cc.x[i];
      (*dx)[i] += g * wxr[i];
    }
    double* dwhr = &dWh.data[static_cast<std::size_t>(r) * hidden];
    const double* whr = &Wh.data[static_cast<std::size_t>(r) * hidden];
    for (int i = 0; i < hidden; ++i) {
      dwhr[i] += g * cc.h_prev[i];
      (*dh_prev)[i] += g * whr[i];
    }
  }
}

// ------------------------------------------------------------------ Blstm

void Blstm::init(ParamStore& ps, const std::string& prefix, int in_dim,
                 int hidden_dim) {
  fwd.init(ps, prefix + ".fwd", in_dim, hidden_dim);
  bwd.init(ps, prefix + ".bwd", in_dim, hidden_dim);
}

Blstm::Cache Blstm::forward(const Mat& x) const {
  E2EA_CHECK(x.rows >= 1, "blstm_forward: empty input");
  const int T = x.rows;
  const int H = fwd.hidden;
  Cache cc;
  cc.f.reserve(T);
  cc.b.reserve(T);
  cc.out = Mat(T, 2 * H);
  Vec h(H, 0.0), c(H, 0.0);
  for (int t = 0; t < T; ++t) {
    cc.f.push_back(fwd.step(x.row(t), h, c));
    h = cc.f.back().h;
    c = cc.f.back().c;
    for (int j = 0; j < H; ++j) cc.out.at(t, j) = h[j];
  }
  h.assign(H, 0.0);
  c.assign(H, 0.0);
  for (int t = T - 1; t >= 0; --t) {
    cc.b.push_back(bwd.step(x.row(t), h, c));
    h = cc.b.back().h;
    c = cc.b.back().c;
    for (int j = 0; j < H; ++j) cc.out.at(t, H + j) = h[j];
  }
  return cc;
}

void Blstm::backward(const Cache& cc, const Mat& d_out, Mat* dx) const {
  const int T = d_out.rows;
  const int H = fwd.hidden;
  // Forward direction, backprop through time from T-1 to 0.
  Vec dh(H, 0.0), dc(H, 0.0);
  for (int t = T - 1; t >= 0; --t) {
    for (int j = 0; j < H; ++j) dh[j] += d_out.at(t, j);
    Vec dxt(fwd.in, 0.0), dhp(H, 0.0), dcp(H, 0.0);
    fwd.backward(cc.f[t], dh, dc, &dxt, &dhp, &dcp);
    if (dx) dx->add_row(t, dxt);
    dh = dhp;
    dc = dcp;
  }
  // Backward direction: cc.b[k] corresponds to time T-1-k.
  dh.assign(H, 0.0);
  dc.assign(H, 0.0);
  for (int k = static_cast<int>(cc.b.size()) - 1; k >= 0; --k) {
    int t = T - 1 - k;
    for (int j = 0; j < H; ++j) dh[j] += d_out.at(t, H + j);
    Vec dxt(bwd.in, 0.0), dhp(H, 0.0), dcp(H, 0.0);
    bwd.backward(cc.b[k], dh, dc, &dxt, &dhp, &dcp);
    if (dx) dx->add_row(t, dxt);
    dh = dhp;
    dc = dcp;
  }
}

// ----------------------------------------------------------------- Conv2d

void Conv2d::init(ParamStore& ps, const std::string& prefix, int in_ch,
                  int out_ch) {
  cin = in_ch;
  cout = out_ch;
  w = ps.add(prefix + ".w", {cout, cin, 3, 3});
  b = ps.add(prefix + ".b", {cout});
}

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
  E2EA_CHECK(x.dims.size() == 3, "conv2d: rank-3 input expected");
  E2EA_CHECK(x.dims[0] == cin, "conv2d: channel mismatch");
  const int T = x.dims[1], F = x.dims[2];
  Tensor pre({cout, T, F});
  for (int co = 0; co < cout; ++co) {
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) {
        double s = b->value(co);
        for (int ci = 0; ci < cin; ++ci) {
          for (int kt = -1; kt <= 1; ++kt) {
            int tt = t + kt;
            if (tt < 0 || tt >= T) continue;
            for (int kf = -1; kf <= 1; ++kf) {
              int ff = f + kf;
              if (ff < 0 || ff >= F) continue;
              s += w->value(co, ci, kt + 1, kf + 1) * x(ci, tt, ff);
            }
          }
        }
        pre(co, t, f) = s;
      }
    }
  }
  Tensor y = pre;
  for (double& v : y.data) v = std::max(0.0, v);
  if (cache) cache->pre = std::move(pre);
  return y;
}

void Conv2d::backward(const Tensor& x, const Cache& cc, const Tensor& dy,
                      Tensor* dx) const {
  const int T = x.dims[1], F = x.dims[2];
  for (int co = 0; co < cout; ++co) {
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) {
        if (cc.pre(co, t, f) <= 0.0) continue;  // ReLU gate
        double g = dy(co, t, f);
        if (g == 0.0) continue;
        b->grad(co) += g;
        for (int ci = 0; ci < cin; ++ci) {
          for (int kt = -1; kt <= 1; ++kt) {
            int tt = t + kt;
            if (tt < 0 || tt >= T) continue;
            for (int kf = -1; kf <= 1; ++kf) {
              int ff = f + kf;
              if (ff < 0 || ff >= F) continue;
              w->grad(co, ci, kt + 1, kf + 1) += g * x(ci, tt, ff);
              if (dx) (*dx)(ci, tt, ff) += g * w->value(co, ci, kt + 1, kf + 1);
            }
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------- MaxPool

Tensor maxpool2d_forward(const Tensor& x, MaxPoolCache* cache) {
  E2EA_CHECK(x.dims.size() == 3, "maxpool2d: rank-3 input expected");
  const int C = x.dims[0], T = x.dims[1], F = x.dims[2];
  const int To = (T + 1) / 2, Fo = (F + 1) / 2;
  Tensor y({C, To, Fo});
  if (cache) {
    cache->arg_t.assign(static_cast<std::size_t>(C) * To * Fo, -1);
    cache->arg_f.assign(static_cast<std::size_t>(C) * To * Fo, -1);
  }
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < To; ++i) {
      for (int j = 0; j < Fo; ++j) {
        double best = kLogZero;
        int bt = -1, bf = -1;
        for (int dt = 0; dt < 3; ++dt) {
          int t = 2 * i + dt;
          if (t >= T) break;
          for (int df = 0; df < 3; ++df) {
            int f = 2 * j + df;
            if (f >= F) break;
            if (x(c, t, f) > best) {
              best = x(c, t, f);
              bt = t;
              bf = f;
            }
          }
        }
        y(c, i, j) = best;
        if (cache) {
          std::size_t idx = (static_cast<std::size_t>(c) * To + i) * Fo + j;
          cache->arg_t[idx] = bt;
          cache->arg_f[idx] = bf;
        }
      }
    }
  }
  return y;
}

void maxpool2d_backward(const Tensor& x, const Tensor& y, const MaxPoolCache& cc,
                        const Tensor& dy, Tensor* dx) {
  (void)x;
  const int C = y.dims[0], To = y.dims[1], Fo = y.dims[2];
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < To; ++i) {
      for (int j = 0; j < Fo; ++j) {
        std::size_t idx = (static_cast<std::size_t>(c) * To + i) * Fo + j;
        (*dx)(c, cc.arg_t[idx], cc.arg_f[idx]) += dy(c, i, j);
      }
    }
  }
}

// ----------------------------------------------------- LocationAttention

void LocationAttention::init(ParamStore& ps, const std::string& prefix,
                             int enc, int query, int filters, int filter_width,
                             int dim) {
  E2EA_CHECK(filter_width % 2 == 1, "attention filter width must be odd");
  E2EA_CHECK(filters >= 1, "attention needs at least one filter");
  nfilt = filters;
  width = filter_width;
  att_dim = dim;
  enc_dim = enc;
  query_dim = query;
  filt = ps.add(prefix + ".filt", {nfilt, width});
  wq = ps.add(prefix + ".wq", {att_dim, query_dim});
  wk = ps.add(prefix + ".wk", {att_dim, enc_dim});
  wf = ps.add(prefix + ".wf", {att_dim, nfilt});
  bias = ps.add(prefix + ".bias", {att_dim});
  score = ps.add(prefix + ".score", {att_dim});
}

LocationAttention::Cache LocationAttention::step(const Mat& keys,
                                                 const Vec& q_prev,
                                                 const Vec& a_prev) const {
  const int T = keys.rows;
  E2EA_CHECK(T >= 1, "location_attention_step: empty input");
  E2EA_CHECK(keys.cols == enc_dim, "attention key dim mismatch");
  E2EA_CHECK(static_cast<int>(a_prev.size()) == T, "a_prev length mismatch");
  Cache cc;
  cc.q = q_prev;
  cc.a_prev = a_prev;
  const int half = (width - 1) / 2;
  cc.f = Mat(T, nfilt);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < nfilt; ++k) {
      double s = 0.0;
      for (int w = 0; w < width; ++w) {
        int src = t + w - half;
        if (src < 0 || src >= T) continue;
        s += filt->value(k, w) * a_prev[src];
      }
      cc.f.at(t, k) = s;
    }
  }
  // Query projection is shared across frames.
  Vec qproj(att_dim);
  for (int a = 0; a < att_dim; ++a) {
    double s = bias->value(a);
    for (int i = 0; i < query_dim; ++i) s += wq->value(a, i) * q_prev[i];
    qproj[a] = s;
  }
  cc.pre = Mat(T, att_dim);
  cc.u = Mat(T, att_dim);
  Vec e(T);
  for (int t = 0; t < T; ++t) {
    double et = 0.0;
    for (int a = 0; a < att_dim; ++a) {
      double s = qproj[a];
      for (int i = 0; i < enc_dim; ++i) s += wk->value(a, i) * keys.at(t, i);
      for (int k = 0; k < nfilt; ++k) s += wf->value(a, k) * cc.f.at(t, k);
      cc.pre.at(t, a) = s;
      double u = std::tanh(s);
      cc.u.at(t, a) = u;
      et += score->value(a) * u;
    }
    e[t] = et;
  }
  cc.a = softmax(e);
  cc.r.assign(enc_dim, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < enc_dim; ++i) cc.r[i] += cc.a[t] * keys.at(t, i);
  }
  return cc;
}

void LocationAttention::backward(const Mat& keys, const Cache& cc,
                                 const Vec& da_out, const Vec& dr, Mat* dkeys,
                                 Vec* dq_prev, Vec* da_prev) const {
  const int T = keys.rows;
  const int half = (width - 1) / 2;
  // Total grad wrt a: external + through r.
  Vec da(T, 0.0);
  for (int t = 0; t < T; ++t) {
    double s = da_out.empty() ? 0.0 : da_out[t];
    for (int i = 0; i < enc_dim; ++i) {
      s += dr[i] * keys.at(t, i);
      if (dkeys) dkeys->at(t, i) += dr[i] * cc.a[t];
    }
    da[t] = s;
  }
  // Softmax backward.
  double dot = 0.0;
  for (int t = 0; t < T; ++t) dot += cc.a[t] * da[t];
  Vec de(T);
  for (int t = 0; t < T; ++t) de[t] = cc.a[t] * (da[t] - dot);
  // Through the scoring MLP.
  Vec dqproj(att_dim, 0.0);
  Mat df(T, nfilt);
  for (int t = 0; t < T; ++t) {
    for (int a = 0; a < att_dim; ++a) {
      double u = cc.u.at(t, a);
      score->grad(a) += de[t] * u;
      double dpre = de[t] * score->value(a) * (1.0 - u * u);
      dqproj[a] += dpre;
      for (int i = 0; i < enc_dim; ++i) {
        wk->grad(a, i) += dpre * keys.at(t, i);
        if (dkeys) dkeys->at(t, i) += dpre * wk->value(a, i);
      }
      for (int k = 0; k < nfilt; ++k) {
        wf->grad(a, k) += dpre * cc.f.at(t, k);
        df.at(t, k) += dpre * wf->value(a, k);
      }
    }
  }
  for (int a = 0; a < att_dim; ++a) {
    bias->grad(a) += dqproj[a];
    for (int i = 0; i < query_dim; ++i) {
      wq->grad(a, i) += dqproj[a] * cc.q[i];
      if (dq_prev) (*dq_prev)[i] += dqproj[a] * wq->value(a, i);
    }
  }
  // Conv feature backward.
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < nfilt; ++k) {
      double g = df.at(t, k);
      if (g == 0.0) continue;
      for (int w = 0; w < width; ++w) {
        int src = t + w - half;
        if (src < 0 || src >= T) continue;
        filt->grad(k, w) += g * cc.a_prev[src];
        if (da_prev) (*da_prev)[src] += g * filt->value(k, w);
      }
    }
  }
}

// -------------------------------------------------------- finite_diff_check

GradCheckReport finite_diff_check(ParamStore& ps,
                                  const std::function<double()>& fwd,
                                  const std::function<double()>& fwd_bwd,
                                  double eps) {
  E2EA_CHECK(eps >= 1e-7 && eps <= 1e-3, "finite_diff_check: eps out of range");
  double base = fwd_bwd();
  E2EA_CHECK(std::isfinite(base), "finite_diff_check: non-finite loss");
  // Snapshot analytic grads; the perturbed evaluations run forward only.
  std::vector<Vec> analytic;
  for (ParamEntry* e : ps.entries()) analytic.push_back(e->grad.data);
  GradCheckReport rep;
  int pi = 0;
  for (ParamEntry* e : ps.entries()) {
    for (std::size_t i = 0; i < e->value.size(); ++i) {
      double saved = e->value.data[i];
      e->value.data[i] = saved + eps;
      double up = fwd();
      e->value.data[i] = saved - eps;
      double dn = fwd();
      e->value.data[i] = saved;
      E2EA_CHECK(std::isfinite(up) && std::isfinite(dn),
                 "finite_diff_check: non-finite loss at " + e->name);
      double num = (up - dn) / (2.0 * eps);
      double ana = analytic[pi][i];
      double rel = std::fabs(num - ana) /
                   std::max(1e-8, std::fabs(ana) + std::fabs(num));
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = e->name;
        rep.worst_index = static_cast<int>(i);
      }
    }
    ++pi;
  }
  return rep;
}

}  // namespace e2ea
