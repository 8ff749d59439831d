// e2ea/nn.hpp  -- numerically stable primitives and small layers with
// explicit hand-written forward/backward passes.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_NN_HPP_
#define E2EA_NN_HPP_

#include <functional>
#include <limits>
#include <string>

#include "e2ea/tensor.hpp"

namespace e2ea {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log sum exp via max shift; all -inf input yields -inf.
double log_sum_exp(const double* v, int n);
double log_sum_exp(const Vec& v);
double log_add(double a, double b);

Vec softmax(const Vec& logits);
Vec log_softmax(const Vec& logits);
// In-place log-softmax over each row.
void log_softmax_rows(Mat* m);

// Linear layer y = W x + b; W is out x in.
struct Linear {
  int in = 0, out = 0;
  ParamEntry* w = nullptr;
  ParamEntry* b = nullptr;

  void init(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim);
  Vec forward(const Vec& x) const;
  // Accumulates parameter grads; adds W^T dy into dx.
  void backward(const Vec& x, const Vec& dy, Vec* dx) const;
};

// One LSTM cell. Gate pre-activations stacked [i; f; g; o], each H rows.
struct LstmCell {
  int in = 0, hidden = 0;
  ParamEntry* wx = nullptr;  // 4H x in
  ParamEntry* wh = nullptr;  // 4H x H
  ParamEntry* b = nullptr;   // 4H

  struct Cache {
    Vec x, h_prev, c_prev;
    Vec i, f, g, o, c, h;
  };

  void init(ParamStore& ps, const std::string& prefix, int in_dim, int hidden_dim);
  Cache step(const Vec& x, const Vec& h_prev, const Vec& c_prev) const;
  // dh/dc are grads wrt this step's outputs; accumulates into dx, dh_prev,
  // dc_prev (which must be correctly sized).
  void backward(const Cache& cc, const Vec& dh, const Vec& dc, Vec* dx,
                Vec* dh_prev, Vec* dc_prev) const;
};

// Bidirectional LSTM over a T x D input, output T x 2H.
struct Blstm {
  LstmCell fwd, bwd;

  struct Cache {
    std::vector<LstmCell::Cache> f, b;
    Mat out;
  };

  void init(ParamStore& ps, const std::string& prefix, int in_dim, int hidden_dim);
  Cache forward(const Mat& x) const;
  // dX accumulated if non-null.
  void backward(const Cache& cc, const Mat& d_out, Mat* dx) const;
};

// 3x3 convolution, zero padding 1 (same spatial size), followed by ReLU.
// Tensors are {C, T, F}.
struct Conv2d {
  int cin = 0, cout = 0;
  ParamEntry* w = nullptr;  // cout x cin x 3 x 3
  ParamEntry* b = nullptr;  // cout

  struct Cache {
    Tensor pre;  // pre-ReLU activations
  };

  void init(ParamStore& ps, const std::string& prefix, int in_ch, int out_ch);
  Tensor forward(const Tensor& x, Cache* cache) const;
  void backward(const Tensor& x, const Cache& cc, const Tensor& dy,
                Tensor* dx) const;
};

// Ceil-mode 3x3/stride-2 max pooling with implicit -inf padding.
struct MaxPoolCache {
  std::vector<int> arg_t, arg_f;  // winning input coordinates per output cell
};
Tensor maxpool2d_forward(const Tensor& x, MaxPoolCache* cache);
void maxpool2d_backward(const Tensor& x, const Tensor& y, const MaxPoolCache& cc,
                        const Tensor& dy, Tensor* dx);

// Location-aware attention: scores depend on the query, the keys, and
// convolutional features of the previous attention distribution.
struct LocationAttention {
  int nfilt = 0, width = 0;     // K filters of odd width W
  int att_dim = 0;              // scoring space A
  int enc_dim = 0, query_dim = 0;
  ParamEntry* filt = nullptr;   // K x W
  ParamEntry* wq = nullptr;     // A x Q
  ParamEntry* wk = nullptr;     // A x E
  ParamEntry* wf = nullptr;     // A x K
  ParamEntry* bias = nullptr;   // A
  ParamEntry* score = nullptr;  // A

  struct Cache {
    Vec q, a_prev;
    Mat f;    // T x K conv features
    Mat pre;  // T x A pre-tanh
    Mat u;    // T x A tanh
    Vec a;    // attention weights
    Vec r;    // context vector
  };

  void init(ParamStore& ps, const std::string& prefix, int enc, int query,
            int filters, int filter_width, int dim);
  Cache step(const Mat& keys, const Vec& q_prev, const Vec& a_prev) const;
  // da_out: external grad wrt the produced weights a (excluding the r path,
  // which is handled internally via dr). Accumulates into dkeys, dq_prev,
  // da_prev.
  void backward(const Mat& keys, const Cache& cc, const Vec& da_out,
                const Vec& dr, Mat* dkeys, Vec* dq_prev, Vec* da_prev) const;
};

// Central-difference gradient check. fwd_bwd must zero grads, run
// forward+backward and return the loss; fwd runs forward only. Returns the
// max over coordinates of |num - ana| / max(1e-8, |ana| + |num|).
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
};
GradCheckReport finite_diff_check(ParamStore& ps,
                                  const std::function<double()>& fwd,
                                  const std::function<double()>& fwd_bwd,
                                  double eps = 1e-5);

}  // namespace e2ea

#endif  // E2EA_NN_HPP_
