// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace e2ea {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

long parse_int(const std::string& k, const std::string& v) {
  std::size_t pos = 0;
  long r = 0;
  try {
    r = std::stol(v, &pos);
  } catch (...) {
    bad("invalid integer for " + k + ": " + v);
  }
  if (pos != v.size()) bad("invalid integer for " + k + ": " + v);
  return r;
}

double parse_real(const std::string& k, const std::string& v) {
  std::size_t pos = 0;
  double r = 0;
  try {
    r = std::stod(v, &pos);
  } catch (...) {
    bad("invalid real for " + k + ": " + v);
  }
  if (pos != v.size()) bad("invalid real for " + k + ": " + v);
  return r;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig::RunConfig() {
  // Toy-scale defaults; presets override.
  encoder.input_dim = toy.feature_dim;
  encoder.num_layers = 2;
  encoder.hidden = 16;
  encoder.proj = 16;
  encoder.subsample_layers = {0, 1};
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.vocab_size = toy.vocab_size;
  m.encoder = encoder;
  m.encoder.input_dim = toy.feature_dim;
  m.decoder = decoder;
  return m;
}

void RunConfig::validate() const {
  encoder.validate();
  if (toy.vocab_size < 1) bad("vocab.size must be >= 1");
  if (train.lambda < 0.0 || train.lambda > 1.0) bad("train.lambda not in [0,1]");
  if (beam.lambda < 0.0 || beam.lambda > 1.0) bad("decode.lambda not in [0,1]");
  if (beam.beam_width < 1) bad("decode.beam must be >= 1");
  if (beam.max_len_ratio <= 0.0 || beam.max_len_ratio > 1.0)
    bad("decode.max_len_ratio not in (0,1]");
  if (beam.fusion.gamma < 0.0) bad("fusion.gamma must be >= 0");
  if (train.clip_norm <= 0.0) bad("train.clip_norm must be > 0");
  if (n_train < 1 || n_dev < 1 || n_test < 1) bad("dataset sizes must be >= 1");
  if (toy.feature_dim < 1) bad("toy.feature_dim must be >= 1");
  if (toy.dur_min < 1 || toy.dur_max < toy.dur_min)
    bad("toy durations need 1 <= dur_min <= dur_max");
  if (toy.len_min < 1 || toy.len_max < toy.len_min)
    bad("toy lengths need 1 <= len_min <= len_max");
  if (toy.noise_sigma < 0.0) bad("toy.noise_sigma must be >= 0");
  if (adadelta_rho <= 0.0 || adadelta_rho >= 1.0) bad("train.rho not in (0,1)");
  if (adadelta_eps <= 0.0) bad("train.eps must be > 0");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string s = trim(line);
    if (s.empty()) continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      bad("line " + std::to_string(lineno) + ": expected key=value");
    std::string k = trim(s.substr(0, eq));
    std::string v = trim(s.substr(eq + 1));
    if (k == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(k, v));
    else if (k == "vocab.size") cfg.toy.vocab_size = static_cast<int>(parse_int(k, v));
    else if (k == "toy.feature_dim") cfg.toy.feature_dim = static_cast<int>(parse_int(k, v));
    else if (k == "toy.dur_min") cfg.toy.dur_min = static_cast<int>(parse_int(k, v));
    else if (k == "toy.dur_max") cfg.toy.dur_max = static_cast<int>(parse_int(k, v));
    else if (k == "toy.len_min") cfg.toy.len_min = static_cast<int>(parse_int(k, v));
    else if (k == "toy.len_max") cfg.toy.len_max = static_cast<int>(parse_int(k, v));
    else if (k == "toy.noise_sigma") cfg.toy.noise_sigma = parse_real(k, v);
    else if (k == "toy.seed") cfg.toy.seed = static_cast<std::uint64_t>(parse_int(k, v));
    else if (k == "toy.n_train") cfg.n_train = static_cast<int>(parse_int(k, v));
    else if (k == "toy.n_dev") cfg.n_dev = static_cast<int>(parse_int(k, v));
    else if (k == "toy.n_test") cfg.n_test = static_cast<int>(parse_int(k, v));
    else if (k == "encoder.variant") {
      if (v == "blstm") cfg.encoder.variant = EncoderVariant::kBlstm;
      else if (v == "vgg-blstm") cfg.encoder.variant = EncoderVariant::kVggBlstm;
      else bad("encoder.variant must be blstm or vgg-blstm");
    } else if (k == "encoder.layers") cfg.encoder.num_layers = static_cast<int>(parse_int(k, v));
    else if (k == "encoder.hidden") cfg.encoder.hidden = static_cast<int>(parse_int(k, v));
    else if (k == "encoder.proj") cfg.encoder.proj = static_cast<int>(parse_int(k, v));
    else if (k == "encoder.subsample") {
      cfg.encoder.subsample_layers.clear();
      if (!v.empty()) {
        std::istringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ','))
          cfg.encoder.subsample_layers.insert(
              static_cast<int>(parse_int(k, trim(tok))));
      }
    } else if (k == "encoder.vgg_c1") cfg.encoder.vgg_c1 = static_cast<int>(parse_int(k, v));
    else if (k == "encoder.vgg_c2") cfg.encoder.vgg_c2 = static_cast<int>(parse_int(k, v));
    else if (k == "attention.filters") cfg.decoder.att_filters = static_cast<int>(parse_int(k, v));
    else if (k == "attention.width") cfg.decoder.att_width = static_cast<int>(parse_int(k, v));
    else if (k == "attention.dim") cfg.decoder.att_dim = static_cast<int>(parse_int(k, v));
    else if (k == "decoder.hidden") cfg.decoder.hidden = static_cast<int>(parse_int(k, v));
    else if (k == "lm.hidden") cfg.lm_hidden = static_cast<int>(parse_int(k, v));
    else if (k == "train.lambda") cfg.train.lambda = parse_real(k, v);
    else if (k == "train.epochs") cfg.train.epochs = static_cast<int>(parse_int(k, v));
    else if (k == "train.clip_norm") cfg.train.clip_norm = parse_real(k, v);
    else if (k == "train.rho") cfg.adadelta_rho = parse_real(k, v);
    else if (k == "train.eps") cfg.adadelta_eps = parse_real(k, v);
    else if (k == "decode.mode") {
      if (v == "attention") cfg.beam.mode = DecodeMode::kAttention;
      else if (v == "rescoring") cfg.beam.mode = DecodeMode::kRescoring;
      else if (v == "one-pass") cfg.beam.mode = DecodeMode::kOnePass;
      else bad("decode.mode must be attention, rescoring or one-pass");
    } else if (k == "decode.beam") cfg.beam.beam_width = static_cast<int>(parse_int(k, v));
    else if (k == "decode.lambda") cfg.beam.lambda = parse_real(k, v);
    else if (k == "decode.max_len_ratio") cfg.beam.max_len_ratio = parse_real(k, v);
    else if (k == "decode.nbest") cfg.beam.nbest = static_cast<int>(parse_int(k, v));
    else if (k == "fusion.mode") {
      if (v == "none") cfg.beam.fusion.mode = FusionMode::kNone;
      else if (v == "separate") cfg.beam.fusion.mode = FusionMode::kSeparate;
      else if (v == "joint") cfg.beam.fusion.mode = FusionMode::kJoint;
      else bad("fusion.mode must be none, separate or joint");
    } else if (k == "fusion.gamma") cfg.beam.fusion.gamma = parse_real(k, v);
    else bad("unknown key: " + k);
  }
  cfg.encoder.input_dim = cfg.toy.feature_dim;
  try {
    cfg.validate();
  } catch (const std::runtime_error& e) {
    bad(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream o;
  o << "seed=" << cfg.seed << "\n";
  o << "vocab.size=" << cfg.toy.vocab_size << "\n";
  o << "toy.feature_dim=" << cfg.toy.feature_dim << "\n";
  o << "toy.dur_min=" << cfg.toy.dur_min << "\n";
  o << "toy.dur_max=" << cfg.toy.dur_max << "\n";
  o << "toy.len_min=" << cfg.toy.len_min << "\n";
  o << "toy.len_max=" << cfg.toy.len_max << "\n";
  o << "toy.noise_sigma=" << fmt_real(cfg.toy.noise_sigma) << "\n";
  o << "toy.seed=" << cfg.toy.seed << "\n";
  o << "toy.n_train=" << cfg.n_train << "\n";
  o << "toy.n_dev=" << cfg.n_dev << "\n";
  o << "toy.n_test=" << cfg.n_test << "\n";
  o << "encoder.variant="
    << (cfg.encoder.variant == EncoderVariant::kBlstm ? "blstm" : "vgg-blstm")
    << "\n";
  o << "encoder.layers=" << cfg.encoder.num_layers << "\n";
  o << "encoder.hidden=" << cfg.encoder.hidden << "\n";
  o << "encoder.proj=" << cfg.encoder.proj << "\n";
  o << "encoder.subsample=";
  bool first = true;
  for (int l : cfg.encoder.subsample_layers) {
    if (!first) o << ",";
    o << l;
    first = false;
  }
  o << "\n";
  o << "encoder.vgg_c1=" << cfg.encoder.vgg_c1 << "\n";
  o << "encoder.vgg_c2=" << cfg.encoder.vgg_c2 << "\n";
  o << "attention.filters=" << cfg.decoder.att_filters << "\n";
  o << "attention.width=" << cfg.decoder.att_width << "\n";
  o << "attention.dim=" << cfg.decoder.att_dim << "\n";
  o << "decoder.hidden=" << cfg.decoder.hidden << "\n";
  o << "lm.hidden=" << cfg.lm_hidden << "\n";
  o << "train.lambda=" << fmt_real(cfg.train.lambda) << "\n";
  o << "train.epochs=" << cfg.train.epochs << "\n";
  o << "train.clip_norm=" << fmt_real(cfg.train.clip_norm) << "\n";
  o << "train.rho=" << fmt_real(cfg.adadelta_rho) << "\n";
  o << "train.eps=" << fmt_real(cfg.adadelta_eps) << "\n";
  o << "decode.mode="
    << (cfg.beam.mode == DecodeMode::kAttention
            ? "attention"
            : (cfg.beam.mode == DecodeMode::kRescoring ? "rescoring"
                                                       : "one-pass"))
    << "\n";
  o << "decode.beam=" << cfg.beam.beam_width << "\n";
  o << "decode.lambda=" << fmt_real(cfg.beam.lambda) << "\n";
  o << "decode.max_len_ratio=" << fmt_real(cfg.beam.max_len_ratio) << "\n";
  o << "decode.nbest=" << cfg.beam.nbest << "\n";
  o << "fusion.mode="
    << (cfg.beam.fusion.mode == FusionMode::kNone
            ? "none"
            : (cfg.beam.fusion.mode == FusionMode::kSeparate ? "separate"
                                                             : "joint"))
    << "\n";
  o << "fusion.gamma=" << fmt_real(cfg.beam.fusion.gamma) << "\n";
  return o.str();
}

std::uint32_t config_hash(const RunConfig& cfg) {
  std::string s = serialize_config(cfg);
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

}  // namespace e2ea
