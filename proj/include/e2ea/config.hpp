// e2ea/config.hpp -- experiment configuration: a plain UTF-8 key=value file
// with dotted section prefixes; unknown keys are rejected.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_CONFIG_HPP_
#define E2EA_CONFIG_HPP_

#include <string>

#include "e2ea/decode.hpp"
#include "e2ea/train.hpp"

namespace e2ea {

struct RunConfig {
  std::uint64_t seed = 1;

  ToyTaskSpec toy;
  int n_train = 300;
  int n_dev = 50;
  int n_test = 50;

  EncoderConfig encoder;
  DecoderConfig decoder;
  int lm_hidden = 16;

  MtlConfig train;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-8;

  BeamConfig beam;

  RunConfig();

  ModelConfig model_config() const;
  void validate() const;
};

// Throws std::invalid_argument on syntax errors or unknown keys.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& cfg);
// FNV-1a over the canonical serialization (32-bit, exactly representable
// as a double for checkpoint metadata).
std::uint32_t config_hash(const RunConfig& cfg);

}  // namespace e2ea

#endif  // E2EA_CONFIG_HPP_
