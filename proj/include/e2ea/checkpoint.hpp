// e2ea/checkpoint.hpp -- binary tensor container for model checkpoints and
// on-disk datasets.
//
// Layout: magic "E2EA" | version u32 LE | tensor count u32 | per tensor:
// name length u16 + UTF-8 name, rank u8, dims u32 each, dtype tag u8
// (0 = f64 LE), raw data | trailing CRC32 of all preceding bytes.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_CHECKPOINT_HPP_
#define E2EA_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "e2ea/tensor.hpp"

namespace e2ea {

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<std::pair<std::string, Tensor>> tensors;  // insertion order

  // Training metadata rides along as scalar tensors.
  void set_meta(const std::string& key, double v);
  const Tensor* find(const std::string& name) const;
  double meta(const std::string& key, double fallback) const;
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

void checkpoint_save(const std::string& path, const Checkpoint& ckpt);
Checkpoint checkpoint_load(const std::string& path);

// Snapshot of / restore into a parameter store (values only, by name).
Checkpoint checkpoint_from_params(const ParamStore& ps);
void checkpoint_to_params(const Checkpoint& ckpt, ParamStore* ps);

}  // namespace e2ea

#endif  // E2EA_CHECKPOINT_HPP_
