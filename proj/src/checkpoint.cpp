// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "e2ea/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format requires a little-endian platform");

namespace e2ea {

namespace {

void put_bytes(std::string* buf, const void* p, std::size_t n) {
  buf->append(static_cast<const char*>(p), n);
}

template <typename T>
void put(std::string* buf, T v) {
  put_bytes(buf, &v, sizeof(v));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* field) {
    if (pos + n > buf.size())
      throw CheckpointError(std::string("checkpoint truncated at ") + field);
  }
  template <typename T>
  T get(const char* field) {
    need(sizeof(T), field);
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

}  // namespace

void Checkpoint::set_meta(const std::string& key, double v) {
  Tensor t({1});
  t(0) = v;
  tensors.emplace_back("__meta." + key, std::move(t));
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

double Checkpoint::meta(const std::string& key, double fallback) const {
  const Tensor* t = find("__meta." + key);
  return t ? t->data[0] : fallback;
}

void checkpoint_save(const std::string& path, const Checkpoint& ckpt) {
  std::string buf;
  put_bytes(&buf, "E2EA", 4);
  put<std::uint32_t>(&buf, ckpt.version);
  put<std::uint32_t>(&buf, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    E2EA_CHECK(name.size() <= 0xffff, "tensor name too long");
    put<std::uint16_t>(&buf, static_cast<std::uint16_t>(name.size()));
    put_bytes(&buf, name.data(), name.size());
    put<std::uint8_t>(&buf, static_cast<std::uint8_t>(t.dims.size()));
    for (int d : t.dims) put<std::uint32_t>(&buf, static_cast<std::uint32_t>(d));
    put<std::uint8_t>(&buf, 0);  // dtype: f64 little-endian
    put_bytes(&buf, t.data.data(), t.data.size() * sizeof(double));
  }
  std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
              static_cast<uInt>(buf.size())));
  put<std::uint32_t>(&buf, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("write failed: " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 16) throw CheckpointError("checkpoint truncated: " + path);

  // Header fields first, so a wrong magic or version gets a specific error
  // rather than the CRC mismatch it also causes.
  Reader r{buf};
  char magic[4];
  r.need(4, "magic");
  std::memcpy(magic, buf.data(), 4);
  r.pos = 4;
  if (std::memcmp(magic, "E2EA", 4) != 0)
    throw CheckpointError("checkpoint magic mismatch");
  Checkpoint ckpt;
  ckpt.version = r.get<std::uint32_t>("version");
  if (ckpt.version != kCheckpointVersion)
    throw CheckpointError("checkpoint version mismatch");

  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  std::uint32_t actual = static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
              static_cast<uInt>(buf.size() - 4)));
  if (stored != actual) throw CheckpointError("checkpoint CRC mismatch");
  std::uint32_t count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t nlen = r.get<std::uint16_t>("name length");
    r.need(nlen, "name");
    std::string name(buf.data() + r.pos, nlen);
    r.pos += nlen;
    std::uint8_t rank = r.get<std::uint8_t>("rank");
    std::vector<int> dims(rank);
    for (auto& d : dims) d = static_cast<int>(r.get<std::uint32_t>("dim"));
    std::uint8_t dtype = r.get<std::uint8_t>("dtype");
    if (dtype != 0) throw CheckpointError("checkpoint dtype tag mismatch");
    Tensor t(dims);
    r.need(t.size() * sizeof(double), "tensor data");
    std::memcpy(t.data.data(), buf.data() + r.pos, t.size() * sizeof(double));
    r.pos += t.size() * sizeof(double);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos != buf.size() - 4)
    throw CheckpointError("checkpoint has trailing bytes");
  return ckpt;
}

Checkpoint checkpoint_from_params(const ParamStore& ps) {
  Checkpoint c;
  for (const ParamEntry* e : ps.entries()) c.tensors.emplace_back(e->name, e->value);
  return c;
}

void checkpoint_to_params(const Checkpoint& ckpt, ParamStore* ps) {
  for (ParamEntry* e : ps->entries()) {
    const Tensor* t = ckpt.find(e->name);
    if (!t) throw CheckpointError("checkpoint missing tensor: " + e->name);
    if (t->dims != e->value.dims)
      throw CheckpointError("checkpoint tensor shape mismatch: " + e->name);
    e->value = *t;
  }
}

}  // namespace e2ea
