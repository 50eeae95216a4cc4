#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cotlsa/lsa_model.hpp"

namespace cotlsa {

// Binary layout: "LSA1", d as uint32 LE, 8 reserved zero bytes, then V and W
// as row-major little-endian doubles. The sidecar `<path>.json` carries the
// run metadata.
struct CheckpointMeta {
  std::size_t d = 0;
  std::size_t n = 0;
  double eta = 0.0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  long step = 0;
};

std::string sidecar_path(const std::string& path);

void write_checkpoint(const std::string& path, const LsaParams& params, const CheckpointMeta& meta);

// Throws BadCheckpoint on a missing file, wrong magic, or truncated payload.
// The sidecar is optional; when absent, meta keeps only d.
LsaParams read_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace cotlsa
