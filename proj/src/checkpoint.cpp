#include "cotlsa/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cotlsa/errors.hpp"

namespace cotlsa {

namespace {

constexpr std::array<char, 4> kMagic = {'L', 'S', 'A', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
bool get_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

}  // namespace

std::string sidecar_path(const std::string& path) { return path + ".json"; }

void write_checkpoint(const std::string& path, const LsaParams& params, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  out.write(kMagic.data(), kMagic.size());
  put_le(out, static_cast<std::uint32_t>(params.d));
  put_le(out, std::uint64_t{0});
  for (double v : params.v.data()) put_le(out, v);
  for (double v : params.w.data()) put_le(out, v);
  if (!out) throw Error("failed writing checkpoint: " + path);

  nlohmann::json j;
  j["d"] = params.d;
  j["n"] = meta.n;
  j["eta"] = meta.eta;
  j["k"] = meta.k;
  j["seed"] = meta.seed;
  j["step"] = meta.step;
  std::ofstream side(sidecar_path(path), std::ios::trunc);
  side << j.dump(2) << '\n';
}

LsaParams read_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadCheckpoint("cannot open checkpoint: " + path);
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw BadCheckpoint("bad magic in " + path);
  std::uint32_t d = 0;
  std::uint64_t reserved = 0;
  if (!get_le(in, d) || !get_le(in, reserved) || d == 0) throw BadCheckpoint("bad header in " + path);
  LsaParams p = LsaParams::zeros(d);
  for (double& v : p.v.data())
    if (!get_le(in, v)) throw BadCheckpoint("truncated checkpoint: " + path);
  for (double& v : p.w.data())
    if (!get_le(in, v)) throw BadCheckpoint("truncated checkpoint: " + path);
  if (in.peek() != std::char_traits<char>::eof()) throw BadCheckpoint("trailing bytes in " + path);

  if (meta) {
    *meta = CheckpointMeta{};
    meta->d = d;
    std::ifstream side(sidecar_path(path));
    if (side) {
      try {
        const auto j = nlohmann::json::parse(side);
        meta->n = j.value("n", std::size_t{0});
        meta->eta = j.value("eta", 0.0);
        meta->k = j.value("k", std::size_t{0});
        meta->seed = j.value("seed", std::uint64_t{0});
        meta->step = j.value("step", 0L);
        if (j.value("d", std::size_t{d}) != d) throw BadCheckpoint("sidecar d disagrees with " + path);
      } catch (const nlohmann::json::exception& e) {
        throw BadCheckpoint(std::string("bad sidecar: ") + e.what());
      }
    }
  }
  return p;
}

}  // namespace cotlsa
