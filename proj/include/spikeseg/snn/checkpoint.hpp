#pragma once

// SEGW checkpoints, little-endian:
//   "SEGW" u32 version u32 flags(bit0 = BN folded)
//   u32 descriptor_len, descriptor (network INI text)
//   u32 tensor_count, then per tensor:
//     u32 name_len, name, u32 ndim, u32 dims[ndim], f32 data[prod(dims)]
// Tensors are the parameters followed by the BN running statistics.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spikeseg/config.hpp"
#include "spikeseg/error.hpp"
#include "spikeseg/io.hpp"
#include "spikeseg/snn/network.hpp"

namespace spikeseg::snn {

inline constexpr std::string_view kCheckpointMagic = "SEGW";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> write_checkpoint(Network<float>& net) {
  io::Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(net.is_folded() ? 1u : 0u);
  const std::string desc = net.spec().to_ini();
  w.u32(static_cast<std::uint32_t>(desc.size()));
  w.bytes(desc);
  const auto params = net.params();
  const auto bufs = net.buffers();
  w.u32(static_cast<std::uint32_t>(params.size() + bufs.size()));
  auto tensor = [&w](const std::string& name, const std::vector<int>& shape, const std::vector<float>& data) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : data) w.f32(v);
  };
  for (auto* p : params) tensor(p->name, p->shape, p->value);
  for (auto& [name, values] : bufs) tensor(name, {static_cast<int>(values->size())}, *values);
  return w.take();
}

inline Network<float> parse_checkpoint(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes);
  if (!r.has(4) || r.bytes(4) != kCheckpointMagic) throw Error(Errc::BadMagic, "expected SEGW");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw Error(Errc::BadMagic, "checkpoint version " + std::to_string(version));
  const bool folded = (r.u32() & 1u) != 0;
  const std::uint32_t desc_len = r.u32();
  const auto spec = NetworkSpec::from_config(Config::parse(std::string(r.bytes(desc_len)), "<checkpoint>"));

  struct Blob {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::map<std::string, Blob> blobs;
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name(r.bytes(r.u32()));
    Blob b;
    const std::uint32_t ndim = r.u32();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      b.shape.push_back(static_cast<int>(r.u32()));
      n *= static_cast<std::size_t>(b.shape.back());
    }
    if (!r.has(n * 4)) throw Error(Errc::TruncatedStream, "tensor " + name);
    b.data.resize(n);
    for (auto& v : b.data) v = r.f32();
    blobs.emplace(name, std::move(b));
  }

  Network<float> net(spec, 0);
  if (folded) net = net.folded();
  auto take = [&](const std::string& name, std::vector<float>& dst, const std::vector<int>* shape) {
    const auto it = blobs.find(name);
    if (it == blobs.end()) throw Error(Errc::ShapeMismatch, "checkpoint lacks tensor " + name);
    if ((shape != nullptr && it->second.shape != *shape) || it->second.data.size() != dst.size()) {
      throw Error(Errc::ShapeMismatch, "tensor " + name + " has the wrong shape");
    }
    dst = it->second.data;
    blobs.erase(it);
  };
  for (auto* p : net.params()) take(p->name, p->value, &p->shape);
  for (auto& [name, values] : net.buffers()) take(name, *values, nullptr);
  if (!blobs.empty()) throw Error(Errc::ShapeMismatch, "unexpected tensor " + blobs.begin()->first);
  return net;
}

inline void save_checkpoint(const std::filesystem::path& path, Network<float>& net) {
  io::write_file(path, write_checkpoint(net));
}

inline Network<float> load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(io::read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::IoFailure) throw;
    throw Error(e.code(), path.string() + ": " + e.context());
  }
}

}  // namespace spikeseg::snn
