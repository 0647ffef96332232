#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dpr/core/ndarray.hpp"
#include "dpr/error.hpp"

namespace dpr {

// Binary parameter container: format version, scalar width, a config echo
// and the named tensors with shape and raw values. Save/load round-trips
// bit-exactly for matching scalar width.
//
//   magic "DPRCKPT\n" | u32 version | u32 order sentinel | u32 scalar width
//   u64 config bytes  | config text
//   u64 tensor count  | { u32 name len | name | u32 ndim | i64 dims | raw }
namespace ckpt {

constexpr char kMagic[8] = {'D', 'P', 'R', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kOrderSentinel = 0x01020304u;

struct Writer {
  std::FILE* f;
  explicit Writer(const std::string& path) : f(std::fopen(path.c_str(), "wb")) {
    if (!f) throw DataError("checkpoint: cannot write " + path);
  }
  ~Writer() {
    if (f) std::fclose(f);
  }
  void bytes(const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f) != n) throw DataError("checkpoint: short write");
  }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::FILE* f;
  std::string path;
  explicit Reader(const std::string& p) : f(std::fopen(p.c_str(), "rb")), path(p) {
    if (!f) throw DataError("checkpoint: cannot read " + p);
  }
  ~Reader() {
    if (f) std::fclose(f);
  }
  void bytes(void* p, std::size_t n) {
    if (std::fread(p, 1, n, f) != n) throw DataError("checkpoint: truncated file " + path);
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string str() {
    auto len = pod<std::uint32_t>();
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }
};

}  // namespace ckpt

template <typename Scalar>
struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, NdArray<Scalar>>> tensors;

  void save(const std::string& path) const {
    // Write-temp then rename, so readers never see a half-written file.
    const std::string tmp = path + ".tmp";
    {
      ckpt::Writer w(tmp);
      w.bytes(ckpt::kMagic, sizeof(ckpt::kMagic));
      w.pod<std::uint32_t>(ckpt::kVersion);
      w.pod<std::uint32_t>(ckpt::kOrderSentinel);
      w.pod<std::uint32_t>(static_cast<std::uint32_t>(sizeof(Scalar)));
      w.pod<std::uint64_t>(config_text.size());
      w.bytes(config_text.data(), config_text.size());
      w.pod<std::uint64_t>(tensors.size());
      for (const auto& [name, t] : tensors) {
        w.str(name);
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.shape().size()));
        for (Index d : t.shape()) w.pod<std::int64_t>(d);
        w.bytes(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(Scalar));
      }
    }
    std::filesystem::rename(tmp, path);
  }

  static Checkpoint load(const std::string& path) {
    ckpt::Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, ckpt::kMagic, sizeof(magic)) != 0)
      throw DataError("checkpoint: " + path + " is not a checkpoint file");
    const auto version = r.template pod<std::uint32_t>();
    if (version != ckpt::kVersion)
      throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    if (r.template pod<std::uint32_t>() != ckpt::kOrderSentinel)
      throw DataError("checkpoint: byte order mismatch in " + path);
    const auto width = r.template pod<std::uint32_t>();
    if (width != sizeof(Scalar))
      throw DataError("checkpoint: " + path + " stores " + std::to_string(width * 8) +
                      "-bit scalars, expected " + std::to_string(sizeof(Scalar) * 8) + "-bit");
    Checkpoint c;
    const auto cfg_len = r.template pod<std::uint64_t>();
    c.config_text.resize(cfg_len);
    r.bytes(c.config_text.data(), cfg_len);
    const auto n_tensors = r.template pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
      std::string name = r.str();
      const auto ndim = r.template pod<std::uint32_t>();
      std::vector<Index> shape(ndim);
      for (auto& d : shape) d = static_cast<Index>(r.template pod<std::int64_t>());
      auto t = NdArray<Scalar>::zeros(shape);
      r.bytes(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(Scalar));
      c.tensors.emplace_back(std::move(name), std::move(t));
    }
    return c;
  }

  // Scalar width recorded in the header, for precision dispatch.
  static std::uint32_t peek_scalar_width(const std::string& path) {
    ckpt::Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, ckpt::kMagic, sizeof(magic)) != 0)
      throw DataError("checkpoint: " + path + " is not a checkpoint file");
    (void)r.template pod<std::uint32_t>();
    (void)r.template pod<std::uint32_t>();
    return r.template pod<std::uint32_t>();
  }
};

// Copies stored tensor values into an already-constructed model's parameter
// set. Names and shapes must match exactly.
template <typename Scalar>
void assign_tensors(std::vector<std::pair<std::string, NdArray<Scalar>>>& params,
                    const Checkpoint<Scalar>& ckpt) {
  if (params.size() != ckpt.tensors.size())
    throw DataError("checkpoint: holds " + std::to_string(ckpt.tensors.size()) +
                    " tensors, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, dst] = params[i];
    const auto& [stored_name, src] = ckpt.tensors[i];
    if (name != stored_name)
      throw DataError("checkpoint: tensor " + std::to_string(i) + " is '" + stored_name +
                      "', model expects '" + name + "'");
    if (dst.shape() != src.shape())
      throw DataError("checkpoint: tensor '" + name + "' has shape " + shape_str(src.shape()) +
                      ", model expects " + shape_str(dst.shape()));
    std::memcpy(dst.data(), src.data(), static_cast<std::size_t>(src.numel()) * sizeof(Scalar));
  }
}

}  // namespace dpr
