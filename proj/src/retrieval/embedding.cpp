#include "dpr/retrieval/embedding.hpp"

#include <cstring>

#include "dpr/model/checkpoint.hpp"

namespace dpr {

// Reuses the checkpoint's little framing helpers: magic, ids, then float rows.
namespace {
constexpr char kEmbMagic[8] = {'D', 'P', 'R', 'E', 'M', 'B', '1', '\n'};
}

void EmbeddingMatrix::save(const std::string& path) const {
  ckpt::Writer w(path);
  w.bytes(kEmbMagic, sizeof(kEmbMagic));
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(count()));
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(dim()));
  for (const auto& id : ids) w.str(id);
  w.bytes(vectors.data(), static_cast<std::size_t>(count() * dim()) * sizeof(float));
}

EmbeddingMatrix EmbeddingMatrix::load(const std::string& path) {
  ckpt::Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kEmbMagic, sizeof(magic)) != 0)
    throw DataError("embeddings: " + path + " is not an embedding file");
  const auto n = r.pod<std::uint64_t>();
  const auto d = r.pod<std::uint64_t>();
  EmbeddingMatrix m;
  m.ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) m.ids.push_back(r.str());
  m.vectors.resize(static_cast<Index>(n), static_cast<Index>(d));
  r.bytes(m.vectors.data(), static_cast<std::size_t>(n * d) * sizeof(float));
  return m;
}

}  // namespace dpr
