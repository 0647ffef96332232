#pragma once

#include <cstdint>
#include <string>

namespace dpr {

// FNV-1a over a byte range. Used for input fingerprints in run manifests
// and for comparing parameter states; not a cryptographic hash.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);

std::string hex_digest(std::uint64_t h);

// Digest of a file's raw bytes. Throws DataError if the file cannot be read.
std::string file_digest(const std::string& path);

}  // namespace dpr
