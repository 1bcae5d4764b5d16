#ifndef ISTLAB_DIGEST_HPP
#define ISTLAB_DIGEST_HPP

// Compiled in src/digest.cpp (target istlab_digest, backed by libcrypto).

#include <filesystem>
#include <string>

namespace istlab {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(const std::string& data);

/// Whole file as bytes; Errc::io when it cannot be opened.
std::string read_file(const std::filesystem::path& p);

}  // namespace istlab

#endif
