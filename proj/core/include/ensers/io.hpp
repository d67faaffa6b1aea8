#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

namespace ensers::io {

using json = nlohmann::json;

/// A JSON header followed by a flat payload of little-endian doubles.
///
/// Layout on disk:
///   bytes 0..7   magic "ENSERS1\n"
///   bytes 8..15  header length N as little-endian uint64
///   N bytes      UTF-8 JSON header (includes "payload_count")
///   8 * payload_count bytes of IEEE-754 binary64, little-endian
struct BlobFile {
  json header;
  std::vector<double> payload;
};

/// Writes atomically: a temporary sibling is written, then renamed over path.
void write_blob(const std::filesystem::path& path, json header, std::span<const double> payload);
/// Reads and validates magic, header length, payload count and file size.
BlobFile read_blob(const std::filesystem::path& path);

/// Writes text atomically (temp + rename).
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// 64-bit FNV-1a digest of a byte range, hex encoded.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);
/// Digest of a file's contents.
std::string file_digest(const std::filesystem::path& path);

}  // namespace ensers::io
