#include "ensers/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ensers/error.hpp"

namespace ensers::io {
namespace {

static_assert(std::endian::native == std::endian::little, "blob files are written in host order");

constexpr char kMagic[8] = {'E', 'N', 'S', 'E', 'R', 'S', '1', '\n'};

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  return tmp;
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void write_blob(const std::filesystem::path& path, json header, std::span<const double> payload) {
  header["payload_count"] = payload.size();
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  commit(tmp, path);
}

BlobFile read_blob(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError(path.string() + ": not an ENSERS blob file");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw IoError(path.string() + ": truncated header");
  BlobFile blob;
  try {
    blob.header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed header: " + e.what());
  }
  if (!blob.header.contains("payload_count") || !blob.header["payload_count"].is_number_unsigned()) {
    throw IoError(path.string() + ": header lacks payload_count");
  }
  const auto count = blob.header["payload_count"].get<std::uint64_t>();
  const std::size_t offset = 16 + len;
  if (bytes.size() - offset != count * sizeof(double)) {
    throw IoError(path.string() + ": payload holds " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                  std::to_string(count * sizeof(double)));
  }
  blob.payload.resize(count);
  std::memcpy(blob.payload.data(), bytes.data() + offset, count * sizeof(double));
  return blob;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  commit(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_digest(const std::filesystem::path& path) { return fnv1a_hex(read_bytes(path)); }

}  // namespace ensers::io
