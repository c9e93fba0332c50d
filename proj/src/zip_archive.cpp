#include "hgpsl/zip_archive.hpp"

#include <zlib.h>

#include <fstream>

#include "hgpsl/errors.hpp"

namespace hgpsl {

namespace {

constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kEndSig = 0x06054b50;

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError("zip: truncated archive");
  return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 | std::uint32_t(b[at + 2]) << 16 |
         std::uint32_t(b[at + 3]) << 24;
}

std::uint16_t le16(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 2 > b.size()) throw FormatError("zip: truncated archive");
  return std::uint16_t(b[at] | b[at + 1] << 8);
}

std::vector<std::uint8_t> inflate_raw(const std::uint8_t* src, std::size_t len, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("zip: inflate init failed");
  zs.next_in = const_cast<Bytef*>(src);
  zs.avail_in = static_cast<uInt>(len);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) throw FormatError("zip: corrupt deflate stream");
  return out;
}

}  // namespace

std::vector<ZipEntry> read_zip(const std::vector<std::uint8_t>& archive) {
  if (archive.size() < 22) throw FormatError("zip: archive too small");
  // End-of-central-directory record sits within the last 64 KiB + 22 bytes.
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = archive.size() > 65557 ? archive.size() - 65557 : 0;
  for (std::size_t at = archive.size() - 22 + 1; at-- > lowest;) {
    if (le32(archive, at) == kEndSig) {
      eocd = at;
      break;
    }
  }
  if (eocd == std::string::npos) throw FormatError("zip: no end-of-central-directory record");

  const std::size_t count = le16(archive, eocd + 10);
  std::size_t at = le32(archive, eocd + 16);
  std::vector<ZipEntry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    if (le32(archive, at) != kCentralSig) throw FormatError("zip: bad central directory");
    const auto method = le16(archive, at + 10);
    const std::size_t comp_size = le32(archive, at + 20);
    const std::size_t size = le32(archive, at + 24);
    const std::size_t name_len = le16(archive, at + 28);
    const std::size_t extra_len = le16(archive, at + 30);
    const std::size_t comment_len = le16(archive, at + 32);
    const std::size_t local = le32(archive, at + 42);
    if (at + 46 + name_len > archive.size()) throw FormatError("zip: truncated name");
    std::string name(archive.begin() + long(at + 46), archive.begin() + long(at + 46 + name_len));
    at += 46 + name_len + extra_len + comment_len;

    if (le32(archive, local) != kLocalSig) throw FormatError("zip: bad local header for " + name);
    const std::size_t data_at = local + 30 + le16(archive, local + 26) + le16(archive, local + 28);
    if (data_at + comp_size > archive.size()) throw FormatError("zip: truncated data for " + name);
    if (!name.empty() && name.back() == '/') continue;  // directory entry

    ZipEntry entry;
    entry.name = std::move(name);
    if (method == 0) {
      entry.data.assign(archive.begin() + long(data_at), archive.begin() + long(data_at + comp_size));
    } else if (method == 8) {
      entry.data = inflate_raw(archive.data() + data_at, comp_size, size);
    } else {
      throw FormatError("zip: unsupported compression method " + std::to_string(method));
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void extract_zip(const std::vector<std::uint8_t>& archive, const std::filesystem::path& dest) {
  namespace fs = std::filesystem;
  for (const auto& entry : read_zip(archive)) {
    const fs::path rel = fs::path(entry.name).lexically_normal();
    if (rel.is_absolute() || rel.empty() || *rel.begin() == "..") {
      throw FormatError("zip: entry escapes destination: " + entry.name);
    }
    const fs::path target = dest / rel;
    fs::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary);
    out.write(reinterpret_cast<const char*>(entry.data.data()), std::streamsize(entry.data.size()));
    if (!out) throw FormatError("zip: cannot write " + target.string());
  }
}

}  // namespace hgpsl
