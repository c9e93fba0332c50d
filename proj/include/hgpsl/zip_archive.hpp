#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hgpsl {

struct ZipEntry {
  std::string name;
  std::vector<std::uint8_t> data;
};

// Decodes every file entry of an in-memory zip archive (stored or deflated).
// Throws FormatError on corrupt input or unsupported methods.
std::vector<ZipEntry> read_zip(const std::vector<std::uint8_t>& archive);

// Writes the entries below dest, creating directories. Entries that would
// escape dest are rejected.
void extract_zip(const std::vector<std::uint8_t>& archive, const std::filesystem::path& dest);

}  // namespace hgpsl
