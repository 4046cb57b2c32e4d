#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mrbench/types.hpp"

namespace mrb {

// KSB1 layout:
//   bytes 0-5   "KSB1\r\n"
//   bytes 6-9   header length H, uint32 little-endian
//   next H      UTF-8 JSON {"arrays": [{name, dtype, shape}], "attrs": {...}}
//   payload     arrays in header order, row-major little-endian;
//               c64 is interleaved (re, im) float32.
inline constexpr char kContainerMagic[6] = {'K', 'S', 'B', '1', '\r', '\n'};
inline constexpr const char *kKSpaceArray = "kspace";
inline constexpr const char *kRssArray = "reconstruction_rss";

struct CaseFile {
  CaseAttrs attrs;
  std::optional<KSpaceVolume> kspace;
  std::optional<MagnitudeVolume> rss;
};

std::vector<std::uint8_t> encode_case(const CaseFile &file);
CaseFile decode_case(std::span<const std::uint8_t> bytes);

void write_case(const std::filesystem::path &path, const CaseFile &file);
CaseFile read_case(const std::filesystem::path &path);

// Whole-file helpers shared with the submission store.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path &path);
void write_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

} // namespace mrb
