#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mrbench/types.hpp"

namespace mrb {

// 8-bit grayscale PNG, no time or text chunks, so equal pixels give equal
// bytes.
std::vector<std::uint8_t> encode_png_gray8(const Grid<std::uint8_t> &img);
Grid<std::uint8_t> decode_png_gray8(std::span<const std::uint8_t> bytes);

// Upper display level: the 99.5th percentile of the volume (nearest rank).
double display_max(const MagnitudeVolume &vol);

// Linear window [0, hi] to 0..255, clamped, round half up.
Grid<std::uint8_t> window_slice(const MagnitudeVolume &vol, std::size_t slice, double hi);

// First, middle and last slice.
std::array<std::size_t, 3> thumbnail_slices(std::size_t nslices);

std::vector<std::uint8_t> render_slice_png(const MagnitudeVolume &vol, std::size_t slice, double hi);

} // namespace mrb
