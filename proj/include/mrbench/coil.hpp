#pragma once

#include <vector>

#include "mrbench/types.hpp"

namespace mrb {

inline constexpr std::size_t kCropSize = 320;

// sqrt(sum_c |coil_c|^2) per pixel.
RealImage rss_combine(const CoilImages &coils);

// Centered window. An odd margin drops its extra row/column from the
// high-index side, i.e. the window starts at floor((n - out) / 2).
template <typename T> Grid<T> center_crop(const Grid<T> &img, std::size_t out_h = kCropSize,
                                          std::size_t out_w = kCropSize);
MagnitudeVolume center_crop(const MagnitudeVolume &vol, std::size_t out_h = kCropSize,
                            std::size_t out_w = kCropSize);

struct VirtualCoilFit {
  std::vector<cx> weights;
  std::size_t rank = 0;
  bool degenerate = false;
};

// Complex per-coil weights w such that |sum_c w_c img_c| best matches the RSS
// image, with the target phase taken from the dominant singular combination.
VirtualCoilFit fit_virtual_coil(const KSpaceVolume &ksp);

// Collapses a multi-coil case to one emulated channel, sum_c w_c k_c. The
// fitted weights are stored in attrs.extra["vsc_weights"] as [re, im] pairs.
KSpaceVolume virtual_single_coil(const KSpaceVolume &ksp);

} // namespace mrb
