#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mrbench/coil.hpp"
#include "mrbench/types.hpp"

namespace mrb {

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();
inline constexpr double kPdfsSnrFactor = 4.0;

struct SimConfig {
  std::uint64_t seed = 0;
  std::string case_id = "case_0000";
  std::size_t nslices = 1;
  std::size_t height = 372;
  std::size_t width = 372;
  std::size_t ncoils = 15;
  std::size_t crop = kCropSize;
  Contrast contrast = Contrast::PD;
  // PD signal-to-noise; PDFS runs at base_snr / 4. kNoiseless disables noise.
  double base_snr = 40.0;
  double field_strength_tesla = 3.0;

  void validate() const;
  double effective_snr() const { return contrast == Contrast::PDFS ? base_snr / kPdfsSnrFactor : base_snr; }
};

// Piecewise-constant ellipse phantom in [0, 1]. Geometry depends only on
// (seed, slice_idx); the contrast selects the intensity palette.
RealImage make_phantom(const SimConfig &cfg, std::size_t slice_idx);

// Pixels inside the outer anatomy ellipse.
Grid<std::uint8_t> phantom_support(const SimConfig &cfg);

// Gaussian lobes on a ring around the field of view with a gentle linear
// phase each, normalised so the RSS of the maps is 1 at every pixel.
SensitivityMaps make_sensitivities(const SimConfig &cfg);

// Per-coil complex noise sigma (E|n|^2 = sigma^2) giving the configured SNR,
// defined as mean support signal of the PD-palette phantom over the standard
// deviation of the noise-only RSS background. Zero when noiseless.
double noise_sigma(const SimConfig &cfg);

// Standard deviation of the RSS of ncoils unit-sigma complex noise channels.
double rss_noise_std(std::size_t ncoils);

struct SimulatedCase {
  KSpaceVolume kspace;
  MagnitudeVolume ground_truth;
  SensitivityMaps maps;
};

// Fully sampled multi-coil case plus its ground truth,
// center_crop(rss(ifft2c(kspace))) taken from the stored (float) k-space.
SimulatedCase simulate_case(const SimConfig &cfg);

// Ground truth exactly as the benchmark defines it.
MagnitudeVolume reference_from_kspace(const KSpaceVolume &ksp, std::size_t crop = kCropSize);

} // namespace mrb
