#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrbench/phantom.hpp"
#include "mrbench/recon.hpp"
#include "mrbench/sampling.hpp"

namespace mrb {

// Simulated evaluation suite: case i is "case_%04d", seeded from the suite
// seed and the case id, with PD and PDFS alternating.
struct SuiteConfig {
  std::size_t ncases = 20;
  std::uint64_t seed = 2019;
  double base_snr = 40.0;
  std::size_t height = 372;
  std::size_t width = 372;
  std::size_t ncoils = 15;
  std::size_t nslices = 1;
  std::size_t crop = kCropSize;
  unsigned jobs = 1;

  void validate() const;
};

std::string suite_case_id(std::size_t index);
SimConfig suite_case_config(const SuiteConfig &cfg, std::size_t index);

// A case together with its emulated single-coil version and each track's
// reference image.
struct SuiteCase {
  SimulatedCase sim;
  KSpaceVolume single_coil;
  MagnitudeVolume single_coil_truth;
};

SuiteCase make_suite_case(const SuiteConfig &cfg, std::size_t index);

// Undersampled k-space for a track with the per-case mask.
struct TrackInput {
  KSpaceVolume kspace;
  SamplingMask mask;
};
TrackInput track_input(const SuiteConfig &cfg, const SuiteCase &c, const TrackConfig &track);

// Baselines run per track: zero_filled everywhere, cg_sense on multi-coil
// tracks, cs_tv everywhere (estimated maps on multi-coil input).
struct BaselineSuiteResult {
  // track name -> method name -> per-case SSIM, in case order
  std::map<std::string, std::map<std::string, std::vector<double>>> ssim;
  double seconds = 0.0;

  double mean(const std::string &track, const std::string &method) const;
  // Highest mean SSIM over the methods run on a track.
  double best(const std::string &track) const;
  Json to_json() const;
};

BaselineSuiteResult run_baseline_suite(const SuiteConfig &cfg, const ReconConfig &cg, const ReconConfig &cs);

} // namespace mrb
