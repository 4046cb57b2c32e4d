#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrbench/types.hpp"

namespace mrb {

enum class CoilMode { Multi, Single };

std::string to_string(CoilMode m);
CoilMode coil_mode_from_string(const std::string &s);

// Retrospective Cartesian undersampling pattern over phase-encode columns.
struct SamplingMask {
  std::vector<bool> line_selected;
  double accel = 1.0;
  double center_fraction = 0.0;
  std::uint64_t seed = 0;

  std::size_t width() const { return line_selected.size(); }
  std::size_t count() const;
  std::vector<std::size_t> selected_indices() const;
  bool operator==(const SamplingMask &) const = default;
};

// One challenge track: coil mode plus acceleration.
struct TrackConfig {
  CoilMode coil_mode = CoilMode::Multi;
  int accel = 4;
  double center_fraction = 0.08;

  static TrackConfig make(CoilMode mode, int accel);
  static TrackConfig parse(const std::string &name);
  void validate() const;
  // "mc_r4", "mc_r8" or "sc_r4".
  std::string name() const;
};

double default_center_fraction(int accel);

std::size_t center_line_count(std::size_t width, double center_fraction);
// Index of the first line of the fully sampled block: (width - n_center + 1) / 2.
std::size_t center_line_start(std::size_t width, std::size_t n_center);

// Fully sampled centred block of round(cf * width) lines plus uniformly drawn
// outer lines so that round(width / R) lines are selected in total. The outer
// lines are the first k entries of a forward Fisher-Yates shuffle (SplitMix64)
// over the ascending list of non-centre columns.
SamplingMask make_mask(std::size_t width, double accel, double center_fraction, std::uint64_t seed);

// Per-case mask seed; one mask is shared by every slice of a case.
std::uint64_t mask_seed_for_case(std::uint64_t base_seed, const std::string &case_id);

// Zeros unselected columns; records the mask in attrs.extra["mask"].
KSpaceVolume apply_mask(const KSpaceVolume &ksp, const SamplingMask &mask);

// Rebuilds the mask recorded by apply_mask.
SamplingMask mask_from_attrs(const CaseAttrs &attrs, std::size_t width);

// Fixture text: "width R center_fraction seed : i0,i1,..."
std::string format_mask_fixture_line(const SamplingMask &mask);
struct MaskFixtureEntry {
  std::size_t width = 0;
  double accel = 0.0;
  double center_fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> indices;
};
MaskFixtureEntry parse_mask_fixture_line(const std::string &line);

} // namespace mrb
