#include "mrbench/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "mrbench/error.hpp"
#include "mrbench/rng.hpp"

namespace mrb {

std::string to_string(CoilMode m) { return m == CoilMode::Multi ? "multicoil" : "singlecoil"; }

CoilMode coil_mode_from_string(const std::string &s)
{
  if (s == "multicoil" || s == "multi") {
    return CoilMode::Multi;
  }
  if (s == "singlecoil" || s == "single") {
    return CoilMode::Single;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown coil mode '" + s + "'");
}

std::size_t SamplingMask::count() const
{
  return static_cast<std::size_t>(std::count(line_selected.begin(), line_selected.end(), true));
}

std::vector<std::size_t> SamplingMask::selected_indices() const
{
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < line_selected.size(); ++i) {
    if (line_selected[i]) {
      idx.push_back(i);
    }
  }
  return idx;
}

double default_center_fraction(int accel)
{
  switch (accel) {
  case 4: return 0.08;
  case 8: return 0.04;
  default: throw Error(ErrorCode::InvalidArgument, "no default centre fraction for R=" + std::to_string(accel));
  }
}

TrackConfig TrackConfig::make(CoilMode mode, int accel)
{
  TrackConfig t{mode, accel, default_center_fraction(accel)};
  t.validate();
  return t;
}

void TrackConfig::validate() const
{
  if (accel != 4 && accel != 8) {
    throw Error(ErrorCode::InvalidArgument, "track acceleration must be 4 or 8");
  }
  if (coil_mode == CoilMode::Single && accel != 4) {
    throw Error(ErrorCode::InvalidArgument, "single-coil track only runs at R=4");
  }
  if (!(center_fraction > 0.0 && center_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "centre fraction must lie in (0, 1)");
  }
}

std::string TrackConfig::name() const
{
  return std::string(coil_mode == CoilMode::Multi ? "mc" : "sc") + "_r" + std::to_string(accel);
}

TrackConfig TrackConfig::parse(const std::string &name)
{
  if (name == "mc_r4") {
    return make(CoilMode::Multi, 4);
  }
  if (name == "mc_r8") {
    return make(CoilMode::Multi, 8);
  }
  if (name == "sc_r4") {
    return make(CoilMode::Single, 4);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown track '" + name + "' (expected mc_r4, mc_r8 or sc_r4)");
}

std::size_t center_line_count(std::size_t width, double center_fraction)
{
  return static_cast<std::size_t>(std::lround(center_fraction * static_cast<double>(width)));
}

std::size_t center_line_start(std::size_t width, std::size_t n_center) { return (width - n_center + 1) / 2; }

SamplingMask make_mask(std::size_t width, double accel, double center_fraction, std::uint64_t seed)
{
  if (width == 0 || !(accel >= 1.0) || !std::isfinite(accel)) {
    throw Error(ErrorCode::MaskInfeasible, "need width >= 1 and R >= 1");
  }
  if (!(center_fraction >= 0.0 && center_fraction < 1.0)) {
    throw Error(ErrorCode::MaskInfeasible, "centre fraction must lie in [0, 1)");
  }
  std::size_t const n_center = center_line_count(width, center_fraction);
  std::size_t const n_total = static_cast<std::size_t>(std::lround(static_cast<double>(width) / accel));
  if (n_center > n_total || n_total == 0) {
    throw Error(ErrorCode::MaskInfeasible, fmt::format("centre block of {} lines exceeds the {} lines allowed at "
                                                       "R={} over width {}",
                                                       n_center, n_total, accel, width));
  }

  SamplingMask mask;
  mask.line_selected.assign(width, false);
  mask.accel = accel;
  mask.center_fraction = center_fraction;
  mask.seed = seed;

  std::size_t const start = center_line_start(width, n_center);
  std::vector<std::size_t> outer;
  outer.reserve(width - n_center);
  for (std::size_t i = 0; i < width; ++i) {
    if (i >= start && i < start + n_center) {
      mask.line_selected[i] = true;
    } else {
      outer.push_back(i);
    }
  }

  SplitMix64 rng(seed);
  std::size_t const k = n_total - n_center;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(outer.size() - i));
    std::swap(outer[i], outer[j]);
    mask.line_selected[outer[i]] = true;
  }
  return mask;
}

std::uint64_t mask_seed_for_case(std::uint64_t base_seed, const std::string &case_id)
{
  return derive_seed(base_seed, "mask:" + case_id);
}

KSpaceVolume apply_mask(const KSpaceVolume &ksp, const SamplingMask &mask)
{
  if (mask.width() != ksp.width) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("mask width {} does not match k-space width {}", mask.width(), ksp.width));
  }
  KSpaceVolume out = ksp;
  for (std::size_t s = 0; s < ksp.nslices; ++s) {
    for (std::size_t c = 0; c < ksp.ncoils; ++c) {
      auto plane = out.coil(s, c);
      for (std::size_t y = 0; y < ksp.height; ++y) {
        for (std::size_t x = 0; x < ksp.width; ++x) {
          if (!mask.line_selected[x]) {
            plane[y * ksp.width + x] = cxf(0.0f, 0.0f);
          }
        }
      }
    }
  }
  out.attrs.extra["mask"] = {{"acceleration", mask.accel},
                             {"center_fraction", mask.center_fraction},
                             {"seed", mask.seed},
                             {"lines", mask.selected_indices()}};
  return out;
}

SamplingMask mask_from_attrs(const CaseAttrs &attrs, std::size_t width)
{
  if (!attrs.extra.contains("mask")) {
    throw Error(ErrorCode::InvalidData, "case " + attrs.case_id + " carries no sampling mask");
  }
  const auto &m = attrs.extra["mask"];
  SamplingMask mask;
  try {
    mask.accel = m.at("acceleration").get<double>();
    mask.center_fraction = m.at("center_fraction").get<double>();
    mask.seed = m.at("seed").get<std::uint64_t>();
    mask.line_selected.assign(width, false);
    for (auto i : m.at("lines").get<std::vector<std::size_t>>()) {
      if (i >= width) {
        throw Error(ErrorCode::InvalidData, "mask line out of range");
      }
      mask.line_selected[i] = true;
    }
  } catch (const Json::exception &e) {
    throw Error(ErrorCode::InvalidData, std::string("malformed mask attrs: ") + e.what());
  }
  return mask;
}

std::string format_mask_fixture_line(const SamplingMask &mask)
{
  std::string out = fmt::format("{} {} {} {} :", mask.width(), mask.accel, mask.center_fraction, mask.seed);
  bool first = true;
  for (auto i : mask.selected_indices()) {
    out += (first ? " " : ",") + std::to_string(i);
    first = false;
  }
  return out;
}

MaskFixtureEntry parse_mask_fixture_line(const std::string &line)
{
  auto colon = line.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::InvalidData, "mask fixture line lacks ':'");
  }
  MaskFixtureEntry e;
  std::istringstream head(line.substr(0, colon));
  if (!(head >> e.width >> e.accel >> e.center_fraction >> e.seed)) {
    throw Error(ErrorCode::InvalidData, "mask fixture line has a malformed parameter block");
  }
  std::string tail = line.substr(colon + 1);
  std::replace(tail.begin(), tail.end(), ',', ' ');
  std::istringstream idx(tail);
  std::size_t i = 0;
  while (idx >> i) {
    e.indices.push_back(i);
  }
  return e;
}

} // namespace mrb
