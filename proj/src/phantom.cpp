#include "mrbench/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mrbench/error.hpp"
#include "mrbench/fft.hpp"
#include "mrbench/rng.hpp"

namespace mrb {

namespace {

struct Ellipse {
  double cx, cy; // centre, normalised coordinates
  double a, b;   // semi-axes, normalised
  double theta;
  double value;

  bool contains(double u, double v) const
  {
    double const du = u - cx;
    double const dv = v - cy;
    double const c = std::cos(theta);
    double const s = std::sin(theta);
    double const p = (c * du + s * dv) / a;
    double const q = (-s * du + c * dv) / b;
    return p * p + q * q <= 1.0;
  }
};

// Intensity palettes: the same random draw u in [0, 1) maps to a different
// grey level per contrast so both contrasts share geometry.
double palette(Contrast c, double u) { return c == Contrast::PD ? 0.25 + 0.70 * u : 0.10 + 0.75 * u * u; }
double base_level(Contrast c, double u) { return c == Contrast::PD ? 0.45 + 0.15 * u : 0.20 + 0.10 * u; }

Ellipse outer_ellipse(const SimConfig &cfg)
{
  SplitMix64 rng(derive_seed(cfg.seed, "anatomy"));
  Ellipse e{};
  e.cx = rng.uniform(-0.04, 0.04);
  e.cy = rng.uniform(-0.04, 0.04);
  e.a = rng.uniform(0.58, 0.70);
  e.b = rng.uniform(0.66, 0.78);
  e.theta = rng.uniform(-0.2, 0.2);
  e.value = rng.uniform();
  return e;
}

std::vector<Ellipse> slice_ellipses(const SimConfig &cfg, std::size_t slice_idx, const Ellipse &outer)
{
  SplitMix64 rng(derive_seed(cfg.seed, "slice:" + std::to_string(slice_idx)));
  std::size_t const count = 6 + static_cast<std::size_t>(rng.below(7));
  std::vector<Ellipse> out;
  for (std::size_t i = 0; i < count; ++i) {
    Ellipse e{};
    double const r = 0.65 * std::sqrt(rng.uniform());
    double const phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    e.cx = outer.cx + r * outer.a * std::cos(phi);
    e.cy = outer.cy + r * outer.b * std::sin(phi);
    e.a = rng.uniform(0.05, 0.22);
    e.b = rng.uniform(0.05, 0.22);
    e.theta = rng.uniform(0.0, std::numbers::pi);
    e.value = rng.uniform();
    out.push_back(e);
  }
  return out;
}

// Small low-contrast blob, at most 5 pixels across.
struct Lesion {
  double cx, cy;
  double radius_px;
  double delta;
};

Lesion slice_lesion(const SimConfig &cfg, std::size_t slice_idx, const Ellipse &outer)
{
  SplitMix64 rng(derive_seed(cfg.seed, "lesion:" + std::to_string(slice_idx)));
  double const r = 0.5 * std::sqrt(rng.uniform());
  double const phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  Lesion l{};
  l.cx = outer.cx + r * outer.a * std::cos(phi);
  l.cy = outer.cy + r * outer.b * std::sin(phi);
  l.radius_px = rng.uniform(1.5, 2.4);
  l.delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.04, 0.08);
  return l;
}

double norm_u(std::size_t x, std::size_t width) { return (static_cast<double>(x) - 0.5 * width) / (0.5 * width); }

} // namespace

void SimConfig::validate() const
{
  if (nslices < 1 || ncoils < 1) {
    throw Error(ErrorCode::InvalidArgument, "nslices and ncoils must be >= 1");
  }
  if (!(base_snr > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "base_snr must be positive");
  }
  if (crop < 1 || height < crop || width < crop) {
    throw Error(ErrorCode::InvalidArgument, "image dims must be at least the crop size");
  }
  if (field_strength_tesla != 1.5 && field_strength_tesla != 3.0) {
    throw Error(ErrorCode::InvalidArgument, "field strength must be 1.5 or 3.0 T");
  }
  if (case_id.empty()) {
    throw Error(ErrorCode::InvalidArgument, "case_id is empty");
  }
}

RealImage make_phantom(const SimConfig &cfg, std::size_t slice_idx)
{
  cfg.validate();
  if (slice_idx >= cfg.nslices) {
    throw Error(ErrorCode::InvalidArgument, "slice index out of range");
  }
  Ellipse const outer = outer_ellipse(cfg);
  auto const inner = slice_ellipses(cfg, slice_idx, outer);
  Lesion const lesion = slice_lesion(cfg, slice_idx, outer);

  RealImage img(cfg.height, cfg.width);
  double const lx = lesion.cx * 0.5 * cfg.width + 0.5 * cfg.width;
  double const ly = lesion.cy * 0.5 * cfg.height + 0.5 * cfg.height;
  for (std::size_t y = 0; y < cfg.height; ++y) {
    double const v = norm_u(y, cfg.height);
    for (std::size_t x = 0; x < cfg.width; ++x) {
      double const u = norm_u(x, cfg.width);
      if (!outer.contains(u, v)) {
        continue;
      }
      double val = base_level(cfg.contrast, outer.value);
      for (const auto &e : inner) {
        if (e.contains(u, v)) {
          val = palette(cfg.contrast, e.value);
        }
      }
      double const dx = static_cast<double>(x) - lx;
      double const dy = static_cast<double>(y) - ly;
      if (dx * dx + dy * dy <= lesion.radius_px * lesion.radius_px) {
        val += lesion.delta;
      }
      img(y, x) = std::clamp(val, 0.0, 1.0);
    }
  }
  return img;
}

Grid<std::uint8_t> phantom_support(const SimConfig &cfg)
{
  Ellipse const outer = outer_ellipse(cfg);
  Grid<std::uint8_t> mask(cfg.height, cfg.width);
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      mask(y, x) = outer.contains(norm_u(x, cfg.width), norm_u(y, cfg.height)) ? 1 : 0;
    }
  }
  return mask;
}

SensitivityMaps make_sensitivities(const SimConfig &cfg)
{
  if (cfg.ncoils < 1) {
    throw Error(ErrorCode::InvalidArgument, "ncoils must be >= 1");
  }
  std::size_t const nc = cfg.ncoils;
  SensitivityMaps maps(nc, cfg.height, cfg.width);
  // Lobe centres outside the field of view.
  double const ring = 1.2;
  double const sigma = 0.8;
  RealImage power(cfg.height, cfg.width);
  for (std::size_t c = 0; c < nc; ++c) {
    double const angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(nc);
    double const px = nc == 1 ? 0.0 : ring * std::cos(angle);
    double const py = nc == 1 ? 0.0 : ring * std::sin(angle);
    // Under a quarter cycle of phase across the field of view.
    double const slope_u = 0.35 * std::cos(angle + 0.7);
    double const slope_v = 0.35 * std::sin(angle + 0.7);
    double const offset = 0.4 * static_cast<double>(c);
    auto plane = maps.coil(c);
    for (std::size_t y = 0; y < cfg.height; ++y) {
      double const v = norm_u(y, cfg.height);
      for (std::size_t x = 0; x < cfg.width; ++x) {
        double const u = norm_u(x, cfg.width);
        double const d2 = (u - px) * (u - px) + (v - py) * (v - py);
        double const mag = std::exp(-d2 / (2.0 * sigma * sigma));
        plane[y * cfg.width + x] = std::polar(mag, slope_u * u + slope_v * v + offset);
        power(y, x) += mag * mag;
      }
    }
  }
  for (std::size_t c = 0; c < nc; ++c) {
    auto plane = maps.coil(c);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      plane[i] /= std::sqrt(power.data[i]);
    }
  }
  return maps;
}

double rss_noise_std(std::size_t ncoils)
{
  // RSS of ncoils channels with E|n|^2 = 1 is chi_k / sqrt(2), k = 2 ncoils.
  double const k = 2.0 * static_cast<double>(ncoils);
  double const mean_chi = std::sqrt(2.0) * std::exp(std::lgamma((k + 1.0) / 2.0) - std::lgamma(k / 2.0));
  return std::sqrt(k - mean_chi * mean_chi) / std::sqrt(2.0);
}

double noise_sigma(const SimConfig &cfg)
{
  cfg.validate();
  if (std::isinf(cfg.base_snr)) {
    return 0.0;
  }
  SimConfig pd = cfg;
  pd.contrast = Contrast::PD;
  auto const support = phantom_support(cfg);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < cfg.nslices; ++s) {
    auto const img = make_phantom(pd, s);
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (support.data[i]) {
        sum += img.data[i];
        ++n;
      }
    }
  }
  double const mean_signal = n ? sum / static_cast<double>(n) : 0.0;
  return mean_signal / (cfg.effective_snr() * rss_noise_std(cfg.ncoils));
}

MagnitudeVolume reference_from_kspace(const KSpaceVolume &ksp, std::size_t crop)
{
  MagnitudeVolume gt(ksp.nslices, crop, crop);
  gt.attrs = ksp.attrs;
  for (std::size_t s = 0; s < ksp.nslices; ++s) {
    gt.set_slice(s, center_crop(rss_combine(ifft2c(ksp.slice(s))), crop, crop));
  }
  return gt;
}

SimulatedCase simulate_case(const SimConfig &cfg)
{
  cfg.validate();
  SimulatedCase out;
  out.maps = make_sensitivities(cfg);
  double const sigma = noise_sigma(cfg);

  KSpaceVolume ksp(cfg.nslices, cfg.ncoils, cfg.height, cfg.width);
  ksp.attrs.case_id = cfg.case_id;
  ksp.attrs.contrast = cfg.contrast;
  ksp.attrs.field_strength_tesla = cfg.field_strength_tesla;
  ksp.attrs.extra["sim_seed"] = cfg.seed;
  ksp.attrs.extra["noise_sigma"] = sigma;
  ksp.attrs.extra["base_snr"] = std::isinf(cfg.base_snr) ? Json(nullptr) : Json(cfg.base_snr);

  for (std::size_t s = 0; s < cfg.nslices; ++s) {
    auto const phantom = make_phantom(cfg, s);
    CoilImages coils(cfg.ncoils, cfg.height, cfg.width);
    for (std::size_t c = 0; c < cfg.ncoils; ++c) {
      auto dst = coils.coil(c);
      auto map = out.maps.coil(c);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = phantom.data[i] * map[i];
      }
    }
    CoilImages k = fft2c(coils);
    if (sigma > 0.0) {
      SplitMix64 rng(derive_seed(cfg.seed, "noise:" + std::to_string(s)));
      double const comp = sigma / std::sqrt(2.0);
      for (auto &v : k.data) {
        double const re = rng.normal();
        double const im = rng.normal();
        v += cx(comp * re, comp * im);
      }
    }
    ksp.set_slice(s, k);
  }
  out.ground_truth = reference_from_kspace(ksp, cfg.crop);
  out.kspace = std::move(ksp);
  return out;
}

} // namespace mrb
