#include "mrbench/suite.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/format.h>

#include "mrbench/coil.hpp"
#include "mrbench/error.hpp"
#include "mrbench/metrics.hpp"
#include "mrbench/parallel.hpp"
#include "mrbench/rng.hpp"

namespace mrb {

void SuiteConfig::validate() const
{
  if (ncases < 1) {
    throw Error(ErrorCode::InvalidArgument, "suite needs at least one case");
  }
  suite_case_config(*this, 0).validate();
}

std::string suite_case_id(std::size_t index) { return fmt::format("case_{:04d}", index); }

SimConfig suite_case_config(const SuiteConfig &cfg, std::size_t index)
{
  SimConfig s;
  s.case_id = suite_case_id(index);
  s.seed = derive_seed(cfg.seed, "case:" + s.case_id);
  s.contrast = index % 2 == 0 ? Contrast::PD : Contrast::PDFS;
  s.base_snr = cfg.base_snr;
  s.height = cfg.height;
  s.width = cfg.width;
  s.ncoils = cfg.ncoils;
  s.nslices = cfg.nslices;
  s.crop = cfg.crop;
  return s;
}

SuiteCase make_suite_case(const SuiteConfig &cfg, std::size_t index)
{
  SuiteCase c;
  c.sim = simulate_case(suite_case_config(cfg, index));
  c.single_coil = virtual_single_coil(c.sim.kspace);
  c.single_coil_truth = zero_filled(c.single_coil, cfg.crop);
  return c;
}

TrackInput track_input(const SuiteConfig &cfg, const SuiteCase &c, const TrackConfig &track)
{
  track.validate();
  // Tracks with the same acceleration share a case's mask.
  std::uint64_t const base = derive_seed(cfg.seed, fmt::format("R{}", track.accel));
  const KSpaceVolume &full = track.coil_mode == CoilMode::Multi ? c.sim.kspace : c.single_coil;
  TrackInput in;
  in.mask = make_mask(full.width, track.accel, track.center_fraction,
                      mask_seed_for_case(base, full.attrs.case_id));
  in.kspace = apply_mask(full, in.mask);
  return in;
}

double BaselineSuiteResult::mean(const std::string &track, const std::string &method) const
{
  const auto &v = ssim.at(track).at(method);
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

double BaselineSuiteResult::best(const std::string &track) const
{
  double b = -1.0;
  for (const auto &[method, v] : ssim.at(track)) {
    b = std::max(b, mean(track, method));
  }
  return b;
}

Json BaselineSuiteResult::to_json() const
{
  Json j = Json::object();
  for (const auto &[track, methods] : ssim) {
    for (const auto &[method, v] : methods) {
      j[track][method] = {{"mean_ssim", mean(track, method)}, {"per_case", v}};
    }
  }
  return j;
}

BaselineSuiteResult run_baseline_suite(const SuiteConfig &cfg, const ReconConfig &cg, const ReconConfig &cs)
{
  cfg.validate();
  auto const t0 = std::chrono::steady_clock::now();
  std::vector<TrackConfig> const tracks = {TrackConfig::parse("mc_r4"), TrackConfig::parse("mc_r8"),
                                           TrackConfig::parse("sc_r4")};
  // per case: track -> method -> ssim
  std::vector<std::map<std::string, std::map<std::string, double>>> per_case(cfg.ncases);
  parallel_for(cfg.ncases, cfg.jobs, [&](std::size_t i) {
    SuiteCase const c = make_suite_case(cfg, i);
    for (const auto &track : tracks) {
      auto const in = track_input(cfg, c, track);
      bool const multi = track.coil_mode == CoilMode::Multi;
      const MagnitudeVolume &truth = multi ? c.sim.ground_truth : c.single_coil_truth;
      auto &row = per_case[i][track.name()];
      row["zero_filled"] = ssim(truth, zero_filled(in.kspace, cfg.crop));
      if (multi) {
        auto const maps = estimate_sensitivities(in.kspace, in.mask.center_fraction);
        row["cg_sense"] = ssim(truth, cg_sense(in.kspace, in.mask, maps, cg).image);
        row["cs_tv"] = ssim(truth, cs_tv(in.kspace, in.mask, cs, maps).image);
      } else {
        row["cs_tv"] = ssim(truth, cs_tv(in.kspace, in.mask, cs).image);
      }
    }
  });
  BaselineSuiteResult r;
  for (const auto &row : per_case) {
    for (const auto &[track, methods] : row) {
      for (const auto &[method, v] : methods) {
        r.ssim[track][method].push_back(v);
      }
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

} // namespace mrb
