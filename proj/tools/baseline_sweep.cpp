// Sweeps the cs_tv weight scale and the cg_sense iteration budget on a small
// simulated suite and prints mean SSIM per track. Used to pick the defaults in
// recon.hpp.
#include <cstdio>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mrbench/metrics.hpp"
#include "mrbench/suite.hpp"

using namespace mrb;

int main(int argc, char **argv)
{
  CLI::App app{"baseline parameter sweep"};
  SuiteConfig suite;
  suite.ncases = 4;
  std::vector<double> scales = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  std::vector<std::size_t> iters = {3, 5, 8, 10, 15, 20, 30};
  app.add_option("--cases", suite.ncases);
  app.add_option("--seed", suite.seed);
  app.add_option("--snr", suite.base_snr);
  app.add_option("--size", suite.height)->each([&](const std::string &) { suite.width = suite.height; });
  app.add_option("--crop", suite.crop);
  app.add_option("--lambda-scales", scales);
  app.add_option("--cg-iters", iters);
  CLI11_PARSE(app, argc, argv);

  std::vector<SuiteCase> cases;
  for (std::size_t i = 0; i < suite.ncases; ++i) {
    cases.push_back(make_suite_case(suite, i));
  }
  std::vector<TrackConfig> const tracks = {TrackConfig::parse("mc_r4"), TrackConfig::parse("mc_r8"),
                                           TrackConfig::parse("sc_r4")};
  std::vector<std::vector<TrackInput>> inputs(tracks.size());
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (const auto &c : cases) {
      inputs[t].push_back(track_input(suite, c, tracks[t]));
    }
  }
  auto truth = [&](std::size_t t, std::size_t i) -> const MagnitudeVolume & {
    return tracks[t].coil_mode == CoilMode::Multi ? cases[i].sim.ground_truth : cases[i].single_coil_truth;
  };
  double const n = static_cast<double>(cases.size());

  fmt::print("suite: {} cases, {}x{}, {} coils, base_snr {}\n", suite.ncases, suite.height, suite.width, suite.ncoils,
             suite.base_snr);
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      s += ssim(truth(t, i), zero_filled(inputs[t][i].kspace, suite.crop));
    }
    fmt::print("{} zero_filled {:.4f}\n", tracks[t].name(), s / n);
  }

  for (std::size_t t = 0; t < 2; ++t) {
    std::vector<SensitivityMaps> maps;
    for (const auto &in : inputs[t]) {
      maps.push_back(estimate_sensitivities(in.kspace, in.mask.center_fraction).front());
    }
    for (std::size_t it : iters) {
      ReconConfig cfg = ReconConfig::defaults(ReconMethod::CgSense);
      cfg.max_iters = it;
      cfg.crop = suite.crop;
      double s = 0.0;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        s += ssim(truth(t, i), cg_sense(inputs[t][i].kspace, inputs[t][i].mask, {&maps[i], 1}, cfg).image);
      }
      fmt::print("{} cg_sense iters {:3d} {:.4f}\n", tracks[t].name(), it, s / n);
    }
  }

  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (double scale : scales) {
      ReconConfig cfg = ReconConfig::defaults(ReconMethod::CsTv);
      cfg.lambda_scale = scale;
      cfg.crop = suite.crop;
      double s = 0.0;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        s += ssim(truth(t, i), cs_tv(inputs[t][i].kspace, inputs[t][i].mask, cfg).image);
      }
      fmt::print("{} cs_tv lambda_scale {:.0e} {:.4f}\n", tracks[t].name(), scale, s / n);
      std::fflush(stdout);
    }
  }
  return 0;
}
