#include "doctest.h"

#include <cmath>

#include "mrbench/fft.hpp"
#include "mrbench/metrics.hpp"
#include "mrbench/phantom.hpp"
#include "mrbench/recon.hpp"
#include "mrbench/rng.hpp"
#include "test_util.hpp"

using namespace mrb;
using mrb::test::expect_code;

namespace {

SimConfig fixture_config(std::uint64_t seed, std::size_t ncoils = 8)
{
  SimConfig cfg;
  cfg.seed = seed;
  cfg.case_id = "rc_" + std::to_string(seed);
  cfg.height = 160;
  cfg.width = 152;
  cfg.crop = 128;
  cfg.ncoils = ncoils;
  cfg.base_snr = kNoiseless;
  return cfg;
}

std::vector<cx> random_vec(std::size_t n, SplitMix64 &rng)
{
  std::vector<cx> v(n);
  for (auto &x : v) {
    x = cx(rng.normal(), rng.normal());
  }
  return v;
}

cx dot(std::span<const cx> a, std::span<const cx> b)
{
  cx acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += std::conj(a[i]) * b[i];
  }
  return acc;
}

double l2(std::span<const cx> a) { return std::sqrt(std::abs(dot(a, a))); }

bool non_increasing(const std::vector<double> &v, double rel)
{
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] * (1.0 + rel)) {
      return false;
    }
  }
  return true;
}

double max_abs_diff(const MagnitudeVolume &a, const MagnitudeVolume &b)
{
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    worst = std::max(worst, static_cast<double>(std::abs(a.data[i] - b.data[i])));
  }
  return worst;
}

} // namespace

TEST_CASE("SenseOperator adjoint test")
{
  SplitMix64 rng(1);
  for (std::size_t nc : {1u, 4u, 15u}) {
    SensitivityMaps maps(nc, 24, 20);
    for (auto &v : maps.data) {
      v = cx(rng.normal(), rng.normal());
    }
    auto mask = make_mask(20, 4, 0.08, rng.next());
    SenseOperator op(maps, mask);
    auto x = random_vec(24 * 20, rng);
    CoilImages y(nc, 24, 20);
    y.data = random_vec(y.data.size(), rng);
    auto ax = op.forward(x);
    auto ahy = op.adjoint(y);
    cx const lhs = dot(y.data, ax.data);
    cx const rhs = dot(ahy, x);
    CHECK(std::abs(lhs - rhs) < 1e-6 * l2(x) * l2(y.data) * l2(maps.data));
  }
}

TEST_CASE("zero_filled")
{
  auto cfg = fixture_config(3);
  auto sim = simulate_case(cfg);
  SUBCASE("fully sampled noiseless case reproduces the ground truth")
  {
    auto zf = zero_filled(sim.kspace, cfg.crop);
    CHECK(max_abs_diff(zf, sim.ground_truth) < 1e-5);
    CHECK(zf.attrs.extra["recon"]["method"] == "zero_filled");
  }
  SUBCASE("R=4 undersampling lowers SSIM")
  {
    auto under = apply_mask(sim.kspace, make_mask(cfg.width, 4, 0.08, 5));
    double const full = ssim(sim.ground_truth, zero_filled(sim.kspace, cfg.crop));
    double const r4 = ssim(sim.ground_truth, zero_filled(under, cfg.crop));
    CHECK(r4 < full);
  }
  SUBCASE("single coil RSS is the magnitude of ifft2c")
  {
    auto one = virtual_single_coil(sim.kspace);
    auto zf = zero_filled(one, cfg.crop);
    auto img = center_crop(ifft2c(one.slice(0)).coil_image(0), cfg.crop, cfg.crop);
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(std::abs(zf.data[i] - std::abs(img.data[i])) < 1e-6);
    }
  }
}

TEST_CASE("emulated single coil is reconstructed by a plain inverse FFT")
{
  auto cfg = fixture_config(4, 15);
  auto sim = simulate_case(cfg);
  auto one = virtual_single_coil(sim.kspace);
  auto recon = zero_filled(one, cfg.crop);
  // Close to the multi-coil RSS reference it was fitted against.
  CHECK(nmse(sim.ground_truth, recon) < 0.01);
  CHECK(ssim(sim.ground_truth, recon) > 0.9);
}

TEST_CASE("estimate_sensitivities")
{
  auto cfg = fixture_config(6);
  auto sim = simulate_case(cfg);
  auto est = estimate_sensitivities(sim.kspace, 0, 0.08);
  auto support = phantom_support(cfg);
  double mae = 0.0;
  std::size_t n = 0;
  auto rss = rss_combine(est);
  for (std::size_t c = 0; c < est.ncoils; ++c) {
    auto e = est.coil(c);
    auto t = sim.maps.coil(c);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (support.data[i]) {
        mae += std::abs(e[i] - t[i]);
        ++n;
      }
    }
  }
  mae /= static_cast<double>(n);
  CHECK(mae < 0.05);
  for (std::size_t i = 0; i < rss.size(); ++i) {
    if (support.data[i]) {
      CHECK(std::abs(rss.data[i] - 1.0) < 1e-6);
    }
  }
  auto again = estimate_sensitivities(sim.kspace, 0, 0.08);
  CHECK(again.data == est.data);
  auto one = virtual_single_coil(sim.kspace);
  expect_code(ErrorCode::NotApplicable, [&] { estimate_sensitivities(one, 0, 0.08); });
}

TEST_CASE("cg_sense")
{
  auto cfg = fixture_config(7);
  auto sim = simulate_case(cfg);
  ReconConfig rc;
  rc.method = ReconMethod::CgSense;
  rc.crop = cfg.crop;
  std::vector<SensitivityMaps> maps{sim.maps};

  SUBCASE("full mask with exact maps recovers the ground truth")
  {
    auto full = make_mask(cfg.width, 1, 0.0, 0);
    auto out = cg_sense(sim.kspace, full, maps, rc);
    CHECK(max_abs_diff(out.image, sim.ground_truth) < 1e-4);
  }
  SUBCASE("R=4 halves the zero-filled NMSE and the residual never grows")
  {
    auto mask = make_mask(cfg.width, 4, 0.08, 17);
    auto under = apply_mask(sim.kspace, mask);
    auto out = cg_sense(under, mask, maps, rc);
    double const e_cg = nmse(sim.ground_truth, out.image);
    double const e_zf = nmse(sim.ground_truth, zero_filled(under, cfg.crop));
    CHECK(e_cg * 2.0 <= e_zf);
    REQUIRE(out.traces.size() == 1);
    CHECK(out.traces[0].data_residual.size() >= 2);
    CHECK(non_increasing(out.traces[0].data_residual, 1e-10));
    CHECK(out.image.attrs.extra["recon"]["method"] == "cg_sense");
  }
  SUBCASE("estimated maps through reconstruct()")
  {
    auto mask = make_mask(cfg.width, 4, 0.08, 17);
    auto under = apply_mask(sim.kspace, mask);
    auto out = reconstruct(under, rc);
    CHECK(ssim(sim.ground_truth, out.image) > ssim(sim.ground_truth, zero_filled(under, cfg.crop)));
  }
  SUBCASE("non-finite maps diverge")
  {
    auto bad = sim.maps;
    bad.data[bad.data.size() / 2] = cx(std::nan(""), 0.0);
    auto mask = make_mask(cfg.width, 4, 0.08, 17);
    std::vector<SensitivityMaps> bad_maps{bad};
    expect_code(ErrorCode::SolverDiverged, [&] { cg_sense(apply_mask(sim.kspace, mask), mask, bad_maps, rc); });
  }
  SUBCASE("single coil and shape errors")
  {
    auto one = virtual_single_coil(sim.kspace);
    auto mask = make_mask(cfg.width, 4, 0.08, 1);
    expect_code(ErrorCode::NotApplicable, [&] { cg_sense(one, mask, maps, rc); });
    std::vector<SensitivityMaps> wrong{SensitivityMaps(3, cfg.height, cfg.width)};
    expect_code(ErrorCode::ShapeMismatch, [&] { cg_sense(sim.kspace, mask, wrong, rc); });
  }
}

TEST_CASE("tv_prox")
{
  SplitMix64 rng(8);
  std::size_t const h = 12, w = 10;
  auto z = random_vec(h * w, rng);
  std::vector<cx> dual;
  SUBCASE("zero weight is the identity")
  {
    CHECK(tv_prox(z, h, w, 0.0, 20, dual) == z);
  }
  SUBCASE("prox lowers the prox objective relative to z")
  {
    double const weight = 0.3;
    auto x = tv_prox(z, h, w, weight, 200, dual);
    double dist = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      dist += std::norm(x[i] - z[i]);
    }
    double const obj_x = 0.5 * dist + weight * total_variation(x, h, w);
    double const obj_z = weight * total_variation(z, h, w);
    CHECK(obj_x < obj_z);
    // Constant images are fixed points.
    std::vector<cx> flat(h * w, cx(0.4, -0.2));
    std::vector<cx> d2;
    auto y = tv_prox(flat, h, w, weight, 20, d2);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(std::abs(y[i] - flat[i]) < 1e-12);
    }
  }
  SUBCASE("total variation of a step")
  {
    std::vector<cx> step(h * w, cx(0.0));
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = w / 2; x < w; ++x) {
        step[y * w + x] = 1.0;
      }
    }
    CHECK(total_variation(step, h, w) == doctest::Approx(static_cast<double>(h)));
  }
}

TEST_CASE("cs_tv")
{
  auto cfg = fixture_config(9);
  auto sim = simulate_case(cfg);
  auto one = virtual_single_coil(sim.kspace);
  auto gt_one = reference_from_kspace(one, cfg.crop);
  ReconConfig rc;
  rc.method = ReconMethod::CsTv;
  rc.crop = cfg.crop;

  SUBCASE("ISTA objective is non-increasing")
  {
    auto mask = make_mask(cfg.width, 4, 0.08, 21);
    rc.cs_mode = CsMode::Ista;
    rc.max_iters = 15;
    auto out = cs_tv(apply_mask(one, mask), mask, rc);
    REQUIRE(out.traces.size() == 1);
    CHECK(out.traces[0].objective.size() >= 2);
    CHECK(non_increasing(out.traces[0].objective, 0.0));
    CHECK(out.traces[0].objective.back() < out.traces[0].objective.front());
  }
  SUBCASE("vanishing lambda on a full mask approaches zero_filled")
  {
    auto full = make_mask(cfg.width, 1, 0.0, 0);
    rc.lambda_tv = 1e-9;
    auto out = cs_tv(apply_mask(one, full), full, rc);
    CHECK(max_abs_diff(out.image, zero_filled(one, cfg.crop)) < 1e-3);
  }
  SUBCASE("single coil R=4 gains SSIM over zero_filled")
  {
    auto mask = make_mask(cfg.width, 4, 0.08, 22);
    auto under = apply_mask(one, mask);
    auto out = cs_tv(under, mask, rc);
    double const s_cs = ssim(gt_one, out.image);
    double const s_zf = ssim(gt_one, zero_filled(under, cfg.crop));
    CHECK(s_cs >= s_zf + 0.02);
    CHECK(out.image.attrs.extra["recon"]["method"] == "cs_tv");
    CHECK(out.image.attrs.extra["recon"]["lambda_per_slice"].size() == 1);
  }
  SUBCASE("non-convergence is flagged")
  {
    auto mask = make_mask(cfg.width, 4, 0.08, 23);
    rc.max_iters = 1;
    rc.tol = 1e-300;
    auto out = cs_tv(apply_mask(one, mask), mask, rc);
    CHECK_FALSE(out.image.attrs.extra["recon"]["converged"].get<bool>());
    CHECK(out.image.attrs.extra["recon"].contains("warning"));
  }
  SUBCASE("deterministic")
  {
    auto mask = make_mask(cfg.width, 4, 0.08, 24);
    auto under = apply_mask(sim.kspace, mask);
    rc.max_iters = 5;
    CHECK(cs_tv(under, mask, rc).image.data == cs_tv(under, mask, rc).image.data);
  }
}

TEST_CASE("ReconConfig validation and json")
{
  ReconConfig rc;
  rc.lambda_tv = 0.0;
  expect_code(ErrorCode::InvalidArgument, [&] { rc.validate(); });
  rc.lambda_tv = 0.5;
  rc.method = ReconMethod::CsTv;
  rc.cs_mode = CsMode::Ista;
  auto back = ReconConfig::from_json(rc.to_json());
  CHECK(back.to_json() == rc.to_json());
  expect_code(ErrorCode::InvalidArgument, [] { recon_method_from_string("grappa"); });
}
