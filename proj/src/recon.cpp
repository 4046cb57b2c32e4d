#include "mrbench/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "mrbench/error.hpp"
#include "mrbench/fft.hpp"
#include "mrbench/parallel.hpp"
#include "mrbench/phantom.hpp"

namespace mrb {

std::string to_string(ReconMethod m)
{
  switch (m) {
  case ReconMethod::ZeroFilled: return "zero_filled";
  case ReconMethod::CsTv: return "cs_tv";
  case ReconMethod::CgSense: return "cg_sense";
  }
  return "unknown";
}

ReconMethod recon_method_from_string(const std::string &s)
{
  if (s == "zero_filled") {
    return ReconMethod::ZeroFilled;
  }
  if (s == "cs_tv") {
    return ReconMethod::CsTv;
  }
  if (s == "cg_sense") {
    return ReconMethod::CgSense;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown reconstruction method '" + s + "'");
}

void ReconConfig::validate() const
{
  if (lambda_tv && !(*lambda_tv > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "cs_tv needs lambda_tv > 0");
  }
  if (!(lambda_scale > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "lambda_scale must be positive");
  }
  if (max_iters < 1 || !(tol > 0.0) || tv_inner_iters < 1 || crop < 1) {
    throw Error(ErrorCode::InvalidArgument, "need max_iters >= 1, tol > 0, tv_inner_iters >= 1, crop >= 1");
  }
}

Json ReconConfig::to_json() const
{
  Json j = {{"method", to_string(method)},
            {"lambda_scale", lambda_scale},
            {"max_iters", max_iters},
            {"tol", tol},
            {"cs_mode", cs_mode == CsMode::Ista ? "ista" : "fista"},
            {"tv_inner_iters", tv_inner_iters},
            {"crop", crop}};
  j["lambda_tv"] = lambda_tv ? Json(*lambda_tv) : Json(nullptr);
  return j;
}

ReconConfig ReconConfig::defaults(ReconMethod m)
{
  ReconConfig c;
  c.method = m;
  c.max_iters = m == ReconMethod::CgSense ? kCgSenseDefaultIters : kCsTvDefaultIters;
  return c;
}

ReconConfig ReconConfig::from_json(const Json &j)
{
  ReconConfig c = defaults(recon_method_from_string(j.value("method", std::string("zero_filled"))));
  if (j.contains("lambda_tv") && !j["lambda_tv"].is_null()) {
    c.lambda_tv = j["lambda_tv"].get<double>();
  }
  c.lambda_scale = j.value("lambda_scale", c.lambda_scale);
  c.max_iters = j.value("max_iters", c.max_iters);
  c.tol = j.value("tol", c.tol);
  c.cs_mode = j.value("cs_mode", std::string("fista")) == "ista" ? CsMode::Ista : CsMode::Fista;
  c.tv_inner_iters = j.value("tv_inner_iters", c.tv_inner_iters);
  c.crop = j.value("crop", c.crop);
  c.validate();
  return c;
}

SenseOperator::SenseOperator(const SensitivityMaps &maps, const SamplingMask &mask)
    : maps_(maps), lines_(mask.line_selected)
{
  if (mask.width() != maps.width) {
    throw Error(ErrorCode::ShapeMismatch, "mask width does not match sensitivity maps");
  }
}

void SenseOperator::apply_mask(CoilImages &ksp) const
{
  std::size_t const w = ksp.width;
  for (std::size_t c = 0; c < ksp.ncoils; ++c) {
    auto plane = ksp.coil(c);
    for (std::size_t y = 0; y < ksp.height; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (!lines_[x]) {
          plane[y * w + x] = 0.0;
        }
      }
    }
  }
}

CoilImages SenseOperator::forward(std::span<const cx> image) const
{
  CoilImages out(maps_.ncoils, maps_.height, maps_.width);
  for (std::size_t c = 0; c < maps_.ncoils; ++c) {
    auto dst = out.coil(c);
    auto map = maps_.coil(c);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = map[i] * image[i];
    }
    fft2c_inplace(dst, maps_.height, maps_.width);
  }
  apply_mask(out);
  return out;
}

std::vector<cx> SenseOperator::adjoint(const CoilImages &ksp) const
{
  CoilImages tmp = ksp;
  apply_mask(tmp);
  std::vector<cx> out(maps_.plane(), cx(0.0));
  for (std::size_t c = 0; c < maps_.ncoils; ++c) {
    auto plane = tmp.coil(c);
    ifft2c_inplace(plane, maps_.height, maps_.width);
    auto map = maps_.coil(c);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += std::conj(map[i]) * plane[i];
    }
  }
  return out;
}

SensitivityMaps identity_maps(std::size_t height, std::size_t width)
{
  SensitivityMaps m(1, height, width);
  std::fill(m.data.begin(), m.data.end(), cx(1.0));
  return m;
}

MagnitudeVolume zero_filled(const KSpaceVolume &ksp, std::size_t crop)
{
  ksp.validate();
  MagnitudeVolume out = reference_from_kspace(ksp, crop);
  out.attrs.extra["recon"] = {{"method", "zero_filled"}, {"crop", crop}};
  return out;
}

SensitivityMaps estimate_sensitivities(const KSpaceVolume &ksp, std::size_t slice, double center_fraction)
{
  if (ksp.ncoils < 2) {
    throw Error(ErrorCode::NotApplicable, "sensitivity estimation needs multi-coil data");
  }
  std::size_t const n = center_line_count(ksp.width, center_fraction);
  if (n < 1) {
    throw Error(ErrorCode::InvalidArgument, "centre block is empty");
  }
  std::size_t const start = center_line_start(ksp.width, n);
  std::vector<double> window(ksp.width, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Raised cosine that vanishes one line outside each end of the block.
    double const t = static_cast<double>(i + 1) / static_cast<double>(n + 1);
    window[start + i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t));
  }
  CoilImages low = ksp.slice(slice);
  for (std::size_t c = 0; c < low.ncoils; ++c) {
    auto plane = low.coil(c);
    for (std::size_t y = 0; y < low.height; ++y) {
      for (std::size_t x = 0; x < low.width; ++x) {
        plane[y * low.width + x] *= window[x];
      }
    }
    ifft2c_inplace(plane, low.height, low.width);
  }
  RealImage const rss = rss_combine(low);
  for (std::size_t c = 0; c < low.ncoils; ++c) {
    auto plane = low.coil(c);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      plane[i] /= std::max(rss.data[i], kSensitivityEpsilon);
    }
  }
  return low;
}

std::vector<SensitivityMaps> estimate_sensitivities(const KSpaceVolume &ksp, double center_fraction)
{
  std::vector<SensitivityMaps> out;
  out.reserve(ksp.nslices);
  for (std::size_t s = 0; s < ksp.nslices; ++s) {
    out.push_back(estimate_sensitivities(ksp, s, center_fraction));
  }
  return out;
}

namespace {

double norm2(std::span<const cx> v)
{
  double acc = 0.0;
  for (const auto &x : v) {
    acc += std::norm(x);
  }
  return acc;
}

const SensitivityMaps &maps_for_slice(std::span<const SensitivityMaps> maps, std::size_t s)
{
  return maps.size() == 1 ? maps[0] : maps[s];
}

void check_maps(const KSpaceVolume &ksp, std::span<const SensitivityMaps> maps)
{
  if (maps.size() != 1 && maps.size() != ksp.nslices) {
    throw Error(ErrorCode::ShapeMismatch, "need one set of maps or one per slice");
  }
  for (const auto &m : maps) {
    if (m.ncoils != ksp.ncoils || m.height != ksp.height || m.width != ksp.width) {
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("maps are {}x{}x{}, k-space is {}x{}x{}", m.ncoils, m.height, m.width, ksp.ncoils,
                              ksp.height, ksp.width));
    }
  }
}

RealImage magnitude(std::span<const cx> x, std::size_t h, std::size_t w)
{
  RealImage img(h, w);
  for (std::size_t i = 0; i < x.size(); ++i) {
    img.data[i] = std::abs(x[i]);
  }
  return img;
}

// CGLS: conjugate gradients on A^H A x = A^H y, tracking the data residual
// r = y - A x explicitly so ||r|| is monotone in exact arithmetic.
std::vector<cx> cgls_slice(const SenseOperator &op, const CoilImages &y, const ReconConfig &cfg, SolverTrace &trace)
{
  std::size_t const n = op.height() * op.width();
  std::vector<cx> x(n, cx(0.0));
  CoilImages r = y;
  std::vector<cx> s = op.adjoint(r);
  std::vector<cx> p = s;
  double gamma = norm2(s);
  double const rhs_norm = std::sqrt(gamma);
  double const r0 = std::sqrt(norm2(r.data));
  trace.data_residual.push_back(r0);
  trace.normal_residual.push_back(rhs_norm);
  if (rhs_norm == 0.0) {
    trace.converged = true;
    return x;
  }
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    if (std::sqrt(gamma) / rhs_norm < cfg.tol) {
      trace.converged = true;
      break;
    }
    CoilImages q = op.forward(p);
    double const delta = norm2(q.data);
    if (delta == 0.0) {
      trace.converged = true;
      break;
    }
    double const alpha = gamma / delta;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
    }
    for (std::size_t i = 0; i < r.data.size(); ++i) {
      r.data[i] -= alpha * q.data[i];
    }
    s = op.adjoint(r);
    double const gamma_new = norm2(s);
    double const rn = std::sqrt(norm2(r.data));
    trace.data_residual.push_back(rn);
    trace.normal_residual.push_back(std::sqrt(gamma_new));
    trace.iterations = it + 1;
    if (!std::isfinite(rn) || !std::isfinite(gamma_new) || rn > 10.0 * r0) {
      throw Error(ErrorCode::SolverDiverged, fmt::format("data residual {} after {} iterations (start {})", rn,
                                                         it + 1, r0));
    }
    double const beta = gamma_new / gamma;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = s[i] + beta * p[i];
    }
    gamma = gamma_new;
  }
  if (!trace.converged && std::sqrt(gamma) / rhs_norm < cfg.tol) {
    trace.converged = true;
  }
  return x;
}

std::size_t idx(std::size_t y, std::size_t x, std::size_t w) { return y * w + x; }

// Forward-difference gradient with zero difference across the far edges.
void gradient(std::span<const cx> u, std::size_t h, std::size_t w, std::vector<cx> &g)
{
  std::size_t const n = h * w;
  g.assign(2 * n, cx(0.0));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t const i = idx(y, x, w);
      if (y + 1 < h) {
        g[i] = u[idx(y + 1, x, w)] - u[i];
      }
      if (x + 1 < w) {
        g[n + i] = u[idx(y, x + 1, w)] - u[i];
      }
    }
  }
}

// Negative adjoint of gradient().
void divergence(const std::vector<cx> &p, std::size_t h, std::size_t w, std::vector<cx> &d)
{
  std::size_t const n = h * w;
  d.assign(n, cx(0.0));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t const i = idx(y, x, w);
      cx v = 0.0;
      if (h > 1) {
        if (y == 0) {
          v += p[i];
        } else if (y + 1 == h) {
          v -= p[idx(y - 1, x, w)];
        } else {
          v += p[i] - p[idx(y - 1, x, w)];
        }
      }
      if (w > 1) {
        if (x == 0) {
          v += p[n + i];
        } else if (x + 1 == w) {
          v -= p[n + idx(y, x - 1, w)];
        } else {
          v += p[n + i] - p[n + idx(y, x - 1, w)];
        }
      }
      d[i] = v;
    }
  }
}

struct CsState {
  std::vector<cx> x;
  CoilImages residual; // A x - y
  double objective = 0.0;
};

} // namespace

double total_variation(std::span<const cx> image, std::size_t height, std::size_t width)
{
  std::vector<cx> g;
  gradient(image, height, width, g);
  std::size_t const n = height * width;
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tv += std::sqrt(std::norm(g[i]) + std::norm(g[n + i]));
  }
  return tv;
}

std::vector<cx> tv_prox(std::span<const cx> z, std::size_t height, std::size_t width, double weight,
                        std::size_t iters, std::vector<cx> &dual)
{
  std::size_t const n = height * width;
  if (dual.size() != 2 * n) {
    dual.assign(2 * n, cx(0.0));
  }
  std::vector<cx> out(z.begin(), z.end());
  if (weight <= 0.0) {
    return out;
  }
  // x = z - weight * div p, with p <- proj_{|p|<=1}(p + tau grad(div p - z / weight)).
  double const tau = 0.25;
  std::vector<cx> d;
  std::vector<cx> g;
  std::vector<cx> tmp(n);
  for (std::size_t it = 0; it < iters; ++it) {
    divergence(dual, height, width, d);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = d[i] - z[i] / weight;
    }
    gradient(tmp, height, width, g);
    for (std::size_t i = 0; i < n; ++i) {
      cx const a = dual[i] + tau * g[i];
      cx const b = dual[n + i] + tau * g[n + i];
      double const mag = std::sqrt(std::norm(a) + std::norm(b));
      double const scale = mag > 1.0 ? 1.0 / mag : 1.0;
      dual[i] = a * scale;
      dual[n + i] = b * scale;
    }
  }
  divergence(dual, height, width, d);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = z[i] - weight * d[i];
  }
  return out;
}

ReconOutput cg_sense(const KSpaceVolume &ksp, const SamplingMask &mask, std::span<const SensitivityMaps> maps,
                     const ReconConfig &cfg)
{
  ksp.validate();
  cfg.validate();
  if (ksp.ncoils < 2) {
    throw Error(ErrorCode::NotApplicable, "cg_sense needs multi-coil input");
  }
  check_maps(ksp, maps);

  ReconOutput out;
  out.image = MagnitudeVolume(ksp.nslices, cfg.crop, cfg.crop);
  out.image.attrs = ksp.attrs;
  out.traces.resize(ksp.nslices);
  parallel_for(ksp.nslices, cfg.jobs, [&](std::size_t s) {
    SenseOperator op(maps_for_slice(maps, s), mask);
    CoilImages y = ksp.slice(s);
    op.apply_mask(y);
    auto x = cgls_slice(op, y, cfg, out.traces[s]);
    out.image.set_slice(s, center_crop(magnitude(x, ksp.height, ksp.width), cfg.crop, cfg.crop));
  });

  Json recon = cfg.to_json();
  recon["method"] = "cg_sense";
  bool converged = true;
  Json iters = Json::array();
  for (const auto &t : out.traces) {
    converged = converged && t.converged;
    iters.push_back(t.iterations);
  }
  recon["converged"] = converged;
  recon["iterations"] = iters;
  out.image.attrs.extra["recon"] = recon;
  return out;
}

ReconOutput cs_tv(const KSpaceVolume &ksp, const SamplingMask &mask, const ReconConfig &cfg,
                  std::span<const SensitivityMaps> maps)
{
  ksp.validate();
  cfg.validate();
  std::vector<SensitivityMaps> owned;
  if (ksp.ncoils == 1) {
    owned.push_back(identity_maps(ksp.height, ksp.width));
    maps = owned;
  } else if (maps.empty()) {
    owned = estimate_sensitivities(ksp, mask.center_fraction);
    maps = owned;
  }
  check_maps(ksp, maps);

  std::size_t const h = ksp.height;
  std::size_t const w = ksp.width;
  std::size_t const n = h * w;

  ReconOutput out;
  out.image = MagnitudeVolume(ksp.nslices, cfg.crop, cfg.crop);
  out.image.attrs = ksp.attrs;
  out.traces.resize(ksp.nslices);

  parallel_for(ksp.nslices, cfg.jobs, [&](std::size_t s) {
    SolverTrace &trace = out.traces[s];
    SenseOperator op(maps_for_slice(maps, s), mask);
    CoilImages y = ksp.slice(s);
    op.apply_mask(y);
    double const lambda = cfg.lambda_tv ? *cfg.lambda_tv : cfg.lambda_scale * std::sqrt(norm2(y.data));
    trace.lambda = lambda;

    // Step 1/L with L = 1 bounding ||A^H A|| for RSS-normalised maps and an orthonormal FFT.
    auto evaluate = [&](std::vector<cx> x) {
      CsState st;
      st.residual = op.forward(x);
      for (std::size_t i = 0; i < st.residual.data.size(); ++i) {
        st.residual.data[i] -= y.data[i];
      }
      st.objective = 0.5 * norm2(st.residual.data) + lambda * total_variation(x, h, w);
      st.x = std::move(x);
      return st;
    };

    CsState current = evaluate(op.adjoint(y));
    CsState best = current;
    trace.objective.push_back(current.objective);
    trace.data_residual.push_back(std::sqrt(norm2(current.residual.data)));

    std::vector<cx> dual;
    std::vector<cx> momentum_point = current.x;
    CoilImages momentum_residual = current.residual;
    double t_k = 1.0;
    std::vector<cx> prev_x = current.x;

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
      // Gradient step from the extrapolated point (FISTA) or the iterate (ISTA).
      const std::vector<cx> &base = cfg.cs_mode == CsMode::Fista ? momentum_point : current.x;
      const CoilImages &base_res = cfg.cs_mode == CsMode::Fista ? momentum_residual : current.residual;
      std::vector<cx> grad = op.adjoint(base_res);
      std::vector<cx> z(n);
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = base[i] - grad[i];
      }
      CsState candidate = evaluate(tv_prox(z, h, w, lambda, cfg.tv_inner_iters, dual));
      trace.iterations = it + 1;

      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        change += std::norm(candidate.x[i] - current.x[i]);
      }
      double const rel_change = std::sqrt(change / std::max(norm2(current.x), 1e-300));

      if (cfg.cs_mode == CsMode::Ista) {
        // Monotone: a step that fails to lower the objective is rejected.
        if (candidate.objective <= current.objective) {
          current = std::move(candidate);
        }
      } else {
        double const t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
        double const mix = (t_k - 1.0) / t_next;
        prev_x = current.x;
        current = std::move(candidate);
        momentum_point.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          momentum_point[i] = current.x[i] + mix * (current.x[i] - prev_x[i]);
        }
        momentum_residual = op.forward(momentum_point);
        for (std::size_t i = 0; i < momentum_residual.data.size(); ++i) {
          momentum_residual.data[i] -= y.data[i];
        }
        t_k = t_next;
      }
      if (current.objective < best.objective) {
        best = current;
      }
      trace.objective.push_back(current.objective);
      trace.data_residual.push_back(std::sqrt(norm2(current.residual.data)));
      if (rel_change < cfg.tol) {
        trace.converged = true;
        break;
      }
    }
    out.image.set_slice(s, center_crop(magnitude(best.x, h, w), cfg.crop, cfg.crop));
  });

  Json recon = cfg.to_json();
  recon["method"] = "cs_tv";
  bool converged = true;
  Json lambdas = Json::array();
  for (const auto &t : out.traces) {
    converged = converged && t.converged;
    lambdas.push_back(t.lambda);
  }
  recon["converged"] = converged;
  recon["lambda_per_slice"] = lambdas;
  if (!converged) {
    recon["warning"] = "max_iters reached before convergence; best iterate returned";
  }
  out.image.attrs.extra["recon"] = recon;
  return out;
}

ReconOutput reconstruct(const KSpaceVolume &ksp, const ReconConfig &cfg)
{
  switch (cfg.method) {
  case ReconMethod::ZeroFilled: {
    ReconOutput out;
    out.image = zero_filled(ksp, cfg.crop);
    return out;
  }
  case ReconMethod::CgSense: {
    SamplingMask mask = mask_from_attrs(ksp.attrs, ksp.width);
    auto maps = estimate_sensitivities(ksp, mask.center_fraction);
    return cg_sense(ksp, mask, maps, cfg);
  }
  case ReconMethod::CsTv: {
    SamplingMask mask = mask_from_attrs(ksp.attrs, ksp.width);
    return cs_tv(ksp, mask, cfg);
  }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown reconstruction method");
}

} // namespace mrb
