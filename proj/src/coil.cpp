#include "mrbench/coil.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mrbench/error.hpp"
#include "mrbench/fft.hpp"

namespace mrb {

RealImage rss_combine(const CoilImages &coils)
{
  if (coils.ncoils < 1) {
    throw Error(ErrorCode::InvalidData, "rss_combine needs at least one coil");
  }
  RealImage out(coils.height, coils.width);
  for (std::size_t c = 0; c < coils.ncoils; ++c) {
    auto plane = coils.coil(c);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      out.data[i] += std::norm(plane[i]);
    }
  }
  for (auto &v : out.data) {
    v = std::sqrt(v);
  }
  return out;
}

template <typename T> Grid<T> center_crop(const Grid<T> &img, std::size_t out_h, std::size_t out_w)
{
  if (out_h > img.height || out_w > img.width || out_h == 0 || out_w == 0) {
    throw Error(ErrorCode::InvalidCropSize, "cannot crop " + std::to_string(img.height) + "x" +
                                                std::to_string(img.width) + " to " + std::to_string(out_h) +
                                                "x" + std::to_string(out_w));
  }
  std::size_t const y0 = (img.height - out_h) / 2;
  std::size_t const x0 = (img.width - out_w) / 2;
  Grid<T> out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    std::copy_n(img.data.begin() + static_cast<std::ptrdiff_t>((y0 + y) * img.width + x0), out_w,
                out.data.begin() + static_cast<std::ptrdiff_t>(y * out_w));
  }
  return out;
}

template Grid<double> center_crop(const Grid<double> &, std::size_t, std::size_t);
template Grid<cx> center_crop(const Grid<cx> &, std::size_t, std::size_t);
template Grid<float> center_crop(const Grid<float> &, std::size_t, std::size_t);
template Grid<std::uint8_t> center_crop(const Grid<std::uint8_t> &, std::size_t, std::size_t);

MagnitudeVolume center_crop(const MagnitudeVolume &vol, std::size_t out_h, std::size_t out_w)
{
  MagnitudeVolume out(vol.nslices, out_h, out_w);
  out.attrs = vol.attrs;
  for (std::size_t s = 0; s < vol.nslices; ++s) {
    Grid<float> slice(vol.height, vol.width);
    auto src = vol.slice(s);
    std::copy(src.begin(), src.end(), slice.data.begin());
    auto cropped = center_crop(slice, out_h, out_w);
    std::copy(cropped.data.begin(), cropped.data.end(), out.slice(s).begin());
  }
  return out;
}

VirtualCoilFit fit_virtual_coil(const KSpaceVolume &ksp)
{
  if (ksp.ncoils < 2) {
    throw Error(ErrorCode::InvalidArgument, "virtual single coil needs at least two coils");
  }
  std::size_t const nc = ksp.ncoils;
  using Mat = Eigen::MatrixXcd;
  using Vec = Eigen::VectorXcd;

  // Gram matrix G = A^H A over every pixel of every slice, A = [img_1 ... img_nc].
  std::vector<CoilImages> images;
  images.reserve(ksp.nslices);
  Mat gram = Mat::Zero(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(nc));
  for (std::size_t s = 0; s < ksp.nslices; ++s) {
    images.push_back(ifft2c(ksp.slice(s)));
    const auto &img = images.back();
    for (std::size_t i = 0; i < nc; ++i) {
      for (std::size_t j = i; j < nc; ++j) {
        auto a = img.coil(i);
        auto b = img.coil(j);
        cx acc = 0.0;
        for (std::size_t p = 0; p < a.size(); ++p) {
          acc += std::conj(a[p]) * b[p];
        }
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += acc;
      }
    }
  }
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::conj(gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
    }
  }

  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  Eigen::VectorXd evals = eig.eigenvalues();
  Mat evecs = eig.eigenvectors();
  double const top = evals(evals.size() - 1);

  // Dominant right singular vector, global phase fixed so its largest entry is real positive.
  Vec dominant = evecs.col(evecs.cols() - 1);
  Eigen::Index big = 0;
  dominant.cwiseAbs().maxCoeff(&big);
  dominant *= std::polar(1.0, -std::arg(dominant(big)));

  VirtualCoilFit fit;
  fit.weights.assign(nc, cx(0.0));
  if (!(top > 0.0) || !std::isfinite(top)) {
    fit.degenerate = true;
    for (std::size_t c = 0; c < nc; ++c) {
      fit.weights[c] = dominant(static_cast<Eigen::Index>(c));
    }
    return fit;
  }

  // Right-hand side A^H t with t = RSS * exp(i * arg(A v)).
  Vec rhs = Vec::Zero(static_cast<Eigen::Index>(nc));
  for (const auto &img : images) {
    std::size_t const np = img.plane();
    for (std::size_t p = 0; p < np; ++p) {
      cx combo = 0.0;
      double power = 0.0;
      for (std::size_t c = 0; c < nc; ++c) {
        cx v = img.coil(c)[p];
        combo += dominant(static_cast<Eigen::Index>(c)) * v;
        power += std::norm(v);
      }
      double const mag = std::abs(combo);
      if (mag == 0.0) {
        continue;
      }
      cx target = std::sqrt(power) * (combo / mag);
      for (std::size_t c = 0; c < nc; ++c) {
        rhs(static_cast<Eigen::Index>(c)) += std::conj(img.coil(c)[p]) * target;
      }
    }
  }

  // Minimum-norm least squares through the pseudo-inverse of G; zero or
  // duplicated coils fall into the discarded null space.
  double const cutoff = top * 1e-12;
  Vec w = Vec::Zero(static_cast<Eigen::Index>(nc));
  for (Eigen::Index k = 0; k < evals.size(); ++k) {
    if (evals(k) > cutoff) {
      Vec u = evecs.col(k);
      w += u * (u.adjoint() * rhs)(0) / evals(k);
      ++fit.rank;
    }
  }
  bool finite = true;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    finite = finite && std::isfinite(w(k).real()) && std::isfinite(w(k).imag());
  }
  if (!finite || w.norm() == 0.0) {
    fit.degenerate = true;
    w = dominant;
  }
  for (std::size_t c = 0; c < nc; ++c) {
    fit.weights[c] = w(static_cast<Eigen::Index>(c));
  }
  return fit;
}

KSpaceVolume virtual_single_coil(const KSpaceVolume &ksp)
{
  VirtualCoilFit fit = fit_virtual_coil(ksp);
  KSpaceVolume out(ksp.nslices, 1, ksp.height, ksp.width);
  out.attrs = ksp.attrs;
  for (std::size_t s = 0; s < ksp.nslices; ++s) {
    auto dst = out.coil(s, 0);
    std::vector<cx> acc(dst.size());
    for (std::size_t c = 0; c < ksp.ncoils; ++c) {
      auto src = ksp.coil(s, c);
      for (std::size_t p = 0; p < acc.size(); ++p) {
        acc[p] += fit.weights[c] * cx(src[p].real(), src[p].imag());
      }
    }
    for (std::size_t p = 0; p < acc.size(); ++p) {
      dst[p] = cxf(static_cast<float>(acc[p].real()), static_cast<float>(acc[p].imag()));
    }
  }
  Json weights = Json::array();
  for (const auto &w : fit.weights) {
    weights.push_back({w.real(), w.imag()});
  }
  out.attrs.extra["vsc_weights"] = weights;
  out.attrs.extra["vsc_rank"] = fit.rank;
  out.attrs.extra["vsc_fit_degenerate"] = fit.degenerate;
  out.attrs.extra["source_ncoils"] = ksp.ncoils;
  return out;
}

} // namespace mrb
