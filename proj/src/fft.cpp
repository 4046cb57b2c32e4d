#include "mrbench/fft.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include <fftw3.h>

#include "mrbench/error.hpp"

namespace mrb {

namespace {

// fftw_execute_dft is thread-safe; the planner is not.
std::mutex planner_mutex;

fftw_plan plan_for(std::size_t height, std::size_t width, int sign)
{
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> cache;
  std::lock_guard lock(planner_mutex);
  auto key = std::make_tuple(height, width, sign);
  if (auto it = cache.find(key); it != cache.end()) {
    return it->second;
  }
  std::vector<cx> scratch(height * width);
  auto *buf = reinterpret_cast<fftw_complex *>(scratch.data());
  fftw_plan p = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buf, buf, sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

// Moves element (y, x) to ((y + sy) % h, (x + sx) % w).
void circshift(std::span<cx> data, std::size_t h, std::size_t w, std::size_t sy, std::size_t sx)
{
  if (sy == 0 && sx == 0) {
    return;
  }
  thread_local std::vector<cx> tmp;
  tmp.assign(data.begin(), data.end());
  for (std::size_t y = 0; y < h; ++y) {
    const cx *src = tmp.data() + y * w;
    cx *dst = data.data() + ((y + sy) % h) * w;
    std::copy(src, src + (w - sx), dst + sx);
    std::copy(src + (w - sx), src + w, dst);
  }
}

void transform(std::span<cx> data, std::size_t h, std::size_t w, int sign)
{
  // ifftshift: shift by ceil(n/2); fftshift: shift by floor(n/2).
  circshift(data, h, w, (h + 1) / 2, (w + 1) / 2);
  auto *buf = reinterpret_cast<fftw_complex *>(data.data());
  fftw_execute_dft(plan_for(h, w, sign), buf, buf);
  circshift(data, h, w, h / 2, w / 2);
  double const scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (auto &v : data) {
    v *= scale;
  }
}

void check(const ComplexImage &img)
{
  if (img.height < 1 || img.width < 1 || img.data.size() != img.height * img.width) {
    throw Error(ErrorCode::InvalidData, "image dims must be >= 1 and match the payload");
  }
  for (const auto &v : img.data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw Error(ErrorCode::InvalidData, "non-finite sample in FFT input");
    }
  }
}

} // namespace

void fft2c_inplace(std::span<cx> data, std::size_t height, std::size_t width)
{
  transform(data, height, width, FFTW_FORWARD);
}

void ifft2c_inplace(std::span<cx> data, std::size_t height, std::size_t width)
{
  transform(data, height, width, FFTW_BACKWARD);
}

ComplexImage fft2c(const ComplexImage &img)
{
  check(img);
  ComplexImage out = img;
  fft2c_inplace(out.data, out.height, out.width);
  return out;
}

ComplexImage ifft2c(const ComplexImage &ksp)
{
  check(ksp);
  ComplexImage out = ksp;
  ifft2c_inplace(out.data, out.height, out.width);
  return out;
}

CoilImages fft2c(const CoilImages &img)
{
  CoilImages out = img;
  for (std::size_t c = 0; c < out.ncoils; ++c) {
    fft2c_inplace(out.coil(c), out.height, out.width);
  }
  return out;
}

CoilImages ifft2c(const CoilImages &ksp)
{
  CoilImages out = ksp;
  for (std::size_t c = 0; c < out.ncoils; ++c) {
    ifft2c_inplace(out.coil(c), out.height, out.width);
  }
  return out;
}

} // namespace mrb
