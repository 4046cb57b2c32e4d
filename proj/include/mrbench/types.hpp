#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mrb {

using cx = std::complex<double>;
using cxf = std::complex<float>;
using Json = nlohmann::json;

enum class Contrast { PD, PDFS };

std::string to_string(Contrast c);
Contrast contrast_from_string(const std::string &s);

// Per-case metadata carried alongside every array of that case.
struct CaseAttrs {
  std::string case_id;
  Contrast contrast = Contrast::PD;
  double field_strength_tesla = 3.0;
  Json extra = Json::object();

  void validate() const;
  Json to_json() const;
  static CaseAttrs from_json(const Json &j);
  bool operator==(const CaseAttrs &) const = default;
};

// Row-major 2-D grid, [height, width].
template <typename T> struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), data(h * w, fill) {}

  std::size_t size() const { return data.size(); }
  T &operator()(std::size_t y, std::size_t x) { return data[y * width + x]; }
  const T &operator()(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }
};

using ComplexImage = Grid<cx>;
using RealImage = Grid<double>;

// Complex images of every receive channel, [ncoils, height, width].
struct CoilImages {
  std::size_t ncoils = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<cx> data;

  CoilImages() = default;
  CoilImages(std::size_t nc, std::size_t h, std::size_t w) : ncoils(nc), height(h), width(w), data(nc * h * w) {}

  std::size_t plane() const { return height * width; }
  std::span<cx> coil(std::size_t c) { return std::span<cx>(data).subspan(c * plane(), plane()); }
  std::span<const cx> coil(std::size_t c) const { return std::span<const cx>(data).subspan(c * plane(), plane()); }
  ComplexImage coil_image(std::size_t c) const;
};

// Coil sensitivities share the coil-image layout.
using SensitivityMaps = CoilImages;

// Raw frequency-domain samples for one case, [nslices, ncoils, height, width].
struct KSpaceVolume {
  std::size_t nslices = 0;
  std::size_t ncoils = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<cxf> data;
  CaseAttrs attrs;

  KSpaceVolume() = default;
  KSpaceVolume(std::size_t ns, std::size_t nc, std::size_t h, std::size_t w)
      : nslices(ns), ncoils(nc), height(h), width(w), data(ns * nc * h * w)
  {
  }

  std::size_t plane() const { return height * width; }
  std::span<cxf> coil(std::size_t s, std::size_t c)
  {
    return std::span<cxf>(data).subspan((s * ncoils + c) * plane(), plane());
  }
  std::span<const cxf> coil(std::size_t s, std::size_t c) const
  {
    return std::span<const cxf>(data).subspan((s * ncoils + c) * plane(), plane());
  }

  // Slice s in double precision.
  CoilImages slice(std::size_t s) const;
  void set_slice(std::size_t s, const CoilImages &k);
  void validate() const;
};

// Non-negative real images, [nslices, height, width].
struct MagnitudeVolume {
  std::size_t nslices = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;
  CaseAttrs attrs;

  MagnitudeVolume() = default;
  MagnitudeVolume(std::size_t ns, std::size_t h, std::size_t w) : nslices(ns), height(h), width(w), data(ns * h * w) {}

  std::size_t plane() const { return height * width; }
  std::span<float> slice(std::size_t s) { return std::span<float>(data).subspan(s * plane(), plane()); }
  std::span<const float> slice(std::size_t s) const
  {
    return std::span<const float>(data).subspan(s * plane(), plane());
  }
  RealImage slice_image(std::size_t s) const;
  void set_slice(std::size_t s, const RealImage &img);
  void validate() const;
};

} // namespace mrb
