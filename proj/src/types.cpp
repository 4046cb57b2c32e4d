#include "mrbench/types.hpp"

#include <cmath>

#include "mrbench/error.hpp"

namespace mrb {

std::string to_string(Contrast c) { return c == Contrast::PD ? "PD" : "PDFS"; }

Contrast contrast_from_string(const std::string &s)
{
  if (s == "PD") {
    return Contrast::PD;
  }
  if (s == "PDFS") {
    return Contrast::PDFS;
  }
  throw Error(ErrorCode::InvalidData, "unknown contrast '" + s + "'");
}

void CaseAttrs::validate() const
{
  if (case_id.empty()) {
    throw Error(ErrorCode::InvalidData, "case_id is empty");
  }
  if (field_strength_tesla != 1.5 && field_strength_tesla != 3.0) {
    throw Error(ErrorCode::InvalidData, "field strength must be 1.5 or 3.0 T");
  }
  if (!extra.is_object()) {
    throw Error(ErrorCode::InvalidData, "extra attrs must be an object");
  }
}

Json CaseAttrs::to_json() const
{
  Json j = extra;
  j["case_id"] = case_id;
  j["contrast"] = to_string(contrast);
  j["field_strength_tesla"] = field_strength_tesla;
  return j;
}

CaseAttrs CaseAttrs::from_json(const Json &j)
{
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidData, "attrs must be an object");
  }
  CaseAttrs a;
  try {
    a.case_id = j.at("case_id").get<std::string>();
    a.contrast = contrast_from_string(j.at("contrast").get<std::string>());
    a.field_strength_tesla = j.at("field_strength_tesla").get<double>();
  } catch (const Json::exception &e) {
    throw Error(ErrorCode::InvalidData, std::string("attrs: ") + e.what());
  }
  a.extra = j;
  a.extra.erase("case_id");
  a.extra.erase("contrast");
  a.extra.erase("field_strength_tesla");
  a.validate();
  return a;
}

ComplexImage CoilImages::coil_image(std::size_t c) const
{
  ComplexImage img(height, width);
  auto src = coil(c);
  std::copy(src.begin(), src.end(), img.data.begin());
  return img;
}

CoilImages KSpaceVolume::slice(std::size_t s) const
{
  CoilImages out(ncoils, height, width);
  for (std::size_t c = 0; c < ncoils; ++c) {
    auto src = coil(s, c);
    auto dst = out.coil(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = cx(src[i].real(), src[i].imag());
    }
  }
  return out;
}

void KSpaceVolume::set_slice(std::size_t s, const CoilImages &k)
{
  if (k.ncoils != ncoils || k.height != height || k.width != width) {
    throw Error(ErrorCode::ShapeMismatch, "slice dims do not match volume");
  }
  for (std::size_t c = 0; c < ncoils; ++c) {
    auto src = k.coil(c);
    auto dst = coil(s, c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = cxf(static_cast<float>(src[i].real()), static_cast<float>(src[i].imag()));
    }
  }
}

void KSpaceVolume::validate() const
{
  if (nslices < 1 || ncoils < 1 || height < 1 || width < 1) {
    throw Error(ErrorCode::InvalidData, "k-space dims must all be >= 1");
  }
  if (data.size() != nslices * ncoils * height * width) {
    throw Error(ErrorCode::InvalidData, "k-space payload size does not match dims");
  }
  attrs.validate();
}

RealImage MagnitudeVolume::slice_image(std::size_t s) const
{
  RealImage img(height, width);
  auto src = slice(s);
  std::copy(src.begin(), src.end(), img.data.begin());
  return img;
}

void MagnitudeVolume::set_slice(std::size_t s, const RealImage &img)
{
  if (img.height != height || img.width != width) {
    throw Error(ErrorCode::ShapeMismatch, "slice dims do not match volume");
  }
  auto dst = slice(s);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = static_cast<float>(img.data[i]);
  }
}

void MagnitudeVolume::validate() const
{
  if (nslices < 1 || height < 1 || width < 1) {
    throw Error(ErrorCode::InvalidData, "magnitude dims must all be >= 1");
  }
  if (data.size() != nslices * height * width) {
    throw Error(ErrorCode::InvalidData, "magnitude payload size does not match dims");
  }
  for (float v : data) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw Error(ErrorCode::InvalidData, "magnitude values must be finite and non-negative");
    }
  }
}

} // namespace mrb
