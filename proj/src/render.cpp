#include "mrbench/render.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>

#include <png.h>

#include "mrbench/error.hpp"

namespace mrb {

namespace {

void png_error_fn(png_structp png, png_const_charp msg)
{
  auto *text = static_cast<std::string *>(png_get_error_ptr(png));
  *text = msg;
  png_longjmp(png, 1);
}

void png_warn_fn(png_structp, png_const_charp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

} // namespace

std::vector<std::uint8_t> encode_png_gray8(const Grid<std::uint8_t> &img)
{
  if (img.height == 0 || img.width == 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot encode an empty image");
  }
  std::vector<std::uint8_t> out;
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warn_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "png encode: " + err);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto *v = static_cast<std::vector<std::uint8_t> *>(png_get_io_ptr(p));
        v->insert(v->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.data.data() + y * img.width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Grid<std::uint8_t> decode_png_gray8(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorCode::InvalidData, "not a PNG");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warn_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  Grid<std::uint8_t> img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::InvalidData, "png decode: " + err);
  }
  ReadCursor cur{bytes, 0};
  png_set_read_fn(png, &cur, [](png_structp p, png_bytep data, png_size_t n) {
    auto *c = static_cast<ReadCursor *>(png_get_io_ptr(p));
    if (c->pos + n > c->bytes.size()) {
      png_error(p, "truncated");
    }
    std::memcpy(data, c->bytes.data() + c->pos, n);
    c->pos += n;
  });
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::InvalidData, "expected 8-bit grayscale PNG");
  }
  img = Grid<std::uint8_t>(png_get_image_height(png, info), png_get_image_width(png, info));
  for (std::size_t y = 0; y < img.height; ++y) {
    png_read_row(png, img.data.data() + y * img.width, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

double display_max(const MagnitudeVolume &vol)
{
  if (vol.data.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty volume");
  }
  std::vector<float> v = vol.data;
  std::size_t const n = v.size();
  // nearest rank: ceil(p n) - 1
  auto const k = static_cast<std::size_t>(std::ceil(0.995 * static_cast<double>(n))) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  double const hi = v[k];
  return hi > 0.0 ? hi : 1.0;
}

Grid<std::uint8_t> window_slice(const MagnitudeVolume &vol, std::size_t slice, double hi)
{
  if (slice >= vol.nslices) {
    throw Error(ErrorCode::InvalidArgument, "slice out of range");
  }
  if (!(hi > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "display window must be positive");
  }
  Grid<std::uint8_t> out(vol.height, vol.width);
  auto const src = vol.slice(slice);
  for (std::size_t i = 0; i < src.size(); ++i) {
    double const t = std::clamp(static_cast<double>(src[i]) / hi, 0.0, 1.0);
    out.data[i] = static_cast<std::uint8_t>(std::floor(t * 255.0 + 0.5));
  }
  return out;
}

std::array<std::size_t, 3> thumbnail_slices(std::size_t nslices)
{
  if (nslices == 0) {
    throw Error(ErrorCode::InvalidArgument, "volume has no slices");
  }
  return {0, (nslices - 1) / 2, nslices - 1};
}

std::vector<std::uint8_t> render_slice_png(const MagnitudeVolume &vol, std::size_t slice, double hi)
{
  return encode_png_gray8(window_slice(vol, slice, hi));
}

} // namespace mrb
