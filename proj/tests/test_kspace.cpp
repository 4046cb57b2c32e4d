#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "mrbench/coil.hpp"
#include "mrbench/container.hpp"
#include "mrbench/error.hpp"
#include "mrbench/fft.hpp"
#include "mrbench/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mrb;
using mrb::test::expect_code;
using mrb::oracle::dft_oracle;

namespace {

ComplexImage random_image(std::size_t h, std::size_t w, std::uint64_t seed)
{
  SplitMix64 rng(seed);
  ComplexImage img(h, w);
  for (auto &v : img.data) {
    v = cx(rng.normal(), rng.normal());
  }
  return img;
}

double energy(const ComplexImage &img)
{
  double e = 0.0;
  for (const auto &v : img.data) {
    e += std::norm(v);
  }
  return e;
}

double rel_diff(const ComplexImage &a, const ComplexImage &b)
{
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a.data[i] - b.data[i]);
  }
  return std::sqrt(num / energy(b));
}

KSpaceVolume random_volume(std::size_t ns, std::size_t nc, std::size_t h, std::size_t w, std::uint64_t seed)
{
  SplitMix64 rng(seed);
  KSpaceVolume k(ns, nc, h, w);
  for (auto &v : k.data) {
    v = cxf(static_cast<float>(rng.normal()), static_cast<float>(rng.normal()));
  }
  k.attrs.case_id = "case_rt";
  k.attrs.contrast = Contrast::PDFS;
  k.attrs.field_strength_tesla = 1.5;
  k.attrs.extra["note"] = "round trip";
  return k;
}

} // namespace

TEST_CASE("fft2c and ifft2c are orthonormal inverses")
{
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{640, 368}, {372, 372}, {33, 17}}) {
    auto x = random_image(h, w, h * 1000 + w);
    auto k = fft2c(x);
    CHECK(rel_diff(ifft2c(k), x) < 1e-6);
    CHECK(rel_diff(fft2c(ifft2c(x)), x) < 1e-6);
    CHECK(std::abs(energy(k) - energy(x)) / energy(x) < 1e-6);
    CHECK(std::abs(energy(ifft2c(x)) - energy(x)) / energy(x) < 1e-6);
  }
}

TEST_CASE("fft2c matches a literal centred DFT on odd and even sizes")
{
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{4, 4}, {5, 6}, {7, 3}}) {
    auto x = random_image(h, w, 7 + h * w);
    CHECK(rel_diff(fft2c(x), dft_oracle(x)) < 1e-12);
  }
}

TEST_CASE("centred impulse transforms to a flat spectrum of magnitude 1/4")
{
  ComplexImage x(4, 4);
  x(2, 2) = 1.0;
  auto k = fft2c(x);
  for (const auto &v : k.data) {
    CHECK(std::abs(v) == doctest::Approx(0.25).epsilon(1e-12));
    // The DC-centred convention makes the spectrum of a centred impulse real.
    CHECK(std::abs(v.imag()) < 1e-12);
  }
}

TEST_CASE("ifft2c of zeros and linearity")
{
  ComplexImage zeros(8, 6);
  for (const auto &v : ifft2c(zeros).data) {
    CHECK(v == cx(0.0));
  }
  auto k1 = random_image(12, 10, 1);
  auto k2 = random_image(12, 10, 2);
  cx const a(0.3, -1.7);
  ComplexImage mix(12, 10);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix.data[i] = a * k1.data[i] + k2.data[i];
  }
  auto lhs = ifft2c(mix);
  auto i1 = ifft2c(k1);
  auto i2 = ifft2c(k2);
  ComplexImage rhs(12, 10);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    rhs.data[i] = a * i1.data[i] + i2.data[i];
  }
  CHECK(rel_diff(lhs, rhs) < 1e-6);
}

TEST_CASE("fft rejects non-finite input")
{
  auto x = random_image(4, 4, 3);
  x(1, 1) = cx(std::nan(""), 0.0);
  expect_code(ErrorCode::InvalidData, [&] { fft2c(x); });
  x(1, 1) = cx(0.0, INFINITY);
  expect_code(ErrorCode::InvalidData, [&] { ifft2c(x); });
}

TEST_CASE("rss_combine")
{
  SUBCASE("single coil 3+4i gives 5")
  {
    CoilImages c(1, 3, 3);
    std::fill(c.data.begin(), c.data.end(), cx(3.0, 4.0));
    for (double v : rss_combine(c).data) {
      CHECK(v == 5.0);
    }
  }
  SUBCASE("two coils 3 and 4 give 5")
  {
    CoilImages c(2, 2, 5);
    std::fill(c.coil(0).begin(), c.coil(0).end(), cx(3.0));
    std::fill(c.coil(1).begin(), c.coil(1).end(), cx(0.0, 4.0));
    for (double v : rss_combine(c).data) {
      CHECK(v == 5.0);
    }
  }
  SUBCASE("15 random coils match a scalar loop")
  {
    SplitMix64 rng(99);
    CoilImages c(15, 20, 24);
    for (auto &v : c.data) {
      v = cx(rng.normal(), rng.normal());
    }
    auto out = rss_combine(c);
    for (std::size_t y = 0; y < 20; ++y) {
      for (std::size_t x = 0; x < 24; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 15; ++k) {
          cx v = c.data[k * 20 * 24 + y * 24 + x];
          acc += v.real() * v.real() + v.imag() * v.imag();
        }
        CHECK(std::abs(out(y, x) - std::sqrt(acc)) < 1e-9);
      }
    }
  }
  SUBCASE("empty coil axis")
  {
    expect_code(ErrorCode::InvalidData, [] { rss_combine(CoilImages(0, 4, 4)); });
  }
}

TEST_CASE("center_crop")
{
  RealImage ramp(6, 6);
  for (std::size_t y = 0; y < 6; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      ramp(y, x) = 10.0 * y + x;
    }
  }
  SUBCASE("own size is identity")
  {
    CHECK(center_crop(ramp, 6, 6).data == ramp.data);
  }
  SUBCASE("6x6 to 4x4 keeps rows and cols 1..4")
  {
    auto c = center_crop(ramp, 4, 4);
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x = 0; x < 4; ++x) {
        CHECK(c(y, x) == 10.0 * (y + 1) + (x + 1));
      }
    }
  }
  SUBCASE("odd margin drops the extra line on the high side")
  {
    auto c = center_crop(ramp, 5, 3);
    CHECK(c(0, 0) == 0.0 * 10 + 1.0);
    CHECK(c(4, 2) == 40.0 + 3.0);
  }
  SUBCASE("640x368 to 320x320")
  {
    RealImage big(640, 368);
    auto c = center_crop(big);
    CHECK(c.height == 320);
    CHECK(c.width == 320);
  }
  SUBCASE("too large")
  {
    expect_code(ErrorCode::InvalidCropSize, [&] { center_crop(ramp, 7, 4); });
    expect_code(ErrorCode::InvalidCropSize, [&] { center_crop(ramp, 4, 7); });
  }
  SUBCASE("two crops compose when the margins are not both odd")
  {
    SplitMix64 rng(5);
    RealImage img(41, 37);
    for (auto &v : img.data) {
      v = rng.uniform();
    }
    for (int trial = 0; trial < 200; ++trial) {
      std::size_t const h1 = 1 + rng.below(41);
      std::size_t const h2 = 1 + rng.below(h1);
      std::size_t const w1 = 1 + rng.below(37);
      std::size_t const w2 = 1 + rng.below(w1);
      bool const both_odd_h = (41 - h1) % 2 == 1 && (h1 - h2) % 2 == 1;
      bool const both_odd_w = (37 - w1) % 2 == 1 && (w1 - w2) % 2 == 1;
      auto twice = center_crop(center_crop(img, h1, w1), h2, w2);
      CHECK(twice.height == h2);
      CHECK(twice.width == w2);
      if (!both_odd_h && !both_odd_w) {
        CHECK(twice.data == center_crop(img, h2, w2).data);
      }
    }
  }
}

TEST_CASE("virtual single coil")
{
  SUBCASE("a zero coil contributes nothing")
  {
    auto base = random_volume(2, 3, 16, 12, 11);
    KSpaceVolume padded(2, 4, 16, 12);
    padded.attrs = base.attrs;
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t c = 0; c < 3; ++c) {
        auto src = base.coil(s, c);
        std::copy(src.begin(), src.end(), padded.coil(s, c < 1 ? c : c + 1).begin());
      }
    }
    auto fit_base = fit_virtual_coil(base);
    auto fit_padded = fit_virtual_coil(padded);
    CHECK(std::abs(fit_padded.weights[1]) < 1e-9);
    CHECK(std::abs(fit_padded.weights[0] - fit_base.weights[0]) < 1e-9);
    CHECK(std::abs(fit_padded.weights[2] - fit_base.weights[1]) < 1e-9);
    CHECK(std::abs(fit_padded.weights[3] - fit_base.weights[2]) < 1e-9);
    CHECK(fit_padded.rank == 3);

    auto a = virtual_single_coil(base);
    auto b = virtual_single_coil(padded);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      CHECK(std::abs(cx(a.data[i]) - cx(b.data[i])) <= 1e-6 * (1.0 + std::abs(cx(a.data[i]))));
    }
  }
  SUBCASE("two identical coils reproduce RSS = sqrt(2)|img|")
  {
    auto one = random_volume(1, 1, 10, 10, 21);
    KSpaceVolume two(1, 2, 10, 10);
    two.attrs = one.attrs;
    std::copy(one.data.begin(), one.data.end(), two.coil(0, 0).begin());
    std::copy(one.data.begin(), one.data.end(), two.coil(0, 1).begin());
    auto fit = fit_virtual_coil(two);
    // One effective unknown: w1 + w2 = sqrt(2) in closed form.
    CHECK(std::abs(fit.weights[0] + fit.weights[1] - std::sqrt(2.0)) < 1e-6);
    CHECK(fit.rank == 1);
    auto vsc = virtual_single_coil(two);
    auto img_one = ifft2c(one.slice(0)).coil_image(0);
    auto img_vsc = ifft2c(vsc.slice(0)).coil_image(0);
    for (std::size_t i = 0; i < img_one.size(); ++i) {
      CHECK(std::abs(std::abs(img_vsc.data[i]) - std::sqrt(2.0) * std::abs(img_one.data[i])) <
            1e-5 * (1.0 + std::abs(img_one.data[i])));
    }
  }
  SUBCASE("weights are recorded and a single coil input is rejected")
  {
    auto vol = random_volume(1, 4, 8, 8, 31);
    auto vsc = virtual_single_coil(vol);
    CHECK(vsc.ncoils == 1);
    REQUIRE(vsc.attrs.extra.contains("vsc_weights"));
    CHECK(vsc.attrs.extra["vsc_weights"].size() == 4);
    expect_code(ErrorCode::InvalidArgument, [] { virtual_single_coil(random_volume(1, 1, 8, 8, 1)); });
  }
  SUBCASE("all-zero input falls back to dominant-vector weights")
  {
    KSpaceVolume zero(1, 3, 8, 8);
    zero.attrs.case_id = "z";
    auto fit = fit_virtual_coil(zero);
    CHECK(fit.degenerate);
    CHECK(virtual_single_coil(zero).attrs.extra["vsc_fit_degenerate"].get<bool>());
  }
}

TEST_CASE("KSB1 container")
{
  auto dir = std::filesystem::temp_directory_path() / "mrbench_test_container";
  std::filesystem::create_directories(dir);

  CaseFile file;
  file.kspace = random_volume(3, 2, 9, 7, 41);
  file.attrs = file.kspace->attrs;
  MagnitudeVolume rss(3, 5, 4);
  SplitMix64 rng(3);
  for (auto &v : rss.data) {
    v = static_cast<float>(rng.uniform());
  }
  file.rss = rss;

  SUBCASE("round trip is bit exact")
  {
    auto path = dir / "rt.ksb";
    write_case(path, file);
    auto back = read_case(path);
    REQUIRE(back.kspace);
    REQUIRE(back.rss);
    CHECK(std::memcmp(back.kspace->data.data(), file.kspace->data.data(), file.kspace->data.size() * 8) == 0);
    CHECK(std::memcmp(back.rss->data.data(), file.rss->data.data(), file.rss->data.size() * 4) == 0);
    CHECK(back.attrs == file.attrs);
    CHECK(back.kspace->attrs == file.attrs);
    CHECK(encode_case(back) == encode_case(file));
  }
  SUBCASE("layout matches the documented byte format")
  {
    auto bytes = encode_case(file);
    CHECK(std::memcmp(bytes.data(), "KSB1\r\n", 6) == 0);
    std::uint32_t hlen = bytes[6] | (bytes[7] << 8) | (bytes[8] << 16) | (bytes[9] << 24);
    auto header = Json::parse(bytes.begin() + 10, bytes.begin() + 10 + hlen);
    CHECK(header["arrays"][0]["name"] == "kspace");
    CHECK(header["arrays"][0]["dtype"] == "c64");
    CHECK(header["arrays"][1]["name"] == "reconstruction_rss");
    CHECK(header["attrs"]["contrast"] == "PDFS");
    std::size_t const payload = 3 * 2 * 9 * 7 * 8 + 3 * 5 * 4 * 4;
    CHECK(bytes.size() == 10 + hlen + payload);
    // First k-space sample, real part, little-endian float32.
    float re = 0.0f;
    std::uint32_t raw = bytes[10 + hlen] | (bytes[11 + hlen] << 8) | (bytes[12 + hlen] << 16) |
                        (static_cast<std::uint32_t>(bytes[13 + hlen]) << 24);
    std::memcpy(&re, &raw, 4);
    CHECK(re == file.kspace->data[0].real());
  }
  SUBCASE("wrong magic")
  {
    auto bytes = encode_case(file);
    bytes[3] = '2';
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(bytes); });
  }
  SUBCASE("header declaring 10 slices over an 8-slice payload")
  {
    CaseFile eight;
    eight.kspace = random_volume(8, 1, 4, 4, 5);
    eight.attrs = eight.kspace->attrs;
    auto bytes = encode_case(eight);
    std::uint32_t hlen = bytes[6] | (bytes[7] << 8) | (bytes[8] << 16) | (bytes[9] << 24);
    std::string header(bytes.begin() + 10, bytes.begin() + 10 + hlen);
    auto pos = header.find("[8,1,4,4]");
    REQUIRE(pos != std::string::npos);
    header.replace(pos, 9, "[10,1,4,4]");
    std::vector<std::uint8_t> forged(bytes.begin(), bytes.begin() + 6);
    std::uint32_t nh = static_cast<std::uint32_t>(header.size());
    for (int i = 0; i < 4; ++i) {
      forged.push_back(static_cast<std::uint8_t>(nh >> (8 * i)));
    }
    forged.insert(forged.end(), header.begin(), header.end());
    forged.insert(forged.end(), bytes.begin() + 10 + hlen, bytes.end());
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(forged); });
  }
  SUBCASE("truncations and trailing bytes")
  {
    auto bytes = encode_case(file);
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(std::span(bytes).first(8)); });
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(std::span(bytes).first(20)); });
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(std::span(bytes).first(bytes.size() - 1)); });
    bytes.push_back(0);
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(bytes); });
  }
  SUBCASE("malformed headers")
  {
    auto forge = [](const std::string &header) {
      std::vector<std::uint8_t> b(kContainerMagic, kContainerMagic + 6);
      std::uint32_t n = static_cast<std::uint32_t>(header.size());
      for (int i = 0; i < 4; ++i) {
        b.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
      }
      b.insert(b.end(), header.begin(), header.end());
      return b;
    };
    std::string const attrs = R"("attrs":{"case_id":"a","contrast":"PD","field_strength_tesla":3.0})";
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(forge("{not json")); });
    expect_code(ErrorCode::CorruptContainer, [&] { decode_case(forge("{" + attrs + "}")); });
    expect_code(ErrorCode::CorruptContainer, [&] {
      decode_case(forge(R"({"arrays":[{"name":"kspace","dtype":"i16","shape":[1,1,1,1]}],)" + attrs + "}"));
    });
    expect_code(ErrorCode::CorruptContainer, [&] {
      decode_case(forge(R"({"arrays":[{"name":"kspace","dtype":"f32","shape":[1,1,1,1]}],)" + attrs + "}"));
    });
    expect_code(ErrorCode::CorruptContainer, [&] {
      decode_case(forge(R"({"arrays":[{"name":"other","dtype":"f32","shape":[0]}],)" + attrs + "}"));
    });
    expect_code(ErrorCode::CorruptContainer, [&] {
      decode_case(forge(
          R"({"arrays":[],"attrs":{"case_id":"a","contrast":"T2","field_strength_tesla":3.0}})"));
    });
    expect_code(ErrorCode::CorruptContainer, [&] {
      decode_case(forge(
          R"({"arrays":[],"attrs":{"case_id":"a","contrast":"PD","field_strength_tesla":7.0}})"));
    });
    CHECK_NOTHROW(decode_case(forge(R"({"arrays":[],)" + attrs + "}")));
  }
  std::filesystem::remove_all(dir);
}
