#include "mrbench/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mrbench/error.hpp"

namespace mrb {

namespace {

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
  }
}

std::uint32_t get_u32(const std::uint8_t *p)
{
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<std::uint8_t> &out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

float get_f32(const std::uint8_t *p) { return std::bit_cast<float>(get_u32(p)); }

[[noreturn]] void corrupt(const std::string &why) { throw Error(ErrorCode::CorruptContainer, why); }

std::size_t checked_product(const std::vector<std::size_t> &shape)
{
  std::size_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > (std::size_t{1} << 40) / d) {
      corrupt("array shape is implausibly large");
    }
    n *= d;
  }
  return n;
}

} // namespace

std::vector<std::uint8_t> encode_case(const CaseFile &file)
{
  file.attrs.validate();
  Json arrays = Json::array();
  if (file.kspace) {
    const auto &k = *file.kspace;
    arrays.push_back({{"name", kKSpaceArray}, {"dtype", "c64"}, {"shape", {k.nslices, k.ncoils, k.height, k.width}}});
  }
  if (file.rss) {
    const auto &r = *file.rss;
    arrays.push_back({{"name", kRssArray}, {"dtype", "f32"}, {"shape", {r.nslices, r.height, r.width}}});
  }
  Json header = {{"arrays", arrays}, {"attrs", file.attrs.to_json()}};
  std::string const text = header.dump();

  std::vector<std::uint8_t> out(kContainerMagic, kContainerMagic + 6);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  if (file.kspace) {
    out.reserve(out.size() + file.kspace->data.size() * 8 + (file.rss ? file.rss->data.size() * 4 : 0));
    for (const auto &v : file.kspace->data) {
      put_f32(out, v.real());
      put_f32(out, v.imag());
    }
  }
  if (file.rss) {
    for (float v : file.rss->data) {
      put_f32(out, v);
    }
  }
  return out;
}

CaseFile decode_case(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kContainerMagic, 6) != 0) {
    corrupt("bad magic");
  }
  std::size_t const hlen = get_u32(bytes.data() + 6);
  if (bytes.size() - 10 < hlen) {
    corrupt("truncated header");
  }
  Json header;
  try {
    header = Json::parse(bytes.begin() + 10, bytes.begin() + 10 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const Json::exception &e) {
    corrupt(std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("arrays") || !header["arrays"].is_array() ||
      !header.contains("attrs")) {
    corrupt("header lacks arrays/attrs");
  }

  CaseFile file;
  try {
    file.attrs = CaseAttrs::from_json(header["attrs"]);
  } catch (const Error &e) {
    corrupt("bad attrs: " + e.detail());
  }

  std::size_t offset = 10 + hlen;
  for (const auto &desc : header["arrays"]) {
    std::string name;
    std::string dtype;
    std::vector<std::size_t> shape;
    try {
      name = desc.at("name").get<std::string>();
      dtype = desc.at("dtype").get<std::string>();
      shape = desc.at("shape").get<std::vector<std::size_t>>();
    } catch (const Json::exception &e) {
      corrupt(std::string("bad array descriptor: ") + e.what());
    }
    std::size_t const count = checked_product(shape);
    std::size_t const elem = dtype == "c64" ? 8 : dtype == "f32" ? 4 : 0;
    if (elem == 0) {
      corrupt("unknown dtype '" + dtype + "'");
    }
    if (bytes.size() - offset < count * elem) {
      corrupt("payload shorter than header declares for '" + name + "'");
    }
    const std::uint8_t *p = bytes.data() + offset;
    if (name == kKSpaceArray) {
      if (dtype != "c64" || shape.size() != 4 || file.kspace) {
        corrupt("kspace must appear once as a 4-D c64 array");
      }
      KSpaceVolume k(shape[0], shape[1], shape[2], shape[3]);
      for (std::size_t i = 0; i < count; ++i) {
        k.data[i] = cxf(get_f32(p + 8 * i), get_f32(p + 8 * i + 4));
      }
      k.attrs = file.attrs;
      file.kspace = std::move(k);
    } else if (name == kRssArray) {
      if (dtype != "f32" || shape.size() != 3 || file.rss) {
        corrupt("reconstruction_rss must appear once as a 3-D f32 array");
      }
      MagnitudeVolume r(shape[0], shape[1], shape[2]);
      for (std::size_t i = 0; i < count; ++i) {
        r.data[i] = get_f32(p + 4 * i);
      }
      r.attrs = file.attrs;
      file.rss = std::move(r);
    } else {
      corrupt("unknown array '" + name + "'");
    }
    offset += count * elem;
  }
  if (offset != bytes.size()) {
    corrupt("payload length " + std::to_string(bytes.size() - 10 - hlen) + " does not match header");
  }
  return file;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoError, "short write to " + path.string());
  }
}

void write_case(const std::filesystem::path &path, const CaseFile &file) { write_bytes(path, encode_case(file)); }

CaseFile read_case(const std::filesystem::path &path) { return decode_case(read_bytes(path)); }

} // namespace mrb
