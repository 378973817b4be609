#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "drf/cnn.hpp"

namespace drf::cnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'R', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

enum class Kind : std::uint32_t { Conv3d = 0, Relu = 1, MaxPool = 2 };

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  int shape_int() {
    const std::uint32_t v = u32();
    if (v > (1u << 24)) throw WeightFormatError("implausible shape value " + std::to_string(v));
    return static_cast<int>(v);
  }
  void floats(std::vector<float>& out, std::size_t n) {
    if (n > (n_ - pos_) / 4) throw WeightFormatError("weight blob truncated");
    out.resize(n);
    for (auto& x : out) x = f32();
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw WeightFormatError("weight file truncated");
  }
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const unsigned char* p, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(c, p, static_cast<uInt>(n)));
}

constexpr std::string_view kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<unsigned char>& in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < in.size(); i += 3) {
    std::uint32_t v = static_cast<std::uint32_t>(in[i]) << 16;
    if (i + 1 < in.size()) v |= static_cast<std::uint32_t>(in[i + 1]) << 8;
    if (i + 2 < in.size()) v |= in[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < in.size() ? kB64[(v >> 6) & 63] : '=';
    out += i + 2 < in.size() ? kB64[v & 63] : '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& in) {
  std::array<int, 256> table{};
  table.fill(-1);
  for (std::size_t i = 0; i < kB64.size(); ++i) table[static_cast<unsigned char>(kB64[i])] = static_cast<int>(i);
  std::vector<unsigned char> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char ch : in) {
    if (ch == '=' || ch == '\n' || ch == '\r' || ch == ' ') continue;
    const int v = table[static_cast<unsigned char>(ch)];
    if (v < 0) throw WeightFormatError("invalid base64 character in weight manifest");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xffu));
    }
  }
  return out;
}

std::string floats_to_b64(const std::vector<float>& v) {
  Writer w;
  for (float x : v) w.f32(x);
  return base64_encode(w.bytes());
}

std::vector<float> b64_to_floats(const std::string& s) {
  const auto bytes = base64_decode(s);
  if (bytes.size() % 4 != 0) throw WeightFormatError("base64 blob is not a whole number of float32 values");
  Reader r(bytes.data(), bytes.size());
  std::vector<float> out;
  r.floats(out, bytes.size() / 4);
  return out;
}

NetworkWeights from_json(const json& j) {
  NetworkWeights w;
  try {
    if (j.value("format", std::string{}) != "DRF1") throw WeightFormatError("weight manifest format must be \"DRF1\"");
    for (const auto& l : j.at("layers")) {
      const auto kind = l.at("kind").get<std::string>();
      if (kind == "conv3d") {
        Conv3d c;
        const auto k = l.at("kernel").get<std::vector<int>>();
        if (k.size() != 3) throw WeightFormatError("conv3d kernel needs 3 extents");
        c.kx = k[0];
        c.ky = k[1];
        c.kz = k[2];
        c.in_channels = l.at("in_channels").get<int>();
        c.out_channels = l.at("out_channels").get<int>();
        c.stride = l.value("stride", 1);
        c.padding = l.value("padding", 0);
        c.weights = b64_to_floats(l.at("weights").get<std::string>());
        c.biases = b64_to_floats(l.at("biases").get<std::string>());
        w.layers.emplace_back(std::move(c));
      } else if (kind == "relu") {
        w.layers.emplace_back(Relu{});
      } else if (kind == "maxpool") {
        w.layers.emplace_back(MaxPool{l.value("size", 2), l.value("stride", 2)});
      } else {
        throw WeightFormatError("unknown layer kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw WeightFormatError(std::string("weight manifest: ") + e.what());
  }
  w.validate();
  return w;
}

json to_json(const NetworkWeights& w) {
  json layers = json::array();
  for (const Layer& l : w.layers) {
    if (const auto* c = std::get_if<Conv3d>(&l)) {
      layers.push_back({{"kind", "conv3d"},
                        {"kernel", {c->kx, c->ky, c->kz}},
                        {"in_channels", c->in_channels},
                        {"out_channels", c->out_channels},
                        {"stride", c->stride},
                        {"padding", c->padding},
                        {"weights", floats_to_b64(c->weights)},
                        {"biases", floats_to_b64(c->biases)}});
    } else if (std::holds_alternative<Relu>(l)) {
      layers.push_back({{"kind", "relu"}});
    } else {
      const auto& p = std::get<MaxPool>(l);
      layers.push_back({{"kind", "maxpool"}, {"size", p.size}, {"stride", p.stride}});
    }
  }
  return {{"format", "DRF1"}, {"version", kVersion}, {"layers", layers}};
}

}  // namespace

std::vector<unsigned char> encode_weights(const NetworkWeights& w) {
  w.validate();
  Writer out;
  out.raw(kMagic.data(), kMagic.size());
  out.u32(kVersion);
  out.u32(static_cast<std::uint32_t>(w.layers.size()));
  for (const Layer& l : w.layers) {
    if (const auto* c = std::get_if<Conv3d>(&l)) {
      out.u32(static_cast<std::uint32_t>(Kind::Conv3d));
      for (int v : {c->kx, c->ky, c->kz, c->in_channels, c->out_channels, c->stride, c->padding})
        out.u32(static_cast<std::uint32_t>(v));
    } else if (std::holds_alternative<Relu>(l)) {
      out.u32(static_cast<std::uint32_t>(Kind::Relu));
    } else {
      const auto& p = std::get<MaxPool>(l);
      out.u32(static_cast<std::uint32_t>(Kind::MaxPool));
      out.u32(static_cast<std::uint32_t>(p.size));
      out.u32(static_cast<std::uint32_t>(p.stride));
    }
  }
  for (const Layer& l : w.layers) {
    const auto* c = std::get_if<Conv3d>(&l);
    if (!c) continue;
    for (float x : c->weights) out.f32(x);
    for (float x : c->biases) out.f32(x);
  }
  const std::uint32_t crc = crc_of(out.bytes().data(), out.bytes().size());
  out.u32(crc);
  return std::move(out.bytes());
}

NetworkWeights decode_weights(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
    throw WeightFormatError("missing DRF1 magic");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc_of(bytes.data(), body)) throw WeightFormatError("weight file CRC32 mismatch");

  Reader r(bytes.data() + 4, body - 4);
  if (const auto version = r.u32(); version != kVersion)
    throw WeightFormatError("unsupported weight format version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  if (count > 4096) throw WeightFormatError("implausible layer count");

  NetworkWeights w;
  for (std::uint32_t i = 0; i < count; ++i) {
    switch (static_cast<Kind>(r.u32())) {
      case Kind::Conv3d: {
        Conv3d c;
        c.kx = r.shape_int();
        c.ky = r.shape_int();
        c.kz = r.shape_int();
        c.in_channels = r.shape_int();
        c.out_channels = r.shape_int();
        c.stride = r.shape_int();
        c.padding = r.shape_int();
        w.layers.emplace_back(std::move(c));
        break;
      }
      case Kind::Relu: w.layers.emplace_back(Relu{}); break;
      case Kind::MaxPool: {
        MaxPool p;
        p.size = r.shape_int();
        p.stride = r.shape_int();
        w.layers.emplace_back(p);
        break;
      }
      default: throw WeightFormatError("unknown layer kind in layer table");
    }
  }
  for (Layer& l : w.layers) {
    auto* c = std::get_if<Conv3d>(&l);
    if (!c) continue;
    r.floats(c->weights, c->weight_count());
    r.floats(c->biases, static_cast<std::size_t>(c->out_channels));
  }
  if (r.pos() != body - 4) throw WeightFormatError("weight file has trailing bytes before the checksum");
  w.validate();
  return w;
}

NetworkWeights load_weights(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFormatError("cannot open weight file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t first = 0;
  while (first < bytes.size() && std::isspace(bytes[first])) ++first;
  if (first < bytes.size() && bytes[first] == '{') {
    try {
      return from_json(json::parse(bytes.begin(), bytes.end()));
    } catch (const json::exception& e) {
      throw WeightFormatError(path.string() + ": " + e.what());
    }
  }
  return decode_weights(bytes);
}

void save_weights(const fs::path& path, const NetworkWeights& w) {
  const auto bytes = encode_weights(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void save_weights_json(const fs::path& path, const NetworkWeights& w) {
  w.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(w).dump(1) << '\n';
}

}  // namespace drf::cnn
