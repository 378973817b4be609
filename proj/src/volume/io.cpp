#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "drf/volume.hpp"

namespace drf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kNiftiHeaderSize = 348;
constexpr std::size_t kNiftiDataOffset = 352;

std::vector<unsigned char> read_all_gz(const fs::path& path) {
  // gzread passes uncompressed files through unchanged.
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw CorruptFile("cannot open " + path.string());
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      int errnum = 0;
      std::string msg = gzerror(f, &errnum);
      gzclose(f);
      throw CorruptFile("read error in " + path.string() + ": " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

template <class T>
T read_le(const unsigned char* p) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> b{};
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = p[i];
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

template <class T>
void write_le(unsigned char* p, T v) {
  std::array<unsigned char, sizeof(T)> b{};
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  std::memcpy(p, b.data(), sizeof(T));
}

std::size_t dtype_bytes(NiftiDtype t) {
  switch (t) {
    case NiftiDtype::UInt8: return 1;
    case NiftiDtype::Int16: return 2;
    case NiftiDtype::Float32: return 4;
  }
  return 0;
}

std::optional<NiftiDtype> nifti_dtype_from_code(int code) {
  switch (code) {
    case 2: return NiftiDtype::UInt8;
    case 4: return NiftiDtype::Int16;
    case 16: return NiftiDtype::Float32;
    default: return std::nullopt;
  }
}

std::optional<NiftiDtype> raw_dtype_from_name(const std::string& name) {
  if (name == "u8") return NiftiDtype::UInt8;
  if (name == "i16") return NiftiDtype::Int16;
  if (name == "f32") return NiftiDtype::Float32;
  return std::nullopt;
}

std::string raw_dtype_name(NiftiDtype t) {
  switch (t) {
    case NiftiDtype::UInt8: return "u8";
    case NiftiDtype::Int16: return "i16";
    case NiftiDtype::Float32: return "f32";
  }
  return "?";
}

std::vector<double> decode_voxels(const unsigned char* p, std::size_t count, NiftiDtype t) {
  std::vector<double> out(count);
  switch (t) {
    case NiftiDtype::UInt8:
      for (std::size_t i = 0; i < count; ++i) out[i] = p[i];
      break;
    case NiftiDtype::Int16:
      for (std::size_t i = 0; i < count; ++i) out[i] = read_le<std::int16_t>(p + 2 * i);
      break;
    case NiftiDtype::Float32:
      for (std::size_t i = 0; i < count; ++i) out[i] = read_le<float>(p + 4 * i);
      break;
  }
  return out;
}

void encode_voxels(unsigned char* p, const std::vector<double>& v, NiftiDtype t) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    switch (t) {
      case NiftiDtype::UInt8:
        p[i] = static_cast<unsigned char>(std::clamp(std::lround(v[i]), 0L, 255L));
        break;
      case NiftiDtype::Int16:
        write_le<std::int16_t>(p + 2 * i,
                               static_cast<std::int16_t>(std::clamp(std::lround(v[i]), -32768L, 32767L)));
        break;
      case NiftiDtype::Float32:
        write_le<float>(p + 4 * i, static_cast<float>(v[i]));
        break;
    }
  }
}

bool has_suffix(const std::string& s, std::string_view suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

bool looks_like_nifti(const fs::path& p) {
  const std::string s = p.filename().string();
  return has_suffix(s, ".nii") || has_suffix(s, ".nii.gz");
}

Volume read_nifti(const fs::path& path) {
  const auto bytes = read_all_gz(path);
  if (bytes.size() < kNiftiHeaderSize)
    throw CorruptFile(path.string() + ": file shorter than a NIfTI-1 header");
  const unsigned char* h = bytes.data();

  const auto sizeof_hdr = read_le<std::int32_t>(h);
  if (sizeof_hdr != static_cast<std::int32_t>(kNiftiHeaderSize)) {
    std::int32_t swapped = 0;
    std::array<unsigned char, 4> b{h[3], h[2], h[1], h[0]};
    std::memcpy(&swapped, b.data(), 4);
    if (swapped == static_cast<std::int32_t>(kNiftiHeaderSize))
      throw FormatError(path.string() + ": big-endian NIfTI is not supported");
    throw FormatError(path.string() + ": not a NIfTI-1 single-file image (sizeof_hdr=" +
                      std::to_string(sizeof_hdr) + ")");
  }
  if (std::memcmp(h + 344, "n+1", 3) != 0)
    throw FormatError(path.string() + ": only single-file NIfTI-1 ('n+1') is supported");

  std::array<std::int16_t, 8> dim{};
  for (int i = 0; i < 8; ++i) dim[i] = read_le<std::int16_t>(h + 40 + 2 * i);
  const int ndim = dim[0];
  if (ndim < 1 || ndim > 7) throw CorruptFile(path.string() + ": invalid dim[0]");
  auto extent = [&](int axis) -> std::size_t {
    if (axis > ndim) return 1;
    if (dim[axis] < 1) throw CorruptFile(path.string() + ": non-positive dimension");
    return static_cast<std::size_t>(dim[axis]);
  };
  for (int axis = 4; axis <= ndim; ++axis)
    if (extent(axis) != 1) throw FormatError(path.string() + ": multi-volume NIfTI is not supported");
  const Dims dims{extent(1), extent(2), extent(3)};

  const int code = read_le<std::int16_t>(h + 70);
  const auto dtype = nifti_dtype_from_code(code);
  if (!dtype) throw FormatError(path.string() + ": unsupported NIfTI datatype " + std::to_string(code));

  Spacing sp{};
  double* sp_fields[3] = {&sp.sx, &sp.sy, &sp.sz};
  for (int i = 0; i < 3; ++i) {
    const double v = std::fabs(read_le<float>(h + 76 + 4 * (i + 1)));
    *sp_fields[i] = (i + 1 <= ndim) ? v : 1.0;
    if (!(*sp_fields[i] > 0.0) || !std::isfinite(*sp_fields[i]))
      throw CorruptFile(path.string() + ": non-positive voxel spacing");
  }

  const float vox_offset_f = read_le<float>(h + 108);
  if (!(vox_offset_f >= static_cast<float>(kNiftiHeaderSize)))
    throw CorruptFile(path.string() + ": vox_offset points inside the header");
  const auto offset = static_cast<std::size_t>(vox_offset_f);
  const std::size_t need = dims.count() * dtype_bytes(*dtype);
  if (bytes.size() < offset || bytes.size() - offset < need)
    throw CorruptFile(path.string() + ": expected " + std::to_string(need) + " voxel bytes for " +
                      to_string(dims) + ", found " +
                      std::to_string(bytes.size() > offset ? bytes.size() - offset : 0));

  std::vector<double> data = decode_voxels(bytes.data() + offset, dims.count(), *dtype);
  const double slope = read_le<float>(h + 112);
  const double inter = read_le<float>(h + 116);
  if (slope != 0.0 && std::isfinite(slope)) {
    const double b = std::isfinite(inter) ? inter : 0.0;
    for (double& v : data) v = v * slope + b;
  }
  return Volume{Grid3<double>(dims, std::move(data)), sp, Modality::T1WI};
}

fs::path sidecar_for(const fs::path& raw) {
  fs::path appended = raw;
  appended += ".json";
  if (fs::exists(appended)) return appended;
  fs::path replaced = raw;
  replaced.replace_extension(".json");
  return replaced;
}

Volume read_raw(const fs::path& path) {
  const fs::path side = sidecar_for(path);
  std::ifstream js(side);
  if (!js) throw FormatError(path.string() + ": raw volume has no JSON sidecar (" + side.string() + ")");
  json meta;
  try {
    js >> meta;
  } catch (const json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }

  Dims dims;
  Spacing sp;
  std::string dtype_name;
  try {
    const auto d = meta.at("dims").get<std::vector<long>>();
    const auto s = meta.at("spacing").get<std::vector<double>>();
    if (d.size() != 3 || s.size() != 3) throw FormatError(side.string() + ": dims/spacing need 3 entries");
    for (long v : d)
      if (v < 1) throw CorruptFile(side.string() + ": dims must be >= 1");
    for (double v : s)
      if (!(v > 0.0)) throw CorruptFile(side.string() + ": spacing must be > 0");
    dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
    sp = {s[0], s[1], s[2]};
    dtype_name = meta.at("dtype").get<std::string>();
    if (meta.contains("order") && meta["order"].get<std::string>() != "x-fastest")
      throw FormatError(side.string() + ": only x-fastest voxel order is supported");
  } catch (const json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
  const auto dtype = raw_dtype_from_name(dtype_name);
  if (!dtype) throw FormatError(side.string() + ": unsupported dtype '" + dtype_name + "'");

  const auto bytes = read_all_gz(path);
  const std::size_t need = dims.count() * dtype_bytes(*dtype);
  if (bytes.size() != need)
    throw CorruptFile(path.string() + ": " + std::to_string(bytes.size()) + " bytes but " +
                      to_string(dims) + " " + dtype_name + " needs " + std::to_string(need));
  return Volume{Grid3<double>(dims, decode_voxels(bytes.data(), dims.count(), *dtype)), sp,
                Modality::T1WI};
}

void write_file(const fs::path& path, const std::vector<unsigned char>& bytes) {
  if (has_suffix(path.filename().string(), ".gz")) {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (!f) throw Error("cannot write " + path.string());
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw Error("short write to " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace

Volume load_volume(const fs::path& path, VolumeFormat format) {
  if (!fs::exists(path)) throw CorruptFile("no such file: " + path.string());
  if (format == VolumeFormat::Auto) format = looks_like_nifti(path) ? VolumeFormat::Nifti : VolumeFormat::RawJson;
  return format == VolumeFormat::Nifti ? read_nifti(path) : read_raw(path);
}

RoiMask load_mask(const fs::path& path, VolumeFormat format) {
  const Volume v = load_volume(path, format);
  RoiMask m{Grid3<std::uint8_t>(v.dims())};
  for (std::size_t i = 0; i < v.grid.size(); ++i) m.grid[i] = v.grid[i] != 0.0 ? 1 : 0;
  return m;
}

void save_nifti(const fs::path& path, const Grid3<double>& grid, const Spacing& spacing, NiftiDtype dtype) {
  const auto& d = grid.dims();
  if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767) throw FormatError("dimension too large for NIfTI-1");
  std::vector<unsigned char> bytes(kNiftiDataOffset + grid.size() * dtype_bytes(dtype), 0);
  unsigned char* h = bytes.data();
  write_le<std::int32_t>(h, static_cast<std::int32_t>(kNiftiHeaderSize));
  const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                                        static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) write_le<std::int16_t>(h + 40 + 2 * i, dim[i]);
  write_le<std::int16_t>(h + 70, static_cast<std::int16_t>(dtype));
  write_le<std::int16_t>(h + 72, static_cast<std::int16_t>(8 * dtype_bytes(dtype)));
  const std::array<float, 8> pixdim{1.0f, static_cast<float>(spacing.sx), static_cast<float>(spacing.sy),
                                    static_cast<float>(spacing.sz), 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) write_le<float>(h + 76 + 4 * i, pixdim[i]);
  write_le<float>(h + 108, static_cast<float>(kNiftiDataOffset));
  write_le<float>(h + 112, 0.0f);
  write_le<float>(h + 116, 0.0f);
  h[123] = 2;  // xyzt_units: mm
  std::memcpy(h + 344, "n+1\0", 4);
  encode_voxels(h + kNiftiDataOffset, grid.data(), dtype);
  write_file(path, bytes);
}

void save_raw(const fs::path& raw_path, const Grid3<double>& grid, const Spacing& spacing, NiftiDtype dtype) {
  std::vector<unsigned char> bytes(grid.size() * dtype_bytes(dtype));
  encode_voxels(bytes.data(), grid.data(), dtype);
  write_file(raw_path, bytes);
  const auto& d = grid.dims();
  json meta = {{"dims", {d.nx, d.ny, d.nz}},
               {"spacing", {spacing.sx, spacing.sy, spacing.sz}},
               {"dtype", raw_dtype_name(dtype)},
               {"order", "x-fastest"}};
  fs::path side = raw_path;
  side.replace_extension(".json");
  std::ofstream out(side);
  if (!out) throw Error("cannot write " + side.string());
  out << meta.dump(2) << '\n';
}

}  // namespace drf
