#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "drf/pipeline.hpp"
#include "json.hpp"

namespace drf::pipeline {

namespace {

// 3x3x3 mean filter with edge clamping.
Grid3<double> box_blur(const Grid3<double>& g) {
  const Dims d = g.dims();
  Grid3<double> out(d, 0.0);
  const long nx = static_cast<long>(d.nx), ny = static_cast<long>(d.ny), nz = static_cast<long>(d.nz);
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long x = 0; x < nx; ++x) {
        double s = 0.0;
        for (long dz = -1; dz <= 1; ++dz)
          for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
              const long xx = std::clamp(x + dx, 0L, nx - 1), yy = std::clamp(y + dy, 0L, ny - 1),
                         zz = std::clamp(z + dz, 0L, nz - 1);
              s += g(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy), static_cast<std::size_t>(zz));
            }
        out(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)) = s / 27.0;
      }
  return out;
}

void standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

struct ModalityContrast {
  double background;
  double tumour;
  double spread;
};

constexpr std::array<ModalityContrast, 4> kContrast = {{
    {300.0, 420.0, 90.0},   // T1WI: tumour mildly hyperintense
    {300.0, 750.0, 160.0},  // T1CE: enhancing rim
    {350.0, 820.0, 140.0},  // T2WI
    {320.0, 700.0, 120.0},  // FLAIR
}};

}  // namespace

std::vector<SynthPatient> generate_synthetic_cohort(const std::filesystem::path& dir, const SynthConfig& cfg) {
  if (cfg.patients < 2) throw ConfigError("synthetic cohort needs at least 2 patients");
  if (cfg.side < 8) throw ConfigError("synthetic volume side must be at least 8 voxels");
  std::filesystem::create_directories(dir / "img");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<int> groups(cfg.patients, 0);
  for (std::size_t i = 0; i < cfg.patients / 2; ++i) groups[i] = 1;
  std::shuffle(groups.begin(), groups.end(), rng);

  const Dims dims{static_cast<std::size_t>(cfg.side), static_cast<std::size_t>(cfg.side),
                  std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(cfg.side * cfg.spacing.sx / cfg.spacing.sz)))};
  const std::string ext = cfg.gzip ? ".nii.gz" : ".nii";

  nlohmann::json manifest = nlohmann::json::array();
  std::vector<SynthPatient> out;
  for (std::size_t p = 0; p < cfg.patients; ++p) {
    std::ostringstream id_stream;
    id_stream << "SYN-" << std::setw(4) << std::setfill('0') << p + 1;
    const std::string id = id_stream.str();
    const int group = groups[p];

    // Survival: short group dies early; long group dies late or is censored late, so
    // imputation never moves a censored subject below the long-group range.
    double days = group == 1 ? 600.0 + 900.0 * unit(rng) : 90.0 + 360.0 * unit(rng);
    bool death = true;
    if (group == 1 && unit(rng) < 0.25) {
      death = false;
      days = 600.0 + (days - 600.0) * unit(rng);
    }
    days = std::round(days);

    // Ellipsoidal tumour with a random centre offset.
    const double ext_x = dims.nx * cfg.spacing.sx, ext_y = dims.ny * cfg.spacing.sy, ext_z = dims.nz * cfg.spacing.sz;
    const double rx = ext_x * (0.22 + 0.1 * unit(rng)), ry = ext_y * (0.22 + 0.1 * unit(rng)),
                 rz = ext_z * (0.22 + 0.1 * unit(rng));
    const double cx = ext_x * (0.5 + 0.06 * (unit(rng) - 0.5)), cy = ext_y * (0.5 + 0.06 * (unit(rng) - 0.5)),
                 cz = ext_z * (0.5 + 0.06 * (unit(rng) - 0.5));
    Grid3<double> mask(dims, 0.0);
    for (std::size_t z = 0; z < dims.nz; ++z)
      for (std::size_t y = 0; y < dims.ny; ++y)
        for (std::size_t x = 0; x < dims.nx; ++x) {
          const double px = (x + 0.5) * cfg.spacing.sx - cx, py = (y + 0.5) * cfg.spacing.sy - cy,
                       pz = (z + 0.5) * cfg.spacing.sz - cz;
          if (px * px / (rx * rx) + py * py / (ry * ry) + pz * pz / (rz * rz) <= 1.0) mask(x, y, z) = 1.0;
        }

    // Texture field: blend of white noise and twice-blurred noise. Long survivors get the
    // smoother texture; `signal` scales the separation.
    Grid3<double> white(dims, 0.0);
    for (std::size_t i = 0; i < white.size(); ++i) white[i] = normal(rng);
    Grid3<double> smooth = box_blur(box_blur(white));
    std::vector<double> w = white.data(), s = smooth.data();
    standardize(w);
    standardize(s);
    const double centre_blend = 0.5 + (group == 1 ? 0.4 : -0.4) * cfg.signal;
    const double blend = std::clamp(centre_blend + 0.1 * (unit(rng) - 0.5), 0.0, 1.0);
    std::vector<double> field(w.size());
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = (1.0 - blend) * w[i] + blend * s[i];
    standardize(field);

    nlohmann::json entry;
    entry["id"] = id;
    for (std::size_t mi = 0; mi < kAllModalities.size(); ++mi) {
      const Modality m = kAllModalities[mi];
      const auto& c = kContrast[mi];
      Grid3<double> img(dims, 0.0);
      for (std::size_t i = 0; i < img.size(); ++i) {
        const double noise = 8.0 * normal(rng);
        img[i] = mask[i] > 0.0 ? c.tumour + c.spread * field[i] + noise : c.background + 20.0 * s[i] + noise;
      }
      const std::string file = "img/" + id + "_" + std::string(modality_key(m)) + ext;
      save_nifti(dir / file, img, cfg.spacing, NiftiDtype::Float32);
      entry[std::string(modality_key(m))] = file;
    }
    const std::string mask_file = "img/" + id + "_mask" + ext;
    save_nifti(dir / mask_file, mask, cfg.spacing, NiftiDtype::UInt8);
    entry["mask"] = mask_file;

    entry["age"] = std::round(30.0 + 50.0 * unit(rng));
    entry["gender"] = unit(rng) < 0.5 ? "female" : "male";
    entry["survival_days"] = days;
    entry["censored"] = death ? 1 : 0;

    // Immune fractions: normalized exponential draws, with Macrophages M2 enriched in the
    // short-survival group.
    const auto& names = immune_marker_names();
    std::array<double, kImmuneMarkerCount> frac{};
    double total = 0.0;
    for (std::size_t k = 0; k < frac.size(); ++k) {
      frac[k] = -std::log(1.0 - unit(rng));
      if (names[k] == "Macrophages M2" && group == 0) frac[k] *= 1.0 + 2.0 * cfg.signal;
      total += frac[k];
    }
    nlohmann::json immune = nlohmann::json::object();
    for (std::size_t k = 0; k < frac.size(); ++k) immune[std::string(names[k])] = frac[k] / total;
    entry["immune"] = std::move(immune);

    manifest.push_back(std::move(entry));
    out.push_back({id, group});
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return out;
}

}  // namespace drf::pipeline
