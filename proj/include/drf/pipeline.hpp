#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "drf/cnn.hpp"
#include "drf/texture.hpp"
#include "drf/volume.hpp"

namespace drf::pipeline {

inline constexpr std::size_t kFeaturesPerModality = texture::kQuantifierCount + texture::kShapeCount;
inline constexpr std::size_t kImmuneMarkerCount = 22;
inline constexpr std::size_t kMetadataColumnCount = 6;

/// CIBERSORT cell types in the canonical column order.
const std::array<std::string_view, kImmuneMarkerCount>& immune_marker_names();

/// id, age, gender, survival_days, censorship, survival_months.
const std::array<std::string_view, kMetadataColumnCount>& metadata_column_names();

struct PipelineConfig {
  int levels = kDefaultLevels;
  int input_side = cnn::kDefaultInputSide;
  std::set<int> layers{1, 2};  // feature layers whose maps are averaged
  std::vector<Modality> modalities{kAllModalities.begin(), kAllModalities.end()};
  double target_mm = 1.0;
  unsigned threads = 0;

  /// Throws ConfigError on out-of-range values or duplicate modalities.
  void validate() const;
};

/// Modalities from `cfg` sorted into the fixed T1WI, T1CE, T2WI, FLAIR order.
std::vector<Modality> ordered_modalities(const PipelineConfig& cfg);

using ModalityBlock = std::array<double, kFeaturesPerModality>;

/// 41 quantifiers averaged over every selected activation map, then the 4 shape features of
/// the original mask.
ModalityBlock extract_modality_drf(const Volume& v, const RoiMask& m, const cnn::NetworkWeights& w,
                                   const PipelineConfig& cfg);

struct ModalityInput {
  Volume volume;
  RoiMask mask;
};

struct DrfSignature {
  std::vector<std::string> names;
  std::vector<double> values;
};

/// "<modality label>-<feature name>" for each configured modality in canonical order.
std::vector<std::string> drf_column_names(const std::vector<Modality>& modalities);

DrfSignature extract_signature(const std::map<Modality, ModalityInput>& inputs, const cnn::NetworkWeights& w,
                               const PipelineConfig& cfg);

enum class Gender { Female, Male };
std::string_view gender_name(Gender g);
/// Accepts "female"/"male"/"f"/"m" in any case.
std::optional<Gender> parse_gender(std::string_view s);

struct PatientRecord {
  std::string id;
  double age = 0.0;
  Gender gender = Gender::Female;
  double survival_days = 0.0;
  bool censorship = false;  // true = death observed
  std::array<double, kImmuneMarkerCount> immune{};
  DrfSignature drf;
};

struct ManifestEntry {
  std::string id;
  std::map<Modality, std::filesystem::path> images;
  std::optional<std::filesystem::path> mask;
  std::map<Modality, std::filesystem::path> masks;  // per-modality overrides
  double age = 0.0;
  Gender gender = Gender::Female;
  double survival_days = 0.0;
  bool censorship = false;
  std::array<double, kImmuneMarkerCount> immune{};

  std::filesystem::path mask_for(Modality m) const;
};

/// Parses the cohort manifest. Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
std::vector<ManifestEntry> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);

struct FeatureTable {
  std::vector<std::string> drf_columns;
  std::vector<PatientRecord> patients;

  std::vector<std::string> all_columns() const;
};

struct CohortResult {
  FeatureTable table;
  std::vector<std::string> warnings;
};

/// Extracts every patient; failures become warnings and their rows are dropped.
CohortResult run_cohort(const std::vector<ManifestEntry>& manifest, const cnn::NetworkWeights& w,
                        const PipelineConfig& cfg);

/// RFC-4180 CSV with the metadata, immune and DRF columns. Numbers use shortest round-trip form.
std::string format_feature_csv(const FeatureTable& t);
/// Throws IngestError on malformed input.
FeatureTable parse_feature_csv(std::string_view text);
FeatureTable read_feature_csv(const std::filesystem::path& path);

/// JSON column manifest: version plus {index, name, group} per CSV column.
std::string column_manifest_json(const FeatureTable& t);

/// Writes via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string format_double(double v);

// CSV primitives, exposed for tests.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

struct SynthConfig {
  std::size_t patients = 120;
  int side = 24;  // voxels per axis before resampling
  Spacing spacing{1.0, 1.0, 1.5};
  std::uint64_t seed = 1;
  bool gzip = true;
  /// Scales the planted texture difference between survival groups; 0 removes it.
  double signal = 1.0;
};

struct SynthPatient {
  std::string id;
  int group = 0;  // 1 = long survival
};

/// Writes volumes, masks and manifest.json into `dir`; returns the generated patients.
std::vector<SynthPatient> generate_synthetic_cohort(const std::filesystem::path& dir, const SynthConfig& cfg);

}  // namespace drf::pipeline
