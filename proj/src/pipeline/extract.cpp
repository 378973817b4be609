#include <algorithm>
#include <cmath>

#include "drf/parallel.hpp"
#include "drf/pipeline.hpp"

namespace drf::pipeline {

const std::array<std::string_view, kImmuneMarkerCount>& immune_marker_names() {
  static constexpr std::array<std::string_view, kImmuneMarkerCount> kNames = {
      "B Cells Memory",
      "B Cells Naive",
      "Dendritic Cells Activated",
      "Dendritic Cells Resting",
      "Eosinophils",
      "Macrophages M0",
      "Macrophages M1",
      "Macrophages M2",
      "Mast Cells Activated",
      "Mast Cells Resting",
      "Monocytes",
      "Neutrophils",
      "NK Cells Activated",
      "NK Cells Resting",
      "Plasma Cells",
      "T Cells CD4 Memory Activated",
      "T Cells CD4 Memory Resting",
      "T Cells CD4 Naive",
      "T Cells CD8",
      "T Cells Follicular Helper",
      "T Cells gamma delta",
      "T Cells Regulatory Tregs",
  };
  return kNames;
}

const std::array<std::string_view, kMetadataColumnCount>& metadata_column_names() {
  static constexpr std::array<std::string_view, kMetadataColumnCount> kNames = {
      "id", "age", "gender", "survival_days", "censorship", "survival_months"};
  return kNames;
}

void PipelineConfig::validate() const {
  if (levels < 2 || levels > 4096) throw ConfigError("levels must be in [2, 4096]");
  if (input_side < 2) throw ConfigError("CNN input side must be at least 2");
  if (layers.empty()) throw ConfigError("at least one feature layer must be selected");
  for (int k : layers)
    if (k < 1) throw ConfigError("feature layers are 1-based");
  if (modalities.empty()) throw ConfigError("at least one modality must be selected");
  std::set<Modality> seen(modalities.begin(), modalities.end());
  if (seen.size() != modalities.size()) throw ConfigError("duplicate modality in configuration");
  if (!(target_mm > 0.0)) throw ConfigError("target spacing must be positive");
}

std::vector<Modality> ordered_modalities(const PipelineConfig& cfg) {
  std::vector<Modality> out;
  for (Modality m : kAllModalities)
    if (std::find(cfg.modalities.begin(), cfg.modalities.end(), m) != cfg.modalities.end()) out.push_back(m);
  return out;
}

ModalityBlock extract_modality_drf(const Volume& v, const RoiMask& m, const cnn::NetworkWeights& w,
                                   const PipelineConfig& cfg) {
  check_aligned(v, m);
  if (m.empty()) throw EmptyRoi("mask has no foreground voxels");

  auto [iso, iso_mask] = resample_isotropic(v, m, cfg.target_mm);
  if (iso_mask.empty()) throw EmptyRoi("mask vanished after isotropic resampling");
  const Volume unit = normalize_unit(iso);
  const cnn::CnnInput input = cnn::prepare_input(unit, iso_mask, cfg.input_side);
  const auto stacks = cnn::forward_activations(w, input.cube, input.mask, cfg.layers);

  texture::QuantifierVector sum{};
  std::size_t maps = 0;
  for (const auto& stack : stacks) {
    for (const auto& map : stack.maps) {
      const auto q = texture::compute_quantifiers(quantize(map, stack.mask, cfg.levels));
      for (std::size_t i = 0; i < q.size(); ++i) sum[i] += q[i];
      ++maps;
    }
  }
  if (maps == 0) throw LayerError("selected layers produced no activation maps");

  ModalityBlock out{};
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = sum[i] / static_cast<double>(maps);
  const auto shape = texture::shape_features(m, v.spacing);
  std::copy(shape.begin(), shape.end(), out.begin() + texture::kQuantifierCount);
  return out;
}

std::vector<std::string> drf_column_names(const std::vector<Modality>& modalities) {
  std::vector<std::string> names;
  for (Modality m : kAllModalities) {
    if (std::find(modalities.begin(), modalities.end(), m) == modalities.end()) continue;
    const std::string prefix = std::string(modality_label(m)) + "-";
    for (const auto& f : texture::quantifier_names()) names.push_back(prefix + std::string(f.name));
    for (const auto& f : texture::shape_names()) names.push_back(prefix + std::string(f.name));
  }
  return names;
}

DrfSignature extract_signature(const std::map<Modality, ModalityInput>& inputs, const cnn::NetworkWeights& w,
                               const PipelineConfig& cfg) {
  const auto modalities = ordered_modalities(cfg);
  DrfSignature sig;
  sig.names = drf_column_names(modalities);
  sig.values.reserve(sig.names.size());
  for (Modality m : modalities) {
    const auto it = inputs.find(m);
    if (it == inputs.end()) throw MissingModality(std::string("missing modality ") + std::string(modality_key(m)));
    const auto block = extract_modality_drf(it->second.volume, it->second.mask, w, cfg);
    for (std::size_t i = 0; i < block.size(); ++i) {
      if (!std::isfinite(block[i]))
        throw Error("non-finite feature " + sig.names[sig.values.size()] + " (" + std::to_string(block[i]) + ")");
      sig.values.push_back(block[i]);
    }
  }
  return sig;
}

std::string_view gender_name(Gender g) { return g == Gender::Male ? "male" : "female"; }

std::optional<Gender> parse_gender(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "female" || lower == "f") return Gender::Female;
  if (lower == "male" || lower == "m") return Gender::Male;
  return std::nullopt;
}

std::filesystem::path ManifestEntry::mask_for(Modality m) const {
  if (const auto it = masks.find(m); it != masks.end()) return it->second;
  if (mask) return *mask;
  throw ManifestError("patient " + id + ": no mask for modality " + std::string(modality_key(m)));
}

std::vector<std::string> FeatureTable::all_columns() const {
  std::vector<std::string> cols;
  for (auto n : metadata_column_names()) cols.emplace_back(n);
  for (auto n : immune_marker_names()) cols.emplace_back(n);
  cols.insert(cols.end(), drf_columns.begin(), drf_columns.end());
  return cols;
}

CohortResult run_cohort(const std::vector<ManifestEntry>& manifest, const cnn::NetworkWeights& w,
                        const PipelineConfig& cfg) {
  cfg.validate();
  if (manifest.empty()) throw ManifestError("manifest lists no patients");
  const auto modalities = ordered_modalities(cfg);

  std::vector<std::optional<PatientRecord>> rows(manifest.size());
  std::vector<std::string> errors(manifest.size());
  detail::parallel_for(manifest.size(), cfg.threads, [&](std::size_t i) {
    const ManifestEntry& e = manifest[i];
    try {
      std::map<Modality, ModalityInput> inputs;
      for (Modality m : modalities) {
        const auto it = e.images.find(m);
        if (it == e.images.end())
          throw MissingModality(std::string("no image for modality ") + std::string(modality_key(m)));
        Volume v = load_volume(it->second);
        v.modality = m;
        inputs.emplace(m, ModalityInput{std::move(v), load_mask(e.mask_for(m))});
      }
      PatientRecord r;
      r.id = e.id;
      r.age = e.age;
      r.gender = e.gender;
      r.survival_days = e.survival_days;
      r.censorship = e.censorship;
      r.immune = e.immune;
      r.drf = extract_signature(inputs, w, cfg);
      rows[i] = std::move(r);
    } catch (const std::exception& ex) {
      errors[i] = "patient " + e.id + " skipped: " + ex.what();
    }
  });

  CohortResult result;
  result.table.drf_columns = drf_column_names(modalities);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i])
      result.table.patients.push_back(std::move(*rows[i]));
    else
      result.warnings.push_back(errors[i]);
  }
  return result;
}

}  // namespace drf::pipeline
