#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drf/ml.hpp"
#include "drf/pipeline.hpp"
#include "drf/stats.hpp"

namespace drf::cli {

/// Feature-set combination over DRFs (R), clinical age + gender (C) and immune markers (I).
struct Combo {
  bool radiomic = false;
  bool clinical = false;
  bool immune = false;

  /// Canonical "R+C+I" style name.
  std::string name() const;
  bool operator==(const Combo&) const = default;
};

/// Comma-separated list of '+'-joined R/C/I tokens. Throws ConfigError on unknown or repeated tokens.
std::vector<Combo> parse_combos(std::string_view list);
inline constexpr std::string_view kDefaultCombos = "R,C,I,R+C,R+I,C+I,R+C+I";

/// Columns in R, C, I order with survival attached; labels are derived per training fold.
ml::Dataset survival_dataset(const pipeline::FeatureTable& t, const Combo& combo);

struct ScanCell {
  std::string feature;
  std::string marker;
  double statistic = 0.0;  // rho or U; NaN when the test is undefined
  double p_raw = 1.0;
  double p_holm = 1.0;
  bool defined = false;
};

/// Spearman rho for every DRF x marker pair, Holm-corrected over all defined tests.
std::vector<ScanCell> spearman_scan(const pipeline::FeatureTable& t, std::vector<std::string>& warnings);

/// Wilcoxon rank-sum of each DRF between the high (>= median) and low groups of each marker.
std::vector<ScanCell> wilcoxon_scan(const pipeline::FeatureTable& t, std::vector<std::string>& warnings);

struct SurvivalScanRow {
  std::string feature;
  std::optional<double> median_ge;  // KM median survival in months
  std::optional<double> median_lt;
  double p_raw = 1.0;
  std::optional<stats::HazardRatio> hazard;  // ">=" group relative to "<"
  double p_corrected = 1.0;
};

/// Log-rank scan over every DRF, age, gender and immune marker; Holm family = all rows.
/// Gender splits male (">=") from female ("<").
std::vector<SurvivalScanRow> survival_scan(const pipeline::FeatureTable& t, std::vector<std::string>& warnings);

inline constexpr double kDaysPerMonth = 30.44;

/// Parses argv and runs one subcommand. Returns 0 (ok), 1 (error) or 2 (completed with warnings).
int run(int argc, char** argv);

}  // namespace drf::cli
