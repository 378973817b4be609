// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drf/cli.hpp"
#include "drf/ml.hpp"
#include "drf/pipeline.hpp"
#include "drf/stats.hpp"
#include "drf/texture.hpp"
#include "texture_reference.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Rounds to one significant figure.
double sig1(double v) {
  if (v == 0.0) return 0.0;
  const double e = std::floor(std::log10(std::fabs(v)));
  const double scale = std::pow(10.0, e);
  return std::round(v / scale) * scale;
}

bool same_sig1(double a, double b) { return std::fabs(sig1(a) - sig1(b)) <= 1e-12 * std::fabs(sig1(b)); }

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / ("drf_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_holm() {
  const auto t0 = Clock::now();
  // Raw p column of a reference survival scan (55 significant rows), family size 204.
  const std::vector<double> raw = {
      5.45e-8, 3.88e-7, 1.36e-6, 1.40e-6, 2.00e-6, 2.00e-6, 2.09e-6, 3.63e-6, 4.18e-6, 4.42e-6, 6.69e-6,
      6.80e-6, 7.49e-6, 8.02e-6, 8.23e-6, 8.43e-6, 8.64e-6, 8.81e-6, 8.81e-6, 8.91e-6, 9.28e-6, 9.37e-6,
      9.70e-6, 1.02e-5, 1.03e-5, 1.48e-5, 1.64e-5, 1.72e-5, 1.89e-5, 1.95e-5, 2.23e-5, 2.31e-5, 3.30e-5,
      3.38e-5, 3.42e-5, 5.80e-5, 5.82e-5, 6.84e-5, 7.42e-5, 8.14e-5, 8.33e-5, 1.10e-4, 1.21e-4, 1.31e-4,
      1.46e-4, 1.49e-4, 1.59e-4, 1.61e-4, 1.61e-4, 1.75e-4, 1.83e-4, 2.06e-4, 2.61e-4, 2.82e-4, 3.23e-4};
  const std::vector<double> printed = {0.00001, 0.00008, 0.00028, 0.00028, 0.00040,
                                       0.00040, 0.00041, 0.00072, 0.00082, 0.00086};
  const auto corrected = drf::stats::holm_bonferroni(raw, 204);
  const double elapsed = seconds_since(t0);
  std::size_t matched = 0;
  std::string mismatch;
  for (std::size_t i = 0; i < printed.size(); ++i) {
    if (same_sig1(corrected[i], printed[i]))
      ++matched;
    else
      mismatch += " row" + std::to_string(i + 1) + "=" + std::to_string(corrected[i]);
  }
  std::ostringstream d;
  d << matched << "/10 rows match to 1 s.f." << mismatch << ", " << elapsed << " s";
  return {matched == 10 && elapsed < 1.0, d.str()};
}

Outcome criterion_feature_count(const fs::path& scratch) {
  drf::pipeline::SynthConfig sc;
  sc.patients = 2;
  sc.seed = 2024;
  const fs::path dir = scratch / "ac2";
  drf::pipeline::generate_synthetic_cohort(dir, sc);
  const auto manifest = drf::pipeline::load_manifest(dir / "manifest.json");
  const auto weights = drf::cnn::he_initialized(42);

  std::map<drf::Modality, drf::pipeline::ModalityInput> inputs;
  for (auto m : drf::kAllModalities)
    inputs.emplace(m, drf::pipeline::ModalityInput{drf::load_volume(manifest[0].images.at(m)),
                                                   drf::load_mask(manifest[0].mask_for(m))});
  drf::pipeline::PipelineConfig cfg;  // defaults: 64^3 input, both layers, 32 levels
  const auto sig = drf::pipeline::extract_signature(inputs, weights, cfg);

  bool finite = std::all_of(sig.values.begin(), sig.values.end(), [](double v) { return std::isfinite(v); });

  // Names must be "<modality label>-<manifest name>" in manifest order for each modality.
  std::vector<std::string> manifest_names;
  std::istringstream text(drf::texture::feature_manifest_text());
  std::string line;
  while (std::getline(text, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("index", 0) == 0) continue;
    manifest_names.push_back(line.substr(line.rfind('\t') + 1));
  }
  bool names_ok = manifest_names.size() == drf::pipeline::kFeaturesPerModality && sig.names.size() == 180;
  for (std::size_t i = 0; names_ok && i < sig.names.size(); ++i) {
    const auto label = drf::modality_label(drf::kAllModalities[i / 45]);
    names_ok = sig.names[i] == std::string(label) + "-" + manifest_names[i % 45];
  }
  std::ostringstream d;
  d << sig.values.size() << " features (" << sig.values.size() / 4 << " per modality), finite=" << finite
    << ", names match manifest=" << names_ok;
  return {sig.values.size() == 180 && finite && names_ok, d.str()};
}

Outcome criterion_texture_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  for (unsigned seed = 0; seed < 50; ++seed) {
    const double fill = 0.45 + 0.55 * ((seed * 37) % 50) / 50.0;
    const auto q = drf::testing::random_quantized(6, drf::kDefaultLevels, fill, 1000 + seed);
    const auto got = drf::texture::compute_quantifiers(q);
    const auto ref = drf::testing::reference_quantifiers(q);
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double scale = std::max(std::fabs(got[i]), std::fabs(ref[i]));
      const double err = scale < 1e-12 ? 0.0 : std::fabs(got[i] - ref[i]) / scale;
      if (err > worst) {
        worst = err;
        worst_name = std::string(drf::texture::quantifier_names()[i].name);
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "50 volumes x 41 quantifiers, max rel err " << worst << (worst_name.empty() ? "" : " (" + worst_name + ")")
    << ", " << elapsed << " s";
  return {worst <= 1e-6 && elapsed < 30.0, d.str()};
}

Outcome criterion_structural() {
  std::size_t cases = 0, failures = 0;
  std::mt19937 rng(77);
  for (unsigned c = 0; c < 300; ++c) {
    const std::size_t side = 2 + rng() % 9;
    const int levels = 2 + static_cast<int>(rng() % 31);
    const double fill = 0.05 + 0.95 * (rng() % 1000) / 1000.0;
    auto q = drf::testing::random_quantized(side, levels, fill, 5000 + c);
    std::size_t voxels = 0;
    for (int g : q.grid.data()) voxels += g > 0;
    if (voxels == 0) {
      q.grid[0] = 1;
      voxels = 1;
    }
    ++cases;
    bool ok = true;
    try {
      const auto g = drf::texture::compute_glcm(q);
      double sum = 0.0;
      for (int i = 1; i <= levels; ++i)
        for (int j = 1; j <= levels; ++j) {
          sum += g(i, j);
          ok = ok && g(i, j) == g(j, i);
        }
      ok = ok && std::fabs(sum - 1.0) <= 1e-9;
    } catch (const drf::DegenerateMatrix&) {
      // Only legal when no two in-mask voxels touch.
      ok = ok && drf::testing::reference_glcm(q).empty();
    }
    const auto z = drf::texture::compute_glszm(q);
    std::size_t weighted = 0;
    for (const auto& e : z.entries) weighted += e.size * e.count;
    ok = ok && weighted == voxels;
    failures += !ok;
  }
  std::ostringstream d;
  d << cases - failures << "/" << cases << " fuzz cases satisfy symmetry, unit mass and zone-size sum";
  return {failures == 0, d.str()};
}

Outcome criterion_survival() {
  using drf::stats::SurvivalSample;
  const std::vector<SurvivalSample> g1 = {{2, true}, {3, true}, {4, false}, {5, true}, {8, true}};
  const std::vector<SurvivalSample> g2 = {{3, true}, {6, false}, {7, true}, {9, true}, {10, false}};
  // Exact values from tests/oracles/logrank_oracle.py.
  const double chi2_ref = 3721.0 / 1703.0;
  const double hr_ref = 676.0 / 249.0;
  const std::vector<double> km1_ref = {0.8, 0.6, 0.6, 0.3, 0.0};
  const std::vector<double> km2_ref = {0.8, 0.8, 8.0 / 15.0, 4.0 / 15.0, 4.0 / 15.0};

  bool ok = true;
  const auto km1 = drf::stats::kaplan_meier(g1), km2 = drf::stats::kaplan_meier(g2);
  ok = ok && km1.size() == km1_ref.size() && km2.size() == km2_ref.size();
  for (std::size_t i = 0; ok && i < km1.size(); ++i) ok = std::fabs(km1[i].survival - km1_ref[i]) <= 1e-6;
  for (std::size_t i = 0; ok && i < km2.size(); ++i) ok = std::fabs(km2[i].survival - km2_ref[i]) <= 1e-6;
  const bool km_ok = ok;

  const auto lr = drf::stats::logrank(g1, g2);
  const double chi2_err = std::fabs(lr.statistic - chi2_ref);
  const double hr_err = lr.hazard ? std::fabs(lr.hazard->hr - hr_ref) : INFINITY;

  std::vector<SurvivalSample> g = g1;
  g.insert(g.end(), g2.begin(), g2.end());
  const auto self = drf::stats::logrank(g, g);
  const bool self_ok = self.p_raw == 1.0 && self.hazard && self.hazard->hr == 1.0;

  std::ostringstream d;
  d << "KM " << (km_ok ? "ok" : "MISMATCH") << ", |chi2 err| " << chi2_err << ", |HR err| " << hr_err
    << ", logrank(g,g): p=" << self.p_raw << " HR=" << (self.hazard ? self.hazard->hr : NAN);
  return {km_ok && chi2_err <= 1e-6 && hr_err <= 1e-6 && self_ok, d.str()};
}

Outcome criterion_classifier(const fs::path& scratch) {
  const auto t0 = Clock::now();
  drf::pipeline::SynthConfig sc;
  sc.patients = 120;
  sc.seed = 31337;
  const fs::path dir = scratch / "ac6";
  drf::pipeline::generate_synthetic_cohort(dir, sc);

  drf::pipeline::PipelineConfig pc;
  pc.input_side = 16;  // small CNN input keeps the 120-patient extraction to seconds
  const auto cohort = drf::pipeline::run_cohort(drf::pipeline::load_manifest(dir / "manifest.json"),
                                                drf::cnn::he_initialized(42), pc);
  if (cohort.table.patients.size() != 120) return {false, "extraction dropped patients"};
  const double extract_s = seconds_since(t0);

  drf::ml::EvalConfig ec;
  ec.forest.seed = 7;
  const auto data = drf::cli::survival_dataset(cohort.table, drf::cli::Combo{true, false, false});
  const auto real = drf::ml::evaluate_loocv(data, ec);

  double lo = 1.0, hi = 0.0;
  std::vector<double> null_auc;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto shuffled = data;
    std::mt19937_64 rng(900 + s);
    std::shuffle(shuffled.survival->begin(), shuffled.survival->end(), rng);
    ec.forest.seed = 1000 + s;
    const double a = drf::ml::evaluate_loocv(shuffled, ec).auc;
    null_auc.push_back(a);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  const std::size_t in_band =
      std::count_if(null_auc.begin(), null_auc.end(), [](double a) { return a >= 0.35 && a <= 0.65; });
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "LOOCV AUC " << real.auc << " (>= 0.90); permuted AUC range [" << lo << ", " << hi << "], " << in_band
    << "/20 in [0.35, 0.65]; " << elapsed << " s (extraction " << extract_s << " s)";
  return {real.auc >= 0.90 && in_band == 20 && elapsed < 300.0, d.str()};
}

int run_cli(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return drf::cli::run(static_cast<int>(argv.size()), argv.data());
}

Outcome criterion_determinism(const fs::path& scratch) {
  const fs::path base = scratch / "ac7";
  drf::pipeline::SynthConfig sc;
  sc.patients = 12;
  sc.seed = 99;
  drf::pipeline::generate_synthetic_cohort(base / "cohort", sc);
  drf::cnn::save_weights(base / "w.drf", drf::cnn::he_initialized(5));

  for (const char* run : {"a", "b"}) {
    const std::string out = (base / run).string();
    const int rc1 = run_cli({"drf", "--quiet", "extract", "--manifest", (base / "cohort/manifest.json").string(), "--weights",
                             (base / "w.drf").string(), "--out", out, "--input-side", "16"});
    const int rc2 = run_cli({"drf", "--quiet", "classify", "--out", out, "--seed", "17", "--trees", "60", "--combos", "R,C+I"});
    if (rc1 == 1 || rc2 == 1) return {false, std::string("CLI run ") + run + " failed"};
  }

  std::size_t files = 0;
  std::string differing;
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    const auto name = entry.path().filename();
    std::string a = slurp(entry.path()), b = slurp(base / "b" / name);
    if (name == "runinfo.json") {
      auto strip = [](std::string s) {
        std::istringstream in(s);
        std::string line, out;
        while (std::getline(in, line))
          if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
        return out;
      };
      a = strip(a);
      b = strip(b);
    }
    ++files;
    if (a != b) differing += " " + name.string();
  }
  std::size_t files_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(base / "b")) ++files_b;
  std::ostringstream d;
  d << files << " files compared" << (differing.empty() ? ", all identical" : ", differing:" + differing);
  return {differing.empty() && files == files_b && files > 0, d.str()};
}

Outcome criterion_imputation() {
  using drf::stats::SurvivalSample;
  struct Case {
    std::vector<SurvivalSample> s;
    std::vector<double> expected;
  };
  const std::vector<Case> cases = {
      // censored at 10, deaths at 8, 12, 20: mean of {12, 20}
      {{{10, false}, {8, true}, {12, true}, {20, true}}, {16, 8, 12, 20}},
      // nothing censored: identity
      {{{3, true}, {1, true}, {2, true}}, {3, 1, 2}},
      // censored at 25 with every death earlier: kept
      {{{25, false}, {8, true}, {12, true}, {20, true}}, {25, 8, 12, 20}},
      // a death at exactly the censoring time is eligible
      {{{12, false}, {8, true}, {12, true}, {20, true}}, {16, 8, 12, 20}},
      // several censored subjects, censored times never enter the mean
      {{{5, false}, {15, false}, {30, false}, {10, true}, {20, true}, {40, false}},
       {15, 20, 30, 10, 20, 40}},
      // all censored: nothing eligible, every time kept
      {{{4, false}, {9, false}}, {4, 9}},
  };
  std::size_t ok = 0;
  for (const auto& c : cases)
    if (drf::ml::impute_censored(c.s) == c.expected) ++ok;
  std::ostringstream d;
  d << ok << "/" << cases.size() << " constructed cases reproduced exactly (incl. empty-eligible fallback)";
  return {ok == cases.size(), d.str()};
}

}  // namespace

int main() {
  const fs::path scratch = scratch_dir();
  struct Criterion {
    const char* id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "Holm-Bonferroni corrected p-values for a 204-test survival scan", criterion_holm},
      {"AC2", "Feature-count contract (45 per modality, 180 total)", [&] { return criterion_feature_count(scratch); }},
      {"AC3", "Texture quantifiers match brute-force reference", criterion_texture_oracle},
      {"AC4", "GLCM/GLSZM structural invariants on fuzz corpus", criterion_structural},
      {"AC5", "Kaplan-Meier and log-rank oracles", criterion_survival},
      {"AC6", "Classifier sanity on planted-signal cohort", [&] { return criterion_classifier(scratch); }},
      {"AC7", "End-to-end determinism of extract + classify", [&] { return criterion_determinism(scratch); }},
      {"AC8", "Censored-survival imputation rule", criterion_imputation},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %s %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
