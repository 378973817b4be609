#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "drf/cli.hpp"
#include "json.hpp"

#ifndef DRF_VERSION
#define DRF_VERSION "unknown"
#endif

namespace drf::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunConfig {
  std::string subcommand;
  fs::path manifest;
  fs::path weights;
  fs::path features;
  fs::path out;
  std::optional<std::uint64_t> seed;
  int levels = kDefaultLevels;
  std::string layers = "both";
  std::string modalities = "t1wi,t1ce,t2wi,flair";
  std::string combos{kDefaultCombos};
  std::string eval = "loocv";
  std::size_t train_n = 100;
  std::size_t trees = 500;
  int input_side = cnn::kDefaultInputSide;
  unsigned threads = 0;
  bool json_weights = false;
  std::size_t synth_patients = 120;
  int synth_side = 24;
  double synth_signal = 1.0;
};

// Serializes progress lines on stdout and collects warnings for the exit status.
class Log {
 public:
  explicit Log(bool quiet) : quiet_(quiet) {}
  void info(const std::string& msg) {
    if (quiet_) return;
    std::lock_guard lock(mutex_);
    std::cout << msg << '\n' << std::flush;
  }
  void warn(const std::string& msg) {
    std::lock_guard lock(mutex_);
    std::cerr << "warning: " << msg << '\n' << std::flush;
    warnings_.push_back(msg);
  }
  void warn_all(const std::vector<std::string>& msgs) {
    for (const auto& m : msgs) warn(m);
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  bool quiet_;
  std::mutex mutex_;
  std::vector<std::string> warnings_;
};

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError(cfg.subcommand + " is stochastic and requires --seed");
  return *cfg.seed;
}

void prepare_out_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory " + dir.string() + " is not writable");
}

std::string file_crc32(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const uLong crc = ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size()));
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
  return hex;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// The output directory itself is not echoed so that runs into different directories stay
// byte-identical apart from the timestamp.
void write_runinfo(const RunConfig& cfg, const fs::path& dir, const json& extra = json::object()) {
  json c = {{"levels", cfg.levels},      {"layers", cfg.layers}, {"modalities", cfg.modalities},
            {"combos", cfg.combos},      {"eval", cfg.eval},     {"train_n", cfg.train_n},
            {"trees", cfg.trees},        {"input_side", cfg.input_side}};
  if (!cfg.manifest.empty()) c["manifest"] = cfg.manifest.string();
  if (!cfg.weights.empty()) {
    c["weights"] = cfg.weights.string();
    c["weights_crc32"] = file_crc32(cfg.weights);
  }
  if (!cfg.features.empty()) {
    c["features"] = cfg.features.string();
    c["features_crc32"] = file_crc32(cfg.features);
  }
  for (const auto& [k, v] : extra.items()) c[k] = v;
  json doc = {{"tool", "drf"},
              {"version", DRF_VERSION},
              {"subcommand", cfg.subcommand},
              {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
              {"config", std::move(c)},
              {"timestamp", utc_timestamp()}};
  pipeline::write_file_atomic(dir / "runinfo.json", doc.dump(2) + "\n");
}

std::set<int> parse_layers(const std::string& s) {
  if (s == "1") return {1};
  if (s == "2") return {2};
  if (s == "both") return {1, 2};
  throw ConfigError("--layers must be 1, 2 or both (got '" + s + "')");
}

std::vector<Modality> parse_modalities(const std::string& s) {
  std::vector<Modality> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto m = parse_modality(tok);
    if (!m) throw ConfigError("unknown modality '" + tok + "' (expected t1wi, t1ce, t2wi, flair)");
    out.push_back(*m);
  }
  if (out.empty()) throw ConfigError("--modalities is empty");
  return out;
}

fs::path features_path(const RunConfig& cfg) {
  return cfg.features.empty() ? cfg.out / "features.csv" : cfg.features;
}

std::string csv_number(double v) { return std::isfinite(v) ? pipeline::format_double(v) : "NA"; }
std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : "NA"; }

ml::EvalReport evaluate(const ml::Dataset& d, const RunConfig& cfg, std::uint64_t seed) {
  ml::EvalConfig ec;
  ec.forest.n_trees = cfg.trees;
  ec.forest.seed = seed;
  ec.forest.threads = cfg.threads;
  if (cfg.eval == "loocv") return ml::evaluate_loocv(d, ec);
  if (cfg.eval == "split") return ml::evaluate_split(d, cfg.train_n, seed, ec);
  throw ConfigError("--eval must be loocv or split (got '" + cfg.eval + "')");
}

void cmd_synth(const RunConfig& cfg, Log& log) {
  prepare_out_dir(cfg.out);
  pipeline::SynthConfig sc;
  sc.patients = cfg.synth_patients;
  sc.side = cfg.synth_side;
  sc.signal = cfg.synth_signal;
  sc.seed = require_seed(cfg);
  const auto patients = pipeline::generate_synthetic_cohort(cfg.out, sc);
  json groups = json::object();
  for (const auto& p : patients) groups[p.id] = p.group;
  pipeline::write_file_atomic(cfg.out / "groups.json", groups.dump(2) + "\n");
  write_runinfo(cfg, cfg.out,
                {{"patients", cfg.synth_patients}, {"side", cfg.synth_side}, {"signal", cfg.synth_signal}});
  log.info("wrote " + std::to_string(patients.size()) + " synthetic patients to " + cfg.out.string());
}

void cmd_init_weights(const RunConfig& cfg, Log& log) {
  if (cfg.out.empty()) throw ConfigError("--out (weight file path) is required");
  const auto w = cnn::he_initialized(require_seed(cfg));
  if (cfg.out.has_parent_path()) fs::create_directories(cfg.out.parent_path());
  if (cfg.json_weights)
    cnn::save_weights_json(cfg.out, w);
  else
    cnn::save_weights(cfg.out, w);
  log.info("wrote He-initialized weights to " + cfg.out.string());
}

void cmd_extract(const RunConfig& cfg, Log& log) {
  if (cfg.manifest.empty()) throw ConfigError("--manifest is required");
  if (cfg.weights.empty()) throw ConfigError("--weights is required");
  if (!fs::exists(cfg.weights)) throw Error("weights file not found: " + cfg.weights.string());
  prepare_out_dir(cfg.out);

  pipeline::PipelineConfig pc;
  pc.levels = cfg.levels;
  pc.layers = parse_layers(cfg.layers);
  pc.modalities = parse_modalities(cfg.modalities);
  pc.input_side = cfg.input_side;
  pc.threads = cfg.threads;
  pc.validate();

  const auto weights = cnn::load_weights(cfg.weights);
  cnn::require_drf_layout(weights);
  const auto manifest = pipeline::load_manifest(cfg.manifest);
  log.info("extracting " + std::to_string(manifest.size()) + " patients");
  const auto result = pipeline::run_cohort(manifest, weights, pc);
  log.warn_all(result.warnings);
  if (result.table.patients.empty()) throw Error("every patient failed; no features written");

  pipeline::write_file_atomic(cfg.out / "features.csv", pipeline::format_feature_csv(result.table));
  pipeline::write_file_atomic(cfg.out / "columns.json", pipeline::column_manifest_json(result.table));
  write_runinfo(cfg, cfg.out, {{"patients_ok", result.table.patients.size()}, {"patients_failed", result.warnings.size()}});
  log.info("wrote " + std::to_string(result.table.patients.size()) + " rows x " +
           std::to_string(result.table.all_columns().size()) + " columns");
}

void write_scan(const fs::path& path, const std::vector<ScanCell>& cells, const char* stat_name, bool neg_log10) {
  std::string out = std::string("drf,marker,") + stat_name + ",p_raw,p_holm";
  if (neg_log10) out += ",neg_log10_p";
  out += "\r\n";
  for (const auto& c : cells) {
    out += pipeline::csv_escape(c.feature) + ',' + pipeline::csv_escape(c.marker) + ',' + csv_number(c.statistic);
    out += c.defined ? ',' + csv_number(c.p_raw) + ',' + csv_number(c.p_holm) : std::string(",NA,NA");
    if (neg_log10) out += c.defined ? ',' + csv_number(-std::log10(std::max(c.p_raw, 1e-300))) : std::string(",NA");
    out += "\r\n";
  }
  pipeline::write_file_atomic(path, out);
}

void cmd_stats(const RunConfig& cfg, Log& log) {
  prepare_out_dir(cfg.out);
  const auto table = pipeline::read_feature_csv(features_path(cfg));
  if (table.patients.size() < 4) throw IngestError("stats needs at least 4 patients");
  std::vector<std::string> warnings;

  write_scan(cfg.out / "spearman_heatmap.csv", spearman_scan(table, warnings), "rho", false);
  write_scan(cfg.out / "wilcoxon_heatmap.csv", wilcoxon_scan(table, warnings), "u", true);

  const auto rows = survival_scan(table, warnings);
  std::string out = "feature,median_survival_ge,median_survival_lt,p_value,hr,ci_low,ci_high,p_corrected\r\n";
  for (const auto& r : rows) {
    out += pipeline::csv_escape(r.feature) + ',' + csv_number(r.median_ge) + ',' + csv_number(r.median_lt) + ',' +
           csv_number(r.p_raw);
    if (r.hazard)
      out += ',' + csv_number(r.hazard->hr) + ',' + csv_number(r.hazard->ci_low) + ',' + csv_number(r.hazard->ci_high);
    else
      out += ",NA,NA,NA";
    out += ',' + csv_number(r.p_corrected) + "\r\n";
  }
  pipeline::write_file_atomic(cfg.out / "survival_scan.csv", out);
  log.warn_all(warnings);
  write_runinfo(cfg, cfg.out, {{"survival_family_size", rows.size()}});
  log.info("wrote spearman_heatmap.csv, wilcoxon_heatmap.csv, survival_scan.csv");
}

json report_json(const ml::EvalReport& r, const ml::Dataset& d, const pipeline::FeatureTable& t,
                 const std::string& combo, const RunConfig& cfg) {
  json scores = json::array();
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    json s = {{"id", t.patients[i].id}};
    s["score"] = std::isfinite(r.scores[i]) ? json(r.scores[i]) : json(nullptr);
    s["label"] = r.labels[i] >= 0 ? json(r.labels[i]) : json(nullptr);
    scores.push_back(std::move(s));
  }
  json importance = json::array();
  for (std::size_t f = 0; f < d.p; ++f) importance.push_back({{"name", d.columns[f]}, {"value", r.importance[f]}});
  json doc = {{"combo", combo}, {"eval", cfg.eval}, {"auc", r.auc}, {"n_scored", r.scored.size()},
              {"skipped_folds", r.skipped_folds}, {"scores", std::move(scores)}, {"importance", std::move(importance)}};
  if (r.logrank) {
    json lr = {{"chi2", r.logrank->statistic}, {"p", r.logrank->p_raw}};
    if (r.logrank->hazard) {
      lr["hr"] = r.logrank->hazard->hr;
      lr["ci"] = {r.logrank->hazard->ci_low, r.logrank->hazard->ci_high};
    } else {
      lr["hr"] = nullptr;
      lr["ci"] = nullptr;
    }
    doc["logrank"] = std::move(lr);
  } else {
    doc["logrank"] = nullptr;
  }
  // Correlation between predicted long-survival score and observed survival time.
  std::vector<double> sc, days;
  for (std::size_t i : r.scored) {
    sc.push_back(r.scores[i]);
    days.push_back(t.patients[i].survival_days);
  }
  try {
    const auto sp = stats::spearman(sc, days);
    doc["score_survival_spearman"] = {{"rho", sp.statistic}, {"p", sp.p_raw}};
  } catch (const Error&) {
    doc["score_survival_spearman"] = nullptr;
  }
  doc["warnings"] = r.warnings;
  return doc;
}

void cmd_classify(const RunConfig& cfg, Log& log) {
  const std::uint64_t seed = require_seed(cfg);
  const auto combos = parse_combos(cfg.combos);
  prepare_out_dir(cfg.out);
  const auto table = pipeline::read_feature_csv(features_path(cfg));

  std::string summary = "combo,n_features,auc,logrank_p,hr,ci_low,ci_high\r\n";
  for (const auto& combo : combos) {
    const std::string name = combo.name();
    const auto d = survival_dataset(table, combo);
    if (d.p == 0) throw ConfigError("combination " + name + " selects no columns");
    log.info("classify " + name + " (" + std::to_string(d.p) + " features, " + cfg.eval + ")");
    const auto r = evaluate(d, cfg, seed);
    for (const auto& w : r.warnings) log.warn(name + ": " + w);

    pipeline::write_file_atomic(cfg.out / ("report_" + name + ".json"),
                                report_json(r, d, table, name, cfg).dump(2) + "\n");

    std::vector<std::size_t> order(d.p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r.importance[a] > r.importance[b]; });
    std::string imp = "rank,feature,importance\r\n";
    for (std::size_t k = 0; k < order.size(); ++k)
      imp += std::to_string(k + 1) + ',' + pipeline::csv_escape(d.columns[order[k]]) + ',' +
             csv_number(r.importance[order[k]]) + "\r\n";
    pipeline::write_file_atomic(cfg.out / ("importance_" + name + ".csv"), imp);

    std::vector<stats::SurvivalSample> short_group, long_group;
    for (std::size_t i : r.scored)
      (r.scores[i] >= 0.5 ? long_group : short_group).push_back((*d.survival)[i]);
    std::string km = "group,time_days,survival,at_risk,events,censored\r\n";
    auto emit = [&](const char* g, const std::vector<stats::SurvivalSample>& s) {
      if (s.empty()) return;
      for (const auto& p : stats::kaplan_meier(s))
        km += std::string(g) + ',' + csv_number(p.time) + ',' + csv_number(p.survival) + ',' +
              std::to_string(p.at_risk) + ',' + std::to_string(p.events) + ',' + std::to_string(p.censored) + "\r\n";
    };
    emit("predicted_short", short_group);
    emit("predicted_long", long_group);
    pipeline::write_file_atomic(cfg.out / ("km_" + name + ".csv"), km);

    summary += name + ',' + std::to_string(d.p) + ',' + csv_number(r.auc);
    if (r.logrank && r.logrank->hazard)
      summary += ',' + csv_number(r.logrank->p_raw) + ',' + csv_number(r.logrank->hazard->hr) + ',' +
                 csv_number(r.logrank->hazard->ci_low) + ',' + csv_number(r.logrank->hazard->ci_high);
    else if (r.logrank)
      summary += ',' + csv_number(r.logrank->p_raw) + ",NA,NA,NA";
    else
      summary += ",NA,NA,NA,NA";
    summary += "\r\n";
    log.info("  AUC " + pipeline::format_double(r.auc));
  }
  pipeline::write_file_atomic(cfg.out / "classify_summary.csv", summary);
  write_runinfo(cfg, cfg.out);
}

void cmd_markers(const RunConfig& cfg, Log& log) {
  const std::uint64_t seed = require_seed(cfg);
  prepare_out_dir(cfg.out);
  const auto table = pipeline::read_feature_csv(features_path(cfg));

  // Column subsets: one per modality present in the table, then all DRFs.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> subsets;
  for (Modality m : kAllModalities) {
    const std::string prefix = std::string(modality_label(m)) + "-";
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < table.drf_columns.size(); ++c)
      if (table.drf_columns[c].rfind(prefix, 0) == 0) cols.push_back(c);
    if (!cols.empty()) subsets.emplace_back(std::string(modality_label(m)), std::move(cols));
  }
  {
    std::vector<std::size_t> all(table.drf_columns.size());
    std::iota(all.begin(), all.end(), 0);
    subsets.emplace_back("ALL", std::move(all));
  }

  std::string matrix = "marker";
  for (const auto& s : subsets) matrix += ',' + pipeline::csv_escape(s.first);
  matrix += "\r\n";
  std::string top = "marker,rank,feature,importance\r\n";
  constexpr std::size_t kTop = 10;

  for (std::size_t k = 0; k < pipeline::kImmuneMarkerCount; ++k) {
    const std::string marker(pipeline::immune_marker_names()[k]);
    std::vector<double> values;
    for (const auto& p : table.patients) values.push_back(p.immune[k]);
    const auto split = stats::median_split(values);
    if (split.degenerate) {
      log.warn("marker '" + marker + "' skipped: values do not split at the median");
      continue;
    }
    log.info("markers: " + marker);
    matrix += pipeline::csv_escape(marker);
    for (const auto& [subset_name, cols] : subsets) {
      ml::Dataset d;
      d.n = table.patients.size();
      d.p = cols.size();
      for (std::size_t c : cols) d.columns.push_back(table.drf_columns[c]);
      for (const auto& p : table.patients)
        for (std::size_t c : cols) d.x.push_back(p.drf.values[c]);
      d.labels = split.labels;
      double auc_value = std::numeric_limits<double>::quiet_NaN();
      try {
        const auto r = evaluate(d, cfg, seed ^ (0x9e3779b97f4a7c15ull * (k + 1)));
        auc_value = r.auc;
        for (const auto& w : r.warnings) log.warn(marker + "/" + subset_name + ": " + w);
        if (subset_name == "ALL") {
          std::vector<std::size_t> order(d.p);
          std::iota(order.begin(), order.end(), 0);
          std::stable_sort(order.begin(), order.end(),
                           [&](std::size_t a, std::size_t b) { return r.importance[a] > r.importance[b]; });
          for (std::size_t i = 0; i < std::min(kTop, order.size()); ++i)
            top += pipeline::csv_escape(marker) + ',' + std::to_string(i + 1) + ',' +
                   pipeline::csv_escape(d.columns[order[i]]) + ',' + csv_number(r.importance[order[i]]) + "\r\n";
        }
      } catch (const UndefinedAuc& e) {
        log.warn(marker + "/" + subset_name + ": " + e.what());
      }
      matrix += ',' + csv_number(auc_value);
    }
    matrix += "\r\n";
  }
  pipeline::write_file_atomic(cfg.out / "marker_auc.csv", matrix);
  pipeline::write_file_atomic(cfg.out / "marker_top_features.csv", top);
  write_runinfo(cfg, cfg.out);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Deep radiomic feature extraction and analysis"};
  app.set_version_flag("--version", DRF_VERSION);
  app.require_subcommand(1);
  RunConfig cfg;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output (warnings still go to stderr)");

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { cfg.seed = s; }, "Root random seed");
  };
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", cfg.threads, "Worker threads (0 = $DRF_THREADS or all cores)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic cohort with planted texture signal");
  synth->add_option("--out", cfg.out, "Output directory")->required();
  add_seed(synth);
  synth->add_option("--patients", cfg.synth_patients, "Number of patients")->capture_default_str();
  synth->add_option("--side", cfg.synth_side, "In-plane voxels per volume")->capture_default_str();
  synth->add_option("--signal", cfg.synth_signal, "Strength of the planted group difference")->capture_default_str();

  auto* init = app.add_subcommand("init-weights", "Write a He-initialized weight file");
  init->add_option("--out", cfg.out, "Weight file path")->required();
  add_seed(init);
  init->add_flag("--json", cfg.json_weights, "Write the JSON manifest variant");

  auto* extract = app.add_subcommand("extract", "Extract deep radiomic features for a cohort");
  extract->add_option("--manifest", cfg.manifest, "Cohort manifest (JSON)")->required();
  extract->add_option("--weights", cfg.weights, "Network weight file")->required();
  extract->add_option("--out", cfg.out, "Output directory")->required();
  extract->add_option("--levels", cfg.levels, "Quantization levels")->capture_default_str();
  extract->add_option("--layers", cfg.layers, "Feature layers: 1, 2 or both")->capture_default_str();
  extract->add_option("--modalities", cfg.modalities, "Comma-separated modality keys")->capture_default_str();
  extract->add_option("--input-side", cfg.input_side, "CNN input cube side")->capture_default_str();
  add_seed(extract);
  add_threads(extract);

  auto add_features = [&](CLI::App* sub) {
    sub->add_option("--features", cfg.features, "features.csv (default: <out>/features.csv)");
    sub->add_option("--out", cfg.out, "Output directory")->required();
  };
  auto* stats_cmd = app.add_subcommand("stats", "Spearman, Wilcoxon and survival scans");
  add_features(stats_cmd);
  add_seed(stats_cmd);

  auto add_eval = [&](CLI::App* sub) {
    add_seed(sub);
    add_threads(sub);
    sub->add_option("--eval", cfg.eval, "loocv or split")->capture_default_str();
    sub->add_option("--train-n", cfg.train_n, "Training size for --eval split")->capture_default_str();
    sub->add_option("--trees", cfg.trees, "Trees per forest")->capture_default_str();
  };
  auto* classify = app.add_subcommand("classify", "Survival-group classification per feature-set combination");
  add_features(classify);
  add_eval(classify);
  classify->add_option("--combos", cfg.combos, "Comma-separated combinations of R, C, I")->capture_default_str();

  auto* markers = app.add_subcommand("markers", "Per-marker high/low classification from DRFs");
  add_features(markers);
  add_eval(markers);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Log log(quiet);
  try {
    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (cfg.subcommand == "synth") cmd_synth(cfg, log);
    else if (cfg.subcommand == "init-weights") cmd_init_weights(cfg, log);
    else if (cfg.subcommand == "extract") cmd_extract(cfg, log);
    else if (cfg.subcommand == "stats") cmd_stats(cfg, log);
    else if (cfg.subcommand == "classify") cmd_classify(cfg, log);
    else if (cfg.subcommand == "markers") cmd_markers(cfg, log);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return log.warnings().empty() ? 0 : 2;
}

}  // namespace drf::cli
