#include <cmath>
#include <limits>

#include "drf/cli.hpp"

namespace drf::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> drf_column(const pipeline::FeatureTable& t, std::size_t c) {
  std::vector<double> v;
  v.reserve(t.patients.size());
  for (const auto& p : t.patients) v.push_back(p.drf.values[c]);
  return v;
}

std::vector<double> marker_column(const pipeline::FeatureTable& t, std::size_t k) {
  std::vector<double> v;
  v.reserve(t.patients.size());
  for (const auto& p : t.patients) v.push_back(p.immune[k]);
  return v;
}

void apply_holm(std::vector<ScanCell>& cells) {
  std::vector<double> p;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].defined) {
      p.push_back(cells[i].p_raw);
      idx.push_back(i);
    }
  const auto corrected = stats::holm_bonferroni(p, p.size());
  for (std::size_t k = 0; k < idx.size(); ++k) cells[idx[k]].p_holm = corrected[k];
}

}  // namespace

std::string Combo::name() const {
  std::string s;
  auto add = [&](bool on, const char* tok) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += tok;
  };
  add(radiomic, "R");
  add(clinical, "C");
  add(immune, "I");
  return s;
}

std::vector<Combo> parse_combos(std::string_view list) {
  std::vector<Combo> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string_view item = list.substr(start, comma - start);
    if (item.empty()) throw ConfigError("empty feature-set combination in '" + std::string(list) + "'");
    Combo c;
    std::size_t ts = 0;
    while (ts <= item.size()) {
      const std::size_t plus = std::min(item.find('+', ts), item.size());
      const std::string_view tok = item.substr(ts, plus - ts);
      bool* slot = tok == "R" ? &c.radiomic : tok == "C" ? &c.clinical : tok == "I" ? &c.immune : nullptr;
      if (!slot) throw ConfigError("unknown feature-set token '" + std::string(tok) + "' (expected R, C or I)");
      if (*slot) throw ConfigError("token '" + std::string(tok) + "' repeated in '" + std::string(item) + "'");
      *slot = true;
      ts = plus + 1;
    }
    for (const auto& prev : out)
      if (prev == c) throw ConfigError("combination " + c.name() + " listed twice");
    out.push_back(c);
    start = comma + 1;
  }
  return out;
}

ml::Dataset survival_dataset(const pipeline::FeatureTable& t, const Combo& combo) {
  ml::Dataset d;
  d.n = t.patients.size();
  if (combo.radiomic) d.columns = t.drf_columns;
  if (combo.clinical) {
    d.columns.push_back("age");
    d.columns.push_back("gender");
  }
  if (combo.immune)
    for (auto n : pipeline::immune_marker_names()) d.columns.emplace_back(n);
  d.p = d.columns.size();
  d.x.reserve(d.n * d.p);
  std::vector<stats::SurvivalSample> surv;
  for (const auto& p : t.patients) {
    if (combo.radiomic) d.x.insert(d.x.end(), p.drf.values.begin(), p.drf.values.end());
    if (combo.clinical) {
      d.x.push_back(p.age);
      d.x.push_back(p.gender == pipeline::Gender::Male ? 1.0 : 0.0);
    }
    if (combo.immune) d.x.insert(d.x.end(), p.immune.begin(), p.immune.end());
    surv.push_back({p.survival_days, p.censorship});
  }
  d.labels.assign(d.n, 0);
  d.survival = std::move(surv);
  return d;
}

std::vector<ScanCell> spearman_scan(const pipeline::FeatureTable& t, std::vector<std::string>& warnings) {
  std::vector<ScanCell> cells;
  std::size_t undefined = 0;
  for (std::size_t c = 0; c < t.drf_columns.size(); ++c) {
    const auto x = drf_column(t, c);
    for (std::size_t k = 0; k < pipeline::kImmuneMarkerCount; ++k) {
      ScanCell cell{t.drf_columns[c], std::string(pipeline::immune_marker_names()[k]), kNaN, 1.0, 1.0, false};
      try {
        const auto r = stats::spearman(x, marker_column(t, k));
        cell.statistic = r.statistic;
        cell.p_raw = r.p_raw;
        cell.defined = true;
      } catch (const UndefinedCorrelation&) {
        ++undefined;
      }
      cells.push_back(std::move(cell));
    }
  }
  if (undefined) warnings.push_back(std::to_string(undefined) + " Spearman cells undefined (constant column)");
  apply_holm(cells);
  return cells;
}

std::vector<ScanCell> wilcoxon_scan(const pipeline::FeatureTable& t, std::vector<std::string>& warnings) {
  std::vector<ScanCell> cells;
  std::size_t undefined = 0;
  for (std::size_t k = 0; k < pipeline::kImmuneMarkerCount; ++k) {
    const std::string marker(pipeline::immune_marker_names()[k]);
    const auto split = stats::median_split(marker_column(t, k));
    if (split.degenerate) warnings.push_back("marker '" + marker + "' has no low/high split; Wilcoxon cells undefined");
    for (std::size_t c = 0; c < t.drf_columns.size(); ++c) {
      ScanCell cell{t.drf_columns[c], marker, kNaN, 1.0, 1.0, false};
      if (!split.degenerate) {
        std::vector<double> high, low;
        for (std::size_t i = 0; i < t.patients.size(); ++i)
          (split.labels[i] ? high : low).push_back(t.patients[i].drf.values[c]);
        try {
          const auto r = stats::wilcoxon_ranksum(high, low);
          cell.statistic = r.statistic;
          cell.p_raw = r.p_raw;
          cell.defined = true;
        } catch (const Error&) {
          ++undefined;
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  if (undefined) warnings.push_back(std::to_string(undefined) + " Wilcoxon cells undefined (identical values)");
  apply_holm(cells);
  return cells;
}

std::vector<SurvivalScanRow> survival_scan(const pipeline::FeatureTable& t, std::vector<std::string>& warnings) {
  const std::size_t n = t.patients.size();
  std::vector<stats::SurvivalSample> surv;
  for (const auto& p : t.patients) surv.push_back({p.survival_days, p.censorship});

  std::vector<std::pair<std::string, std::vector<int>>> splits;  // label 1 = ">=" group
  auto add_median_split = [&](std::string name, const std::vector<double>& v) {
    splits.emplace_back(std::move(name), stats::median_split(v).labels);
  };
  for (std::size_t c = 0; c < t.drf_columns.size(); ++c) add_median_split(t.drf_columns[c], drf_column(t, c));
  {
    std::vector<double> age;
    std::vector<int> male;
    for (const auto& p : t.patients) {
      age.push_back(p.age);
      male.push_back(p.gender == pipeline::Gender::Male ? 1 : 0);
    }
    add_median_split("Age", age);
    splits.emplace_back("Gender", std::move(male));
  }
  for (std::size_t k = 0; k < pipeline::kImmuneMarkerCount; ++k)
    add_median_split(std::string(pipeline::immune_marker_names()[k]), marker_column(t, k));

  std::vector<SurvivalScanRow> rows;
  std::vector<double> p;
  for (auto& [name, labels] : splits) {
    SurvivalScanRow row;
    row.feature = name;
    std::vector<stats::SurvivalSample> ge, lt;
    for (std::size_t i = 0; i < n; ++i) (labels[i] ? ge : lt).push_back(surv[i]);
    auto months = [](const std::vector<stats::SurvivalSample>& g) -> std::optional<double> {
      if (g.empty()) return std::nullopt;
      const auto m = stats::km_median(stats::kaplan_meier(g));
      if (!m) return std::nullopt;
      return *m / kDaysPerMonth;
    };
    row.median_ge = months(ge);
    row.median_lt = months(lt);
    try {
      const auto r = stats::logrank(ge, lt);
      row.p_raw = r.p_raw;
      row.hazard = r.hazard;
    } catch (const UndefinedTest& e) {
      warnings.push_back("survival scan '" + name + "': " + e.what() + "; p set to 1");
    }
    p.push_back(row.p_raw);
    rows.push_back(std::move(row));
  }
  const auto corrected = stats::holm_bonferroni(p, p.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].p_corrected = corrected[i];
  return rows;
}

}  // namespace drf::cli
