#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "drf/pipeline.hpp"
#include "json.hpp"

namespace drf::pipeline {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

double number_field(const json& j, const char* key, const std::string& who) {
  if (!j.contains(key)) throw ManifestError(who + ": missing field '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ManifestError(who + ": field '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ManifestError(who + ": field '" + key + "' is not finite");
  return d;
}

ManifestEntry parse_entry(const json& j, std::size_t index, const std::filesystem::path& base) {
  std::string who = "manifest entry " + std::to_string(index);
  if (!j.is_object()) throw ManifestError(who + " is not an object");
  ManifestEntry e;
  if (!j.contains("id")) throw ManifestError(who + ": missing field 'id'");
  e.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  who = "patient " + e.id;

  for (Modality m : kAllModalities) {
    const std::string key(modality_key(m));
    if (j.contains(key)) {
      if (!j.at(key).is_string()) throw ManifestError(who + ": '" + key + "' must be a path string");
      e.images[m] = resolve(base, j.at(key).get<std::string>());
    }
  }
  if (j.contains("mask")) {
    if (!j.at("mask").is_string()) throw ManifestError(who + ": 'mask' must be a path string");
    e.mask = resolve(base, j.at("mask").get<std::string>());
  }
  if (j.contains("masks")) {
    if (!j.at("masks").is_object()) throw ManifestError(who + ": 'masks' must be an object");
    for (const auto& [key, value] : j.at("masks").items()) {
      const auto m = parse_modality(key);
      if (!m) throw ManifestError(who + ": unknown modality '" + key + "' in masks");
      if (!value.is_string()) throw ManifestError(who + ": mask path for '" + key + "' must be a string");
      e.masks[*m] = resolve(base, value.get<std::string>());
    }
  }
  if (!e.mask && e.masks.empty()) throw ManifestError(who + ": no 'mask' or 'masks' given");

  e.age = number_field(j, "age", who);
  if (!j.contains("gender") || !j.at("gender").is_string()) throw ManifestError(who + ": 'gender' must be a string");
  const auto g = parse_gender(j.at("gender").get<std::string>());
  if (!g) throw ManifestError(who + ": unrecognised gender '" + j.at("gender").get<std::string>() + "'");
  e.gender = *g;
  e.survival_days = number_field(j, "survival_days", who);
  if (e.survival_days < 0.0) throw ManifestError(who + ": survival_days is negative");

  if (!j.contains("censored")) throw ManifestError(who + ": missing field 'censored'");
  const auto& c = j.at("censored");
  if (c.is_boolean()) {
    e.censorship = c.get<bool>();
  } else if (c.is_number_integer() && (c.get<int>() == 0 || c.get<int>() == 1)) {
    e.censorship = c.get<int>() == 1;
  } else {
    throw ManifestError(who + ": 'censored' must be 0, 1, true or false");
  }

  if (!j.contains("immune") || !j.at("immune").is_object()) throw ManifestError(who + ": 'immune' must be an object");
  const auto& imm = j.at("immune");
  const auto& names = immune_marker_names();
  if (imm.size() != names.size())
    throw ManifestError(who + ": expected " + std::to_string(names.size()) + " immune markers, got " +
                        std::to_string(imm.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string name(names[k]);
    const double v = number_field(imm, name.c_str(), who + " immune");
    if (v < 0.0 || v > 1.0) throw ManifestError(who + ": immune fraction '" + name + "' outside [0, 1]");
    e.immune[k] = v;
  }
  return e;
}

[[noreturn]] void ingest_fail(std::size_t line, const std::string& msg) {
  throw IngestError("features CSV line " + std::to_string(line) + ": " + msg);
}

double parse_number(std::string_view s, std::size_t line, const std::string& column) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) ingest_fail(line, "column '" + column + "' is not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ManifestError(std::string("manifest is not valid JSON: ") + e.what());
  }
  const json* list = &doc;
  if (doc.is_object() && doc.contains("patients")) list = &doc.at("patients");
  if (!list->is_array()) throw ManifestError("manifest must be a JSON array of patients");
  if (list->empty()) throw ManifestError("manifest lists no patients");

  std::vector<ManifestEntry> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list->size(); ++i) {
    out.push_back(parse_entry((*list)[i], i, base_dir));
    if (!ids.insert(out.back().id).second) throw ManifestError("duplicate patient id '" + out.back().id + "'");
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot read manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) ingest_fail(line, "quote inside an unquoted field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 >= text.size() || text[i + 1] != '\n') ingest_fail(line, "bare carriage return");
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        field_started = false;
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) ingest_fail(line, "unterminated quoted field");
  if (field_started || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_feature_csv(const FeatureTable& t) {
  std::string out;
  const auto cols = t.all_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(cols[i]);
  }
  out += "\r\n";
  for (const auto& p : t.patients) {
    if (p.drf.values.size() != t.drf_columns.size())
      throw Error("patient " + p.id + " has " + std::to_string(p.drf.values.size()) + " DRF values, table expects " +
                  std::to_string(t.drf_columns.size()));
    out += csv_escape(p.id);
    out += ',' + format_double(p.age);
    out += ',' + std::string(gender_name(p.gender));
    out += ',' + format_double(p.survival_days);
    out += p.censorship ? ",1" : ",0";
    out += ',' + format_double(p.survival_days / 30.44);
    for (double v : p.immune) out += ',' + format_double(v);
    for (double v : p.drf.values) out += ',' + format_double(v);
    out += "\r\n";
  }
  return out;
}

FeatureTable parse_feature_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw IngestError("features CSV is empty");
  const auto& header = rows.front();
  const std::size_t fixed = kMetadataColumnCount + kImmuneMarkerCount;
  if (header.size() < fixed) throw IngestError("features CSV header has too few columns");
  for (std::size_t i = 0; i < kMetadataColumnCount; ++i)
    if (header[i] != metadata_column_names()[i])
      throw IngestError("features CSV column " + std::to_string(i) + " should be '" +
                        std::string(metadata_column_names()[i]) + "', found '" + header[i] + "'");
  for (std::size_t k = 0; k < kImmuneMarkerCount; ++k)
    if (header[kMetadataColumnCount + k] != immune_marker_names()[k])
      throw IngestError("features CSV immune column " + std::to_string(k) + " should be '" +
                        std::string(immune_marker_names()[k]) + "', found '" + header[kMetadataColumnCount + k] + "'");

  FeatureTable t;
  t.drf_columns.assign(header.begin() + static_cast<long>(fixed), header.end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
    if (row.size() != header.size())
      ingest_fail(line, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(row.size()));
    PatientRecord p;
    p.id = row[0];
    p.age = parse_number(row[1], line, "age");
    const auto g = parse_gender(row[2]);
    if (!g) ingest_fail(line, "unrecognised gender '" + row[2] + "'");
    p.gender = *g;
    p.survival_days = parse_number(row[3], line, "survival_days");
    if (row[4] != "0" && row[4] != "1") ingest_fail(line, "censorship must be 0 or 1");
    p.censorship = row[4] == "1";
    parse_number(row[5], line, "survival_months");
    for (std::size_t k = 0; k < kImmuneMarkerCount; ++k)
      p.immune[k] = parse_number(row[kMetadataColumnCount + k], line, header[kMetadataColumnCount + k]);
    p.drf.names = t.drf_columns;
    for (std::size_t c = fixed; c < row.size(); ++c) p.drf.values.push_back(parse_number(row[c], line, header[c]));
    t.patients.push_back(std::move(p));
  }
  return t;
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read features CSV " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_feature_csv(ss.str());
}

std::string column_manifest_json(const FeatureTable& t) {
  std::map<std::string, std::pair<std::string, std::string>> drf_info;  // name -> (group, modality)
  for (Modality m : kAllModalities) {
    const auto names = drf_column_names({m});
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto group = i < texture::kQuantifierCount ? texture::quantifier_names()[i].group
                                                       : texture::shape_names()[i - texture::kQuantifierCount].group;
      drf_info[names[i]] = {std::string(texture::group_name(group)), std::string(modality_key(m))};
    }
  }

  json cols = json::array();
  std::size_t index = 0;
  for (auto n : metadata_column_names()) cols.push_back({{"index", index++}, {"name", n}, {"group", "metadata"}});
  for (auto n : immune_marker_names()) cols.push_back({{"index", index++}, {"name", n}, {"group", "immune"}});
  for (const auto& n : t.drf_columns) {
    json c = {{"index", index++}, {"name", n}};
    if (const auto it = drf_info.find(n); it != drf_info.end()) {
      c["group"] = it->second.first;
      c["modality"] = it->second.second;
    } else {
      c["group"] = "unknown";
    }
    cols.push_back(std::move(c));
  }
  json doc = {{"version", texture::kFeatureManifestVersion}, {"columns", std::move(cols)}};
  return doc.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(tid % 1000000);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace drf::pipeline
