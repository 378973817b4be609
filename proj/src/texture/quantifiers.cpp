#include <cmath>
#include <sstream>

#include "drf/texture.hpp"

namespace drf::texture {

namespace {

constexpr std::array<FeatureName, kQuantifierCount> kQuantifiers = {{
    {"Mean", Group::Histogram},
    {"Variance", Group::Histogram},
    {"Skewness", Group::Histogram},
    {"Kurtosis", Group::Histogram},
    {"Energy", Group::Histogram},
    {"Entropy", Group::Histogram},
    {"Angular second moment-GLCM", Group::Glcm},
    {"Contrast-GLCM", Group::Glcm},
    {"Correlation-GLCM", Group::Glcm},
    {"Sum of squares variance-GLCM", Group::Glcm},
    {"Inverse difference moment-GLCM", Group::Glcm},
    {"Sum average-GLCM", Group::Glcm},
    {"Sum variance-GLCM", Group::Glcm},
    {"Sum Entropy-GLCM", Group::Glcm},
    {"Entropy-GLCM", Group::Glcm},
    {"Difference Variance-GLCM", Group::Glcm},
    {"Difference Entropy-GLCM", Group::Glcm},
    {"Information Correlation 1-GLCM", Group::Glcm},
    {"Information Correlation 2-GLCM", Group::Glcm},
    {"Autocorrelation-GLCM", Group::Glcm},
    {"Dissimilarity-GLCM", Group::Glcm},
    {"Maximum Probability-GLCM", Group::Glcm},
    {"Cluster Shade-GLCM", Group::Glcm},
    {"Coarseness-NGTDM", Group::Ngtdm},
    {"Contrast-NGTDM", Group::Ngtdm},
    {"Busyness-NGTDM", Group::Ngtdm},
    {"Complexity-NGTDM", Group::Ngtdm},
    {"Texture Strength-NGTDM", Group::Ngtdm},
    {"Small Zone Size Emphasis-GLSZM", Group::Glszm},
    {"Large Zone Size Emphasis-GLSZM", Group::Glszm},
    {"Gray-Level Non-Uniformity-GLSZM", Group::Glszm},
    {"Zone Size Non-Uniformity-GLSZM", Group::Glszm},
    {"Zone Size Percentage-GLSZM", Group::Glszm},
    {"Low Gray-Level Zone Emphasis-GLSZM", Group::Glszm},
    {"High Gray-Level Zone Emphasis-GLSZM", Group::Glszm},
    {"Small Zone / Low Gray Emphasis-GLSZM", Group::Glszm},
    {"Small Zone / High Gray Emphasis-GLSZM", Group::Glszm},
    {"Large Zone / Low Gray Emphasis-GLSZM", Group::Glszm},
    {"Large Zone / High Gray Emphasis-GLSZM", Group::Glszm},
    {"Gray-Level Variance-GLSZM", Group::Glszm},
    {"Zone-Size Variance-GLSZM", Group::Glszm},
}};

constexpr std::array<FeatureName, kShapeCount> kShape = {{
    {"Porosity", Group::Shape},
    {"Fractal Dimension", Group::Shape},
    {"Surface Area", Group::Shape},
    {"Volume", Group::Shape},
}};

std::vector<double> level_distribution(const QuantizedRoi& q, std::size_t& count) {
  std::vector<double> hist(static_cast<std::size_t>(q.levels), 0.0);
  count = 0;
  for (int g : q.grid.data()) {
    if (g <= 0) continue;
    if (g > q.levels) throw Error("quantized level " + std::to_string(g) + " exceeds level count");
    hist[static_cast<std::size_t>(g - 1)] += 1.0;
    ++count;
  }
  if (count == 0) throw EmptyRoi("quantized ROI has no in-mask voxels");
  for (double& h : hist) h /= static_cast<double>(count);
  return hist;
}

// Constant-region NGTDM: every in-mask voxel counted, zero deviations.
Ngtdm constant_ngtdm(const QuantizedRoi& q) {
  Ngtdm n;
  n.levels = q.levels;
  n.s.assign(static_cast<std::size_t>(q.levels), 0.0);
  n.n.assign(static_cast<std::size_t>(q.levels), 0.0);
  for (int g : q.grid.data())
    if (g > 0) n.n[static_cast<std::size_t>(g - 1)] += 1.0;
  for (double c : n.n) n.valid_voxels += c;
  n.p.resize(n.n.size());
  for (std::size_t i = 0; i < n.n.size(); ++i) n.p[i] = n.n[i] / n.valid_voxels;
  return n;
}

}  // namespace

std::string_view group_name(Group g) {
  switch (g) {
    case Group::Histogram: return "histogram";
    case Group::Glcm: return "glcm";
    case Group::Ngtdm: return "ngtdm";
    case Group::Glszm: return "glszm";
    case Group::Shape: return "shape";
  }
  return "unknown";
}

std::span<const FeatureName, kQuantifierCount> quantifier_names() { return kQuantifiers; }
std::span<const FeatureName, kShapeCount> shape_names() { return kShape; }

std::string feature_manifest_text() {
  std::ostringstream os;
  os << "# " << kFeatureManifestVersion << "\n";
  os << "index\tgroup\tname\n";
  std::size_t i = 0;
  for (const auto& f : kQuantifiers) os << i++ << '\t' << group_name(f.group) << '\t' << f.name << '\n';
  for (const auto& f : kShape) os << i++ << '\t' << group_name(f.group) << '\t' << f.name << '\n';
  return os.str();
}

HistogramFeatures histogram_features(const QuantizedRoi& q) {
  std::size_t count = 0;
  const auto p = level_distribution(q, count);

  double mean = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mean += static_cast<double>(i + 1) * p[i];
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, energy = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    const double d = static_cast<double>(i + 1) - mean;
    m2 += d * d * p[i];
    m3 += d * d * d * p[i];
    m4 += d * d * d * d * p[i];
    energy += p[i] * p[i];
    entropy -= p[i] * std::log2(p[i]);
  }
  double skew = 0.0, kurt = 0.0;
  if (m2 > 0.0) {
    skew = m3 / std::pow(m2, 1.5);
    kurt = m4 / (m2 * m2);
  }
  return {mean, m2, skew, kurt, energy, entropy};
}

QuantifierVector compute_quantifiers(const QuantizedRoi& q) {
  QuantifierVector out{};
  std::size_t k = 0;
  for (double v : histogram_features(q)) out[k++] = v;

  Glcm glcm;
  try {
    glcm = compute_glcm(q);
  } catch (const DegenerateMatrix&) {
    // No neighbouring pairs: treat as a constant region at the mean level.
    const double mean = histogram_features(q)[0];
    glcm = diagonal_glcm(q.levels, static_cast<int>(std::lround(mean)));
  }
  for (double v : glcm_features(glcm)) out[k++] = v;

  Ngtdm ngtdm;
  try {
    ngtdm = compute_ngtdm(q);
  } catch (const DegenerateMatrix&) {
    ngtdm = constant_ngtdm(q);
  }
  for (double v : ngtdm_features(ngtdm)) out[k++] = v;

  std::size_t n_voxels = 0;
  for (int g : q.grid.data())
    if (g > 0) ++n_voxels;
  for (double v : glszm_features(compute_glszm(q), n_voxels)) out[k++] = v;
  return out;
}

}  // namespace drf::texture
