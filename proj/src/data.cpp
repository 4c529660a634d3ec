#include "repmatch/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "repmatch/error.hpp"
#include "repmatch/io.hpp"
#include "repmatch/rng.hpp"

namespace repmatch {

namespace {

// Stream tags so that independent draws never share a generator.
constexpr std::uint64_t kMeanStream = 1;
constexpr std::uint64_t kShiftStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kOutlierStream = 4;

std::optional<double> parse_double(const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

}  // namespace

void Dataset::validate() const {
  if (instances.empty()) throw DataError("dataset '" + name + "' is empty");
  const std::size_t d = feature_dim();
  if (d == 0) throw DataError("dataset '" + name + "' has zero-length features");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Instance& inst = instances[i];
    if (inst.features.size() != d) {
      throw DataError("dataset '" + name + "': instance " + std::to_string(i) + " has " +
                      std::to_string(inst.features.size()) + " features, expected " + std::to_string(d));
    }
    if (inst.label >= classes) {
      throw DataError("dataset '" + name + "': instance " + std::to_string(i) + " label " +
                      std::to_string(inst.label) + " >= classes " + std::to_string(classes));
    }
    for (double v : inst.features)
      if (!std::isfinite(v)) throw DataError("dataset '" + name + "': instance " + std::to_string(i) + " has a non-finite feature");
  }
}

std::vector<std::size_t> Dataset::label_histogram() const {
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& inst : instances)
    if (inst.label < classes) ++counts[inst.label];
  return counts;
}

std::vector<std::vector<double>> family_means(std::uint64_t family_seed, std::uint64_t variant_seed,
                                              std::size_t d, std::size_t classes, double shift,
                                              const FamilyOptions& options) {
  Rng base(mix_seed(family_seed, kMeanStream));
  Rng variant(mix_seed(variant_seed, kShiftStream));
  std::vector<std::vector<double>> means(classes, std::vector<double>(d));
  for (auto& mean : means)
    for (double& v : mean) v = options.mean_scale * base.normal();
  if (shift != 0.0) {
    for (auto& mean : means)
      for (double& v : mean) v += shift * options.mean_scale * variant.normal();
  }
  // Centre the clusters on the origin so no class sits closer to the common
  // activation direction of the network than the others.
  for (std::size_t k = 0; k < d; ++k) {
    double centre = 0.0;
    for (const auto& mean : means) centre += mean[k];
    centre /= static_cast<double>(classes);
    for (auto& mean : means) mean[k] -= centre;
  }
  return means;
}

Dataset gen_family(std::uint64_t family_seed, std::uint64_t variant_seed, std::size_t n, std::size_t d,
                   std::size_t classes, double shift, const FamilyOptions& options) {
  if (d == 0 || classes == 0) throw DataError("gen_family: d and classes must be positive");
  if (shift < 0.0) throw DataError("gen_family: shift must be non-negative");
  if (!(options.outlier_fraction >= 0.0 && options.outlier_fraction <= 1.0))
    throw DataError("gen_family: outlier_fraction must lie in [0, 1]");
  const auto means = family_means(family_seed, variant_seed, d, classes, shift, options);
  Rng noise(mix_seed(variant_seed, kNoiseStream));
  Rng outliers(mix_seed(variant_seed, kOutlierStream));
  Dataset ds;
  ds.name = "family-" + std::to_string(family_seed) + "-v" + std::to_string(variant_seed);
  ds.classes = classes;
  ds.instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.label = i % classes;
    inst.features.resize(d);
    for (std::size_t k = 0; k < d; ++k) inst.features[k] = means[inst.label][k] + options.noise * noise.normal();
    if (options.outlier_fraction > 0.0 && outliers.uniform() < options.outlier_fraction) {
      for (double& v : inst.features) v = options.outlier_scale * outliers.normal();
      inst.meta["outlier"] = "1";
    }
    ds.instances.push_back(std::move(inst));
  }
  nlohmann::json prov = {{"generator", "family"}, {"family_seed", family_seed}, {"variant_seed", variant_seed},
                         {"n", n}, {"d", d}, {"classes", classes}, {"shift", shift},
                         {"mean_scale", options.mean_scale}, {"noise", options.noise},
                         {"outlier_fraction", options.outlier_fraction}, {"outlier_scale", options.outlier_scale}};
  ds.provenance = prov.dump();
  return ds;
}

Dataset gen_overlap(std::uint64_t seed, std::size_t n, std::size_t d, double lo, double hi, LabelRule rule,
                    const OverlapOptions& options) {
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) {
    throw DataError("gen_overlap: invalid overlap range [" + format_double(lo) + ", " + format_double(hi) + "]");
  }
  if (d == 0 || d % 2 != 0) throw DataError("gen_overlap: d must be positive and even");
  const std::size_t half = d / 2;
  Rng rng(seed);
  Dataset ds;
  ds.name = "overlap-" + std::to_string(seed);
  ds.classes = 2;
  ds.instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double omega = lo + (hi - lo) * rng.uniform();
    const auto shared = static_cast<std::size_t>(std::floor(omega * static_cast<double>(half)));
    Instance inst;
    inst.features.resize(d);
    for (std::size_t k = 0; k < half; ++k) inst.features[k] = rng.normal();
    for (std::size_t k = 0; k < half; ++k) inst.features[half + k] = k < shared ? inst.features[k] : rng.normal();
    const bool high = omega > 0.5;
    std::size_t label = (rule == LabelRule::correlated) == high ? kEntail : kNonEntail;
    if (options.flip_probability > 0.0 && rng.uniform() < options.flip_probability) label = 1 - label;
    inst.label = label;
    inst.meta["overlap"] = format_double(omega);
    ds.instances.push_back(std::move(inst));
  }
  nlohmann::json prov = {{"generator", "overlap"}, {"seed", seed}, {"n", n}, {"d", d}, {"lo", lo}, {"hi", hi},
                         {"rule", rule == LabelRule::correlated ? "correlated" : "anti"},
                         {"flip_probability", options.flip_probability}};
  ds.provenance = prov.dump();
  return ds;
}

Dataset overlap_grade_task(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t grades) {
  if (grades < 2) throw DataError("overlap_grade_task: need at least two grades");
  Dataset ds = gen_overlap(seed, n, d, 0.0, 1.0, LabelRule::correlated);
  ds.name = "overlap-grades-" + std::to_string(seed);
  ds.classes = grades;
  for (auto& inst : ds.instances) {
    const double omega = *parse_double(inst.meta.at("overlap"));
    inst.label = std::min(grades - 1, static_cast<std::size_t>(omega * static_cast<double>(grades)));
  }
  nlohmann::json prov = nlohmann::json::parse(ds.provenance);
  prov["generator"] = "overlap_grades";
  prov["grades"] = grades;
  ds.provenance = prov.dump();
  return ds;
}

std::size_t shared_prefix_length(const std::vector<double>& features) {
  const std::size_t half = features.size() / 2;
  std::size_t k = 0;
  while (k < half && features[k] == features[half + k]) ++k;
  return k;
}

Dataset parse_jsonl(const std::string& text, const std::string& name, std::optional<std::size_t> classes) {
  Dataset ds;
  ds.name = name;
  ds.provenance = name;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = name + ": line " + std::to_string(line_no) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      // NaN / Infinity tokens are not JSON and land here too.
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where + "expected an object");
    const auto features = obj.find("features");
    if (features == obj.end() || !features->is_array()) throw DataError(where + "missing field 'features'");
    const auto label = obj.find("label");
    if (label == obj.end() || !label->is_number_unsigned()) throw DataError(where + "missing field 'label'");
    Instance inst;
    inst.label = label->get<std::size_t>();
    for (const auto& v : *features) {
      if (!v.is_number()) throw DataError(where + "non-numeric feature");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw DataError(where + "non-finite feature");
      inst.features.push_back(x);
    }
    if (!ds.instances.empty() && inst.features.size() != ds.instances.front().features.size()) {
      throw DataError(where + "ragged features: " + std::to_string(inst.features.size()) + " vs " +
                      std::to_string(ds.instances.front().features.size()));
    }
    if (const auto meta = obj.find("meta"); meta != obj.end()) {
      if (!meta->is_object()) throw DataError(where + "'meta' must be an object");
      for (const auto& [key, value] : meta->items())
        inst.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    max_label = std::max(max_label, inst.label);
    ds.instances.push_back(std::move(inst));
  }
  ds.classes = classes.value_or(ds.instances.empty() ? 0 : max_label + 1);
  if (!ds.instances.empty() && max_label >= ds.classes) {
    throw DataError(name + ": label " + std::to_string(max_label) + " >= classes " + std::to_string(ds.classes));
  }
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& path, std::optional<std::size_t> classes) {
  return parse_jsonl(read_text(path), path.string(), classes);
}

std::string to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& inst : dataset.instances) {
    nlohmann::json obj = {{"features", inst.features}, {"label", inst.label}, {"meta", inst.meta}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  write_atomic(path, to_jsonl(dataset));
}

std::vector<std::size_t> sample_indices(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                                        const std::optional<MetaBin>& bin) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (bin) {
      const Instance& inst = dataset.instances[i];
      if (bin->label && inst.label != *bin->label) continue;
      const auto it = inst.meta.find(bin->key);
      if (it == inst.meta.end()) continue;
      const auto value = parse_double(it->second);
      if (!value || *value < bin->lo || *value > bin->hi) continue;
    }
    eligible.push_back(i);
  }
  if (bin && eligible.empty()) {
    throw DataError("sample_subset: empty bin " + bin->key + " in [" + format_double(bin->lo) + ", " +
                    format_double(bin->hi) + "]");
  }
  if (k > eligible.size()) {
    throw DataError("sample_subset: k=" + std::to_string(k) + " exceeds the " + std::to_string(eligible.size()) +
                    " eligible instances");
  }
  // Partial Fisher-Yates: the first k slots end up holding the draw.
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(k);
  return eligible;
}

Dataset sample_subset(const Dataset& dataset, std::size_t k, std::uint64_t seed, const std::optional<MetaBin>& bin) {
  return subset(dataset, sample_indices(dataset, k, seed, bin),
                dataset.name + "-sample" + std::to_string(k) + "-s" + std::to_string(seed));
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices, std::string name) {
  Dataset out;
  out.name = std::move(name);
  out.classes = dataset.classes;
  out.provenance = dataset.provenance;
  out.instances.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= dataset.size()) throw DataError("subset: index " + std::to_string(i) + " out of range");
    out.instances.push_back(dataset.instances[i]);
  }
  return out;
}

Dataset concat(const std::vector<Dataset>& parts, std::string name) {
  Dataset out;
  out.name = std::move(name);
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& part : parts) {
    out.classes = std::max(out.classes, part.classes);
    out.instances.insert(out.instances.end(), part.instances.begin(), part.instances.end());
    prov.push_back(part.provenance);
  }
  out.provenance = prov.dump();
  return out;
}

}  // namespace repmatch
