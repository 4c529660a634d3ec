#include "repmatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "repmatch/error.hpp"
#include "repmatch/hash.hpp"
#include "repmatch/io.hpp"

namespace repmatch {

namespace {

nlohmann::json tag_json(const BundleTag& tag) {
  return {{"model_tag", tag.model_tag}, {"content_hash", hash_to_hex(tag.content_hash)}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int decimals) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(decimals);
  out << v;
  return out.str();
}

}  // namespace

OutputFormat parse_format(const std::string& name) {
  if (name == "json") return OutputFormat::json;
  if (name == "csv") return OutputFormat::csv;
  if (name == "text") return OutputFormat::text;
  throw DataError("unknown output format '" + name + "' (json, csv, text)");
}

nlohmann::json to_json(const RepMatchReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : report.per_layer) {
    layers.push_back({{"layer_id", layer.layer_id},
                      {"score", layer.score},
                      {"r", layer.grid.r},
                      {"r_prime", layer.grid.r_prime},
                      {"grid", layer.grid.values}});
  }
  return {{"model_score", report.model_score},
          {"first", tag_json(report.first)},
          {"second", tag_json(report.second)},
          {"per_layer", layers}};
}

std::string to_csv(const RepMatchReport& report) {
  std::string out = "layer_id,score,r,r_prime\n";
  for (const auto& layer : report.per_layer) {
    out += csv_field(layer.layer_id) + "," + format_double(layer.score) + "," + std::to_string(layer.grid.r) + "," +
           std::to_string(layer.grid.r_prime) + "\n";
  }
  out += "model," + format_double(report.model_score) + ",,\n";
  return out;
}

std::string to_text(const RepMatchReport& report, double display_scale) {
  std::ostringstream out;
  out << "RepMatch " << report.first.model_tag << " [" << hash_to_hex(report.first.content_hash) << "] vs "
      << report.second.model_tag << " [" << hash_to_hex(report.second.content_hash) << "]\n";
  for (const auto& layer : report.per_layer) {
    out << "  " << layer.layer_id << "  " << fixed(layer.score * display_scale, 4) << "  (" << layer.grid.r << "x"
        << layer.grid.r_prime << ")\n";
  }
  out << "model  " << fixed(report.model_score * display_scale, 4) << "\n";
  return out.str();
}

std::string render(const RepMatchReport& report, OutputFormat format, double display_scale) {
  switch (format) {
    case OutputFormat::json: return to_json(report).dump(2) + "\n";
    case OutputFormat::csv: return to_csv(report);
    case OutputFormat::text: return to_text(report, display_scale);
  }
  return {};
}

std::string grid_csv(const SimilarityGrid& grid) {
  std::string out = "i\\j";
  for (std::size_t j = 1; j <= grid.r_prime; ++j) out += "," + std::to_string(j);
  out += "\n";
  for (std::size_t i = 1; i <= grid.r; ++i) {
    out += std::to_string(i);
    for (std::size_t j = 1; j <= grid.r_prime; ++j) out += "," + format_double(grid.at(i, j));
    out += "\n";
  }
  return out;
}

std::string grid_pgm(const SimilarityGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.r_prime) + " " + std::to_string(grid.r) + "\n255\n";
  for (double v : grid.values) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    out += static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0)));
  }
  return out;
}

nlohmann::json to_json(const Ranking& ranking) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : ranking.entries)
    entries.push_back({{"index", e.index}, {"score", e.score}, {"degenerate", e.degenerate}});
  return {{"dataset", ranking.dataset},
          {"ref_bundle_hash", hash_to_hex(ranking.ref_bundle_hash)},
          {"config", ranking.config},
          {"entries", entries}};
}

Ranking ranking_from_json(const nlohmann::json& json) {
  try {
    Ranking ranking;
    ranking.dataset = json.at("dataset").get<std::string>();
    const auto hash = hash_from_hex(json.at("ref_bundle_hash").get<std::string>());
    if (!hash) throw DataError("ranking: bad ref_bundle_hash");
    ranking.ref_bundle_hash = *hash;
    ranking.config = json.value("config", nlohmann::json::object());
    for (const auto& e : json.at("entries")) {
      ranking.entries.push_back(
          {e.at("index").get<std::size_t>(), e.at("score").get<double>(), e.value("degenerate", false)});
    }
    return ranking;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed ranking: ") + e.what());
  }
}

std::string to_csv(const Ranking& ranking) {
  std::string out = "rank,index,score,degenerate\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out += std::to_string(i + 1) + "," + std::to_string(e.index) + "," + format_double(e.score) + "," +
           (e.degenerate ? "1" : "0") + "\n";
  }
  return out;
}

std::string to_text(const Ranking& ranking, double display_scale) {
  std::ostringstream out;
  out << "ranking of " << ranking.dataset << " against " << hash_to_hex(ranking.ref_bundle_hash) << "\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out << "  " << (i + 1) << "  #" << e.index << "  " << fixed(e.score * display_scale, 4)
        << (e.degenerate ? "  degenerate" : "") << "\n";
  }
  return out.str();
}

std::string render(const Ranking& ranking, OutputFormat format, double display_scale) {
  switch (format) {
    case OutputFormat::json: return to_json(ranking).dump(2) + "\n";
    case OutputFormat::csv: return to_csv(ranking);
    case OutputFormat::text: return to_text(ranking, display_scale);
  }
  return {};
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json obj = {{"seed", row.seed}};
    for (const auto& [k, v] : row.labels) obj[k] = v;
    for (const auto& [k, v] : row.values) obj[k] = v;
    rows.push_back(std::move(obj));
  }
  return {{"experiment", report.experiment}, {"config", report.config}, {"seeds", report.seeds()}, {"rows", rows}};
}

std::string to_csv(const ExperimentReport& report) {
  std::set<std::string> label_keys;
  std::set<std::string> value_keys;
  for (const auto& row : report.rows) {
    for (const auto& [k, v] : row.labels) label_keys.insert(k);
    for (const auto& [k, v] : row.values) value_keys.insert(k);
  }
  std::string out = "seed";
  for (const auto& k : label_keys) out += "," + csv_field(k);
  for (const auto& k : value_keys) out += "," + csv_field(k);
  out += "\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.seed);
    for (const auto& k : label_keys) {
      const auto it = row.labels.find(k);
      out += "," + (it == row.labels.end() ? std::string() : csv_field(it->second));
    }
    for (const auto& k : value_keys) {
      const auto it = row.values.find(k);
      out += "," + (it == row.values.end() ? std::string() : format_double(it->second));
    }
    out += "\n";
  }
  return out;
}

std::string to_text(const ExperimentReport& report, double display_scale) {
  std::ostringstream out;
  out << report.experiment << "\n";
  for (const auto& row : report.rows) {
    out << "  seed=" << row.seed;
    for (const auto& [k, v] : row.labels) out << " " << k << "=" << v;
    for (const auto& [k, v] : row.values) {
      const bool score = k.starts_with("repmatch") || k == "mean" || k == "sd";
      out << " " << k << "=" << (score ? fixed(v * display_scale, 4) : format_double(v));
    }
    out << "\n";
  }
  return out.str();
}

std::string render(const ExperimentReport& report, OutputFormat format, double display_scale) {
  switch (format) {
    case OutputFormat::json: return to_json(report).dump(2) + "\n";
    case OutputFormat::csv: return to_csv(report);
    case OutputFormat::text: return to_text(report, display_scale);
  }
  return {};
}

}  // namespace repmatch
