#pragma once

#include <string>

#include <json.hpp>

#include "repmatch/grassmann.hpp"
#include "repmatch/pipeline.hpp"

namespace repmatch {

enum class OutputFormat { json, csv, text };

OutputFormat parse_format(const std::string& name);

// display_scale multiplies scores in text output only; JSON and CSV hold the
// raw values in [0, 1].
nlohmann::json to_json(const RepMatchReport& report);
std::string to_csv(const RepMatchReport& report);
std::string to_text(const RepMatchReport& report, double display_scale = 1.0);
std::string render(const RepMatchReport& report, OutputFormat format, double display_scale = 1.0);

// Full r x r' grid: header "i\j,1,..,r'", one row per i.
std::string grid_csv(const SimilarityGrid& grid);
// 8-bit greyscale PGM, one pixel per cell, white = 1.
std::string grid_pgm(const SimilarityGrid& grid);

nlohmann::json to_json(const Ranking& ranking);
Ranking ranking_from_json(const nlohmann::json& json);
std::string to_csv(const Ranking& ranking);
std::string to_text(const Ranking& ranking, double display_scale = 1.0);
std::string render(const Ranking& ranking, OutputFormat format, double display_scale = 1.0);

nlohmann::json to_json(const ExperimentReport& report);
std::string to_csv(const ExperimentReport& report);
std::string to_text(const ExperimentReport& report, double display_scale = 1.0);
std::string render(const ExperimentReport& report, OutputFormat format, double display_scale = 1.0);

}  // namespace repmatch
