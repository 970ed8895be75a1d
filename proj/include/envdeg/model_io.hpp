#pragma once

#include "envdeg/estimation.hpp"

#include <json.hpp>

#include <filesystem>

namespace envdeg {

inline constexpr int model_schema_version = 1;

/// {"format":"envdeg-model","version":1,"K","q","M","knots","pi","mu",
///  "lambda" (row-major per cluster),"sigma"}. Doubles round-trip exactly.
nlohmann::json model_to_json(const ModelParams& params);
ModelParams model_from_json(const nlohmann::json& doc);

void write_model(const ModelParams& params, const std::filesystem::path& path,
                 const nlohmann::json& metadata = nlohmann::json::object());
ModelParams read_model(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace envdeg
