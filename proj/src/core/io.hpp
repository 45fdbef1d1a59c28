#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "curves.hpp"
#include "fit.hpp"
#include "inference.hpp"
#include "simulate.hpp"

namespace dcfr {

inline constexpr const char* kArtifactVersion = "1";

// First column time, one curve per remaining column, header row required.
CurveSample load_curves(const std::filesystem::path& path);
void save_curves(const std::filesystem::path& path, const CurveSample& sample, const std::string& prefix = "curve");

// Writes to a sibling temp file and renames it over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

nlohmann::json config_to_json(const FitConfig& cfg);
FitConfig config_from_json(const nlohmann::json& j);

nlohmann::json fit_to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);
void save_fit(const std::filesystem::path& path, const FitResult& fit);
FitResult load_fit(const std::filesystem::path& path);

// Long format s,t,value; s > t rows carry an exact 0.
std::string surface_csv(const SurfaceGrid& g, const std::string& value_name = "value");
std::string warps_csv(const FitResult& fit);
std::string paths_csv(const FitResult& fit);

std::string mc_report_csv(const MCReport& rep);
nlohmann::json mc_report_json(const MCReport& rep);

std::string format_double(double v);

} // namespace dcfr
