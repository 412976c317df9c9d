#pragma once

#include <spillover/common.hpp>
#include <spillover/csv.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace spillover::report {

// A table in both layouts: delimited (the contract) and aligned text (for reading).
struct Rendered {
  std::string csv;
  std::string text;
};

// Display label ("NC") and long name ("Number of claims") of a frame variable.
std::string abbreviation(const std::string& variable);
std::string long_name(const std::string& variable);

// Fixed three-decimal rendering; negative zero prints as 0.000.
std::string fixed3(double value);

// Pads columns to equal display width; the first left_columns are left aligned, the rest right
// aligned. The last filled cell of each of the first spanning_rows rows is printed unpadded.
std::string align(const std::vector<std::vector<std::string>>& rows, std::size_t spanning_rows = 0,
                  std::size_t left_columns = 1);

// From regression/descriptive.csv.
Rendered descriptive_table(const csv::Table& descriptive);

// From regression/regression_report.json. Effects columns are omitted when the SLX fit is absent.
Rendered regression_table(const nlohmann::json& regression);

// From regression_report.json robustness entries; reach rows use reach_summary.json when given.
Rendered robustness_table(const nlohmann::json& regression, const nlohmann::json& reach_summary);

// Non-skipped sweep points of both profiles with a significance flag at the sweep alpha.
std::string reach_curve(const csv::Table& inverse_distance, const csv::Table* inverse_square, double alpha);

// Reads the artifacts under artifact_dir and writes report/ tables. Throws InvalidArgument
// naming a missing regression artifact.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& artifact_dir);

}  // namespace spillover::report
