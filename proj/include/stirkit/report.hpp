#pragma once

// Report artifacts: flat CSV tables, an SVG scatter regenerated from CSV
// text alone, and JSON documents that embed the resolved configuration.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stirkit/iri.hpp"
#include "stirkit/model.hpp"
#include "stirkit/stir.hpp"

namespace stirkit {

using Json = nlohmann::ordered_json;

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string to_string() const;
    /// Strict parser for the tables written by to_string (no quoting).
    static CsvTable parse(std::string_view text);
    std::size_t column(std::string_view name) const;
};

/// One row per report: direction,stir_mean,stir_stderr,cka,agreement,delta,rejected.
/// Direction reads "target|reference", with ":adversarial" appended for STIR_adv.
CsvTable stir_table(const std::vector<StirReport>& reports);

std::string direction_label(const StirReport& r);

/// Scatter of every numeric column against the first, with one OLS line
/// through all points. 640×480, circles of radius 3, axis labels from the
/// header. A pure function of the CSV text.
std::string svg_scatter(std::string_view csv_text);

Json to_json(const Architecture& arch);
Json to_json(const TrainConfig& cfg);
Json to_json(const InversionConfig& cfg);
Json to_json(const StirConfig& cfg);
Json to_json(const StirReport& r);
Json to_json(const LineFit& fit);

/// Numbers that may be NaN/∞ go to JSON as null.
Json json_number(double v);

struct ReportBundle {
    Json report;
    CsvTable csv;
    std::optional<std::string> svg;
};

/// Writes <dir>/<stem>.json, <dir>/<stem>.csv and, if present, <dir>/<stem>.svg.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir, const std::string& stem);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace stirkit
