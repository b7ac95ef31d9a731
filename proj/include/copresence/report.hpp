#pragma once

#include "copresence/errors.hpp"
#include "copresence/objectives.hpp"
#include "copresence/trainer.hpp"
#include "copresence/version.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace copresence::report {

/// Shortest round-trip text for finite values, "nan" otherwise.
[[nodiscard]] std::string num(double v);

[[nodiscard]] nlohmann::json summary_json(const objectives::MetricSummary& s);

[[nodiscard]] objectives::MetricSummary summary_from_json(const nlohmann::json& j);

inline constexpr const char* kCategoryRule =
    "per-category rows average samples whose ground truth for that category is > 0";

[[nodiscard]] nlohmann::json estimation_json(const train::Evaluation& ev, const std::vector<std::string>& categories);

[[nodiscard]] nlohmann::json classification_json(const train::Evaluation& ev,
                                                 const std::vector<std::string>& categories);

[[nodiscard]] std::string estimation_csv(const nlohmann::json& est);

[[nodiscard]] std::string strata_csv(const nlohmann::json& est);

[[nodiscard]] std::string classification_csv(const nlohmann::json& cls);

// ---------------------------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------------------------

/// Serialized run record. Wall time is omitted so identical runs produce identical bytes.
[[nodiscard]] nlohmann::json run_record_json(const train::RunRecord& r);

[[nodiscard]] std::string loss_curve_csv(const train::RunRecord& r);

// ---------------------------------------------------------------------------------------------
// SVG figures
// ---------------------------------------------------------------------------------------------

[[nodiscard]] std::string xml_escape(const std::string& s);

struct Series {
    std::string name;
    std::vector<double> values;
};

inline constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                        "#ff7f0e", "#9467bd", "#8c564b"};

/// Grouped vertical bar chart: one group per label, one bar per series.
[[nodiscard]] std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                                        const std::vector<Series>& series);

/// Line chart over x = 1..N.
[[nodiscard]] std::string svg_line_chart(const std::string& title, const std::vector<Series>& series);

[[nodiscard]] std::string loss_curve_svg(const train::RunRecord& r);

// ---------------------------------------------------------------------------------------------
// Comparisons and ablation tables
// ---------------------------------------------------------------------------------------------

/// (ours − base)/base; NaN when the base is zero or either side is missing.
[[nodiscard]] double relative_delta(double ours, double base);

[[nodiscard]] std::string percent(double fraction);

struct NamedEstimation {
    std::string name;
    nlohmann::json estimation;  // as produced by estimation_json
};

/// Table with one row per (run, category) and, when more than one run is given, delta columns
/// of each later run against the first.
[[nodiscard]] std::string comparison_csv(const std::vector<NamedEstimation>& runs, const std::string& rows_key,
                                         const std::string& label_key);

[[nodiscard]] nlohmann::json ablation_json(const train::AblationTable& t);

[[nodiscard]] std::string ablation_csv(const train::AblationTable& t);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace copresence::report
