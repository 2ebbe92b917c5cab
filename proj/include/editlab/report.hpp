#pragma once

#include <string>

#include <json.hpp>

#include "editlab/evalsuite.hpp"

namespace editlab {

inline constexpr const char* kToolName = "editlab";
inline constexpr const char* kToolVersion = "0.1.0";

// The three report renderings written by the pipeline. Content is a pure
// function of the metrics and the config hash (no timestamps), so identical
// runs produce byte-identical files.
struct ReportBundle {
    nlohmann::json json;  // raw full-precision values
    std::string text;     // aligned table, one decimal place
    std::string csv;      // one value per row, full precision
};

ReportBundle render_metrics_report(const MetricsReport& report, const std::string& config_hash);

}  // namespace editlab
