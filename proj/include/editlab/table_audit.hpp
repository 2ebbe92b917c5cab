#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace editlab {

// One published results row: the four quadrant cells plus the printed
// discrepancy block they should imply.
struct AuditRow {
    std::string dataset;
    std::string method;
    double pp = 0.0, pn = 0.0, nn = 0.0, np = 0.0;
    double printed_pp_pn = 0.0, printed_pp_np = 0.0, printed_nn_pn = 0.0, printed_nn_np = 0.0;
    double printed_avg = 0.0;
};

struct AuditRowResult {
    AuditRow row;
    double pp_pn = 0.0, pp_np = 0.0, nn_pn = 0.0, nn_np = 0.0, avg = 0.0;  // recomputed
    bool discrepancies_consistent = false;  // all four printed columns within tolerance
    bool avg_consistent = false;
    std::vector<std::string> mismatches;  // which printed columns disagree
};

struct AuditReport {
    std::string table_id;
    double tolerance = 0.1;
    std::vector<AuditRowResult> rows;
    int n_consistent = 0;
    int n_flagged = 0;

    nlohmann::json to_json() const;
    std::string to_text() const;  // one status line per row plus a summary
};

// Recomputes every row's discrepancy block from its cells and compares with
// the printed values within tolerance. Inconsistent rows are flagged, never
// forced to agree.
AuditReport audit_table(const nlohmann::json& table, double tolerance = 0.1);
AuditReport audit_table_file(const std::string& path, double tolerance = 0.1);

}  // namespace editlab
