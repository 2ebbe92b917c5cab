#include "editlab/table_audit.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "editlab/error.hpp"
#include "editlab/text.hpp"

namespace editlab {

namespace {

double need_number(const nlohmann::json& j, const char* field, const std::string& where) {
    if (!j.contains(field) || !j.at(field).is_number())
        throw validation_error(where + ": missing numeric field " + field);
    return j.at(field).get<double>();
}

}  // namespace

AuditReport audit_table(const nlohmann::json& table, double tolerance) {
    if (!table.is_object() || !table.contains("rows") || !table.at("rows").is_array())
        throw validation_error("audit table must be an object with a 'rows' array");
    AuditReport report;
    report.table_id = table.value("table_id", std::string("unnamed table"));
    report.tolerance = tolerance;

    size_t index = 0;
    for (const auto& jrow : table.at("rows")) {
        const std::string where = "row " + std::to_string(index);
        AuditRow row;
        row.dataset = jrow.value("dataset", std::string(""));
        row.method = jrow.value("method", std::string(""));
        if (!jrow.contains("cells") || !jrow.contains("printed"))
            throw validation_error(where + ": needs 'cells' and 'printed' objects");
        const auto& cells = jrow.at("cells");
        const auto& printed = jrow.at("printed");
        row.pp = need_number(cells, "pp", where);
        row.pn = need_number(cells, "pn", where);
        row.nn = need_number(cells, "nn", where);
        row.np = need_number(cells, "np", where);
        row.printed_pp_pn = need_number(printed, "pp_pn", where);
        row.printed_pp_np = need_number(printed, "pp_np", where);
        row.printed_nn_pn = need_number(printed, "nn_pn", where);
        row.printed_nn_np = need_number(printed, "nn_np", where);
        row.printed_avg = need_number(printed, "avg", where);

        AuditRowResult res;
        res.row = row;
        res.pp_pn = row.pp - row.pn;
        res.pp_np = row.pp - row.np;
        res.nn_pn = row.nn - row.pn;
        res.nn_np = row.nn - row.np;
        res.avg = (res.pp_pn + res.pp_np + res.nn_pn + res.nn_np) / 4.0;

        const auto within = [&](double recomputed, double printed_v) {
            return std::abs(recomputed - printed_v) <= tolerance + 1e-12;
        };
        if (!within(res.pp_pn, row.printed_pp_pn)) res.mismatches.push_back("PP-PN");
        if (!within(res.pp_np, row.printed_pp_np)) res.mismatches.push_back("PP-NP");
        if (!within(res.nn_pn, row.printed_nn_pn)) res.mismatches.push_back("NN-PN");
        if (!within(res.nn_np, row.printed_nn_np)) res.mismatches.push_back("NN-NP");
        res.discrepancies_consistent = res.mismatches.empty();
        res.avg_consistent = within(res.avg, row.printed_avg);
        if (!res.avg_consistent) res.mismatches.push_back("Avg");

        if (res.discrepancies_consistent && res.avg_consistent)
            ++report.n_consistent;
        else
            ++report.n_flagged;
        report.rows.push_back(std::move(res));
        ++index;
    }
    return report;
}

AuditReport audit_table_file(const std::string& path, double tolerance) {
    nlohmann::json table;
    try {
        table = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error("cannot parse audit table '" + path + "': " + e.what());
    }
    return audit_table(table, tolerance);
}

nlohmann::json AuditReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back(nlohmann::json{
            {"dataset", r.row.dataset},
            {"method", r.row.method},
            {"cells", {{"pp", r.row.pp}, {"pn", r.row.pn}, {"nn", r.row.nn}, {"np", r.row.np}}},
            {"printed",
             {{"pp_pn", r.row.printed_pp_pn},
              {"pp_np", r.row.printed_pp_np},
              {"nn_pn", r.row.printed_nn_pn},
              {"nn_np", r.row.printed_nn_np},
              {"avg", r.row.printed_avg}}},
            {"recomputed",
             {{"pp_pn", r.pp_pn},
              {"pp_np", r.pp_np},
              {"nn_pn", r.nn_pn},
              {"nn_np", r.nn_np},
              {"avg", r.avg}}},
            {"status", r.mismatches.empty() ? "consistent" : "inconsistent"},
            {"mismatched_columns", r.mismatches}});
    }
    return nlohmann::json{{"table_id", table_id},
                          {"tolerance", tolerance},
                          {"n_consistent", n_consistent},
                          {"n_flagged", n_flagged},
                          {"rows", rows_json}};
}

std::string AuditReport::to_text() const {
    std::ostringstream os;
    os << "table audit: " << table_id << " (tolerance " << tolerance << ")\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%-14s %-10s cells (%5.1f, %5.1f, %5.1f, %5.1f) -> "
                      "(%5.1f, %5.1f, %5.1f, %5.1f) avg %5.1f  %s",
                      r.row.dataset.c_str(), r.row.method.c_str(), r.row.pp, r.row.pn, r.row.nn,
                      r.row.np, r.pp_pn, r.pp_np, r.nn_pn, r.nn_np, r.avg,
                      r.mismatches.empty() ? "consistent" : "INCONSISTENT");
        os << buf;
        if (!r.mismatches.empty()) os << " [" << join(r.mismatches, ", ") << "]";
        os << "\n";
    }
    os << rows.size() << " rows: " << n_consistent << " consistent, " << n_flagged
       << " flagged\n";
    return os.str();
}

}  // namespace editlab
