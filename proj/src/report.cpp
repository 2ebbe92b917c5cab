#include "editlab/report.hpp"

#include <cstdio>
#include <sstream>

namespace editlab {

ReportBundle render_metrics_report(const MetricsReport& report, const std::string& config_hash) {
    ReportBundle out;

    out.json = nlohmann::json{{"tool", {{"name", kToolName}, {"version", kToolVersion}}},
                              {"config_hash", config_hash},
                              {"metrics", report.to_json()}};

    char buf[256];
    std::ostringstream txt;
    txt << "metric: " << metric_kind_name(report.metric_kind)
        << "    n per cell: " << report.n_per_cell << "\n\n";
    txt << "              Efficacy / Hallucination\n";
    txt << "                 PP       PN       NN       NP\n";
    std::snprintf(buf, sizeof(buf), "  score     %7.1f  %7.1f  %7.1f  %7.1f\n\n", report.pp,
                  report.pn, report.nn, report.np);
    txt << buf;
    txt << "              Discrepancy (Rectified Efficacy)\n";
    txt << "              PP-PN    PP-NP    NN-PN    NN-NP      Avg\n";
    std::snprintf(buf, sizeof(buf), "            %7.1f  %7.1f  %7.1f  %7.1f  %7.1f\n",
                  report.d_pp_pn, report.d_pp_np, report.d_nn_pn, report.d_nn_np, report.avg);
    txt << buf;
    if (report.fact_check) {
        std::snprintf(buf, sizeof(buf),
                      "\nfact-check accuracy: %.1f (included %d, excluded %d)\n",
                      report.fact_check->accuracy, report.fact_check->included,
                      report.fact_check->excluded);
        txt << buf;
    }
    txt << "\nconfig_hash: " << config_hash << "    tool: " << kToolName << " " << kToolVersion
        << "\n";
    out.text = txt.str();

    std::ostringstream csv;
    csv.precision(17);
    csv << "key,value\n";
    csv << "metric_kind," << metric_kind_name(report.metric_kind) << "\n";
    csv << "n_per_cell," << report.n_per_cell << "\n";
    csv << "PP," << report.pp << "\n";
    csv << "PN," << report.pn << "\n";
    csv << "NN," << report.nn << "\n";
    csv << "NP," << report.np << "\n";
    csv << "PP-PN," << report.d_pp_pn << "\n";
    csv << "PP-NP," << report.d_pp_np << "\n";
    csv << "NN-PN," << report.d_nn_pn << "\n";
    csv << "NN-NP," << report.d_nn_np << "\n";
    csv << "Avg," << report.avg << "\n";
    if (report.fact_check) {
        csv << "fact_check_accuracy," << report.fact_check->accuracy << "\n";
        csv << "fact_check_included," << report.fact_check->included << "\n";
        csv << "fact_check_excluded," << report.fact_check->excluded << "\n";
    }
    csv << "config_hash," << config_hash << "\n";
    csv << "tool," << kToolName << " " << kToolVersion << "\n";
    out.csv = csv.str();
    return out;
}

}  // namespace editlab
