#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "editlab/config.hpp"

namespace editlab {

// Artifact file names inside a run directory.
namespace artifact {
inline constexpr const char* kCorpus = "corpus.json";
inline constexpr const char* kTrainText = "train.txt";
inline constexpr const char* kTokenizer = "tokenizer.json";
inline constexpr const char* kModel = "model.ckpt";
inline constexpr const char* kTraceJson = "trace.json";
inline constexpr const char* kTraceCsv = "trace.csv";
inline constexpr const char* kEdited = "edited.ckpt";
inline constexpr const char* kEditLog = "edit_log.json";
inline constexpr const char* kPosModel = "pos.ckpt";
inline constexpr const char* kNegModel = "neg.ckpt";
inline constexpr const char* kPosEditLog = "pos_edit_log.json";
inline constexpr const char* kNegEditLog = "neg_edit_log.json";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kFactCheck = "factcheck.json";
inline constexpr const char* kSelfTest = "selftest.json";
inline constexpr const char* kTableAudit = "table_audit.json";
}  // namespace artifact

// Pipeline stages. Each validates its config, refuses to run without its
// prerequisite artifacts (the error names the missing file and the command
// that makes it), skips itself when the manifest shows the same stage hash
// with unchanged outputs, and records what it wrote. `log` receives
// human-readable progress; reports stay timestamp-free.
void cmd_generate(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_trace(const RunConfig& cfg, std::ostream& log);
void cmd_edit(const RunConfig& cfg, std::ostream& log);
void cmd_quadrants(const RunConfig& cfg, std::ostream& log);
void cmd_factcheck(const RunConfig& cfg, std::ostream& log);

// Runs the scripted-responder check of the metric pipeline. Writes
// selftest.json when out_dir is non-empty. Returns pass/fail.
bool cmd_selftest(const std::string& out_dir, std::ostream& log);

// Recomputes discrepancy columns of a published-results table and prints the
// per-row audit. Writes table_audit.json when out_dir is non-empty.
void cmd_table_audit(const std::string& table_path, const std::string& out_dir,
                     std::ostream& log);

// Edit layers a run will use: the explicit override when given, else the
// traced decisive layers when trace.json exists, else the middle layer.
std::vector<int> resolve_edit_layers(const RunConfig& cfg);

}  // namespace editlab
