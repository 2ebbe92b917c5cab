#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace editlab {

// Run ledger written next to the artifacts: which stages completed, with what
// config fingerprint, touching which files. Stages skip themselves when their
// fingerprint and every recorded file hash still match (content-hash
// idempotence). Timestamps live only here, never in reports.
class RunManifest {
public:
    // Loads <out_dir>/manifest.json if present, else starts empty.
    static RunManifest open(const std::string& out_dir);

    // True when `stage` completed with this fingerprint and every file it
    // recorded still exists with an unchanged content hash.
    bool stage_current(const std::string& stage, const std::string& stage_hash) const;

    // Records a completed stage: hashes each file (paths relative to the run
    // directory), stamps completion time, and saves atomically.
    void record_stage(const std::string& stage, const std::string& stage_hash,
                      const std::vector<std::string>& files);

    // Echoes the fully resolved run config and its hash, then saves.
    void set_config(const nlohmann::json& resolved, const std::string& config_hash);

    const nlohmann::json& doc() const { return doc_; }
    std::string path() const;

private:
    std::string out_dir_;
    nlohmann::json doc_;

    void save() const;  // write-temp-then-rename
};

// ISO-8601 UTC wall-clock stamp, e.g. "2026-02-14T09:31:07Z".
std::string utc_timestamp();

}  // namespace editlab
