#include "editlab/manifest.hpp"

#include <ctime>
#include <filesystem>

#include "editlab/error.hpp"
#include "editlab/hash.hpp"
#include "editlab/report.hpp"
#include "editlab/text.hpp"

namespace editlab {

namespace fs = std::filesystem;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest RunManifest::open(const std::string& out_dir) {
    RunManifest m;
    m.out_dir_ = out_dir;
    const fs::path p = fs::path(out_dir) / "manifest.json";
    if (fs::exists(p)) {
        try {
            m.doc_ = nlohmann::json::parse(read_file(p.string()));
        } catch (const nlohmann::json::parse_error& e) {
            throw validation_error("corrupt manifest " + p.string() + ": " + e.what());
        }
    }
    if (!m.doc_.is_object()) m.doc_ = nlohmann::json::object();
    m.doc_["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    if (!m.doc_.contains("stages")) m.doc_["stages"] = nlohmann::json::object();
    return m;
}

std::string RunManifest::path() const {
    return (fs::path(out_dir_) / "manifest.json").string();
}

bool RunManifest::stage_current(const std::string& stage, const std::string& stage_hash) const {
    const auto& stages = doc_.at("stages");
    if (!stages.contains(stage)) return false;
    const auto& entry = stages.at(stage);
    if (entry.value("config_hash", "") != stage_hash) return false;
    for (const auto& f : entry.value("files", nlohmann::json::array())) {
        const fs::path p = fs::path(out_dir_) / f.value("path", "");
        if (!fs::exists(p)) return false;
        if (hash_hex(hash_file(p.string())) != f.value("content_hash", "")) return false;
    }
    return true;
}

void RunManifest::record_stage(const std::string& stage, const std::string& stage_hash,
                               const std::vector<std::string>& files) {
    nlohmann::json file_list = nlohmann::json::array();
    for (const auto& rel : files) {
        const fs::path p = fs::path(out_dir_) / rel;
        file_list.push_back(
            {{"path", rel}, {"content_hash", hash_hex(hash_file(p.string()))}});
    }
    doc_["stages"][stage] = {{"config_hash", stage_hash},
                             {"completed_at", utc_timestamp()},
                             {"files", std::move(file_list)}};
    save();
}

void RunManifest::set_config(const nlohmann::json& resolved, const std::string& config_hash) {
    doc_["config"] = resolved;
    doc_["config_hash"] = config_hash;
    save();
}

void RunManifest::save() const {
    write_file_atomic(path(), doc_.dump(2) + "\n");
}

}  // namespace editlab
