#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "editlab/corpus.hpp"
#include "editlab/editor.hpp"
#include "editlab/evalsuite.hpp"
#include "editlab/model.hpp"
#include "editlab/train.hpp"

namespace editlab {

// Everything a run needs, resolved from (defaults <- config file <- CLI
// flags). One seed drives corpus generation, weight init, data order,
// retention sampling, and tracing noise, so a run is reproducible from this
// struct alone.
struct RunConfig {
    uint64_t seed = 7;
    std::string out_dir = "run";

    // Fact source: the synthetic generator by default; a dataset file when
    // dataset_path is set (exactly one of the two is active).
    SyntheticSpec corpus;
    std::string dataset_path;
    DatasetFormat dataset_format = DatasetFormat::mcf;

    ModelConfig model;
    TrainConfig train;
    EditPlan plan;
    bool layers_auto = true;  // pick edit layers from the trace when present
    MetricKind metric = MetricKind::exact_match;

    // Activation tracing knobs.
    int trace_fact_index = 0;
    double trace_noise_scale = -1.0;  // -1: 3x the std of the embedding table
    int trace_noise_samples = 8;

    bool dataset_mode() const { return !dataset_path.empty(); }

    // Assigns one `key = value` pair. Returns an error description instead of
    // throwing so callers can collect every bad field before failing.
    std::string apply(const std::string& key, const std::string& value);

    // Range/consistency checks over all fields; throws one validation_error
    // listing every offending field.
    void validate() const;

    // Full config as JSON, with plan.layers echoed as given ("auto" or the
    // explicit list). Deterministic key order.
    nlohmann::json resolved() const;

    // Hash of the resolved config minus the output directory, so the same
    // experiment hashes identically wherever its artifacts land.
    std::string config_hash() const;

    // Parses a key-value config file ('#' comments, blank lines ignored) over
    // the current values. Throws with every bad line listed.
    void load_file(const std::string& path);
};

// Per-stage config fingerprints: each pipeline stage hashes only the inputs
// that can change its artifact, chained so that upstream changes invalidate
// downstream artifacts without a metric tweak forcing a retrain.
std::string stage_hash_generate(const RunConfig& cfg);
std::string stage_hash_train(const RunConfig& cfg);
std::string stage_hash_trace(const RunConfig& cfg);
std::string stage_hash_edit(const RunConfig& cfg, const std::vector<int>& layers);
std::string stage_hash_quadrants(const RunConfig& cfg, const std::vector<int>& layers);
std::string stage_hash_factcheck(const RunConfig& cfg, const std::vector<int>& layers);

}  // namespace editlab
