#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "editlab/model.hpp"

namespace editlab {

// Result of a causal trace over one prompt: per-(token, layer) recovery
// scores plus the decisive site chosen from them.
struct TraceResult {
    Mat grid;                 // tokens x layers: mean target probability with
                              // corrupted subject + this cell restored
    int span_begin = 0;       // subject token range [span_begin, span_end)
    int span_end = 0;
    int decisive_token = 0;   // argmax row within the subject span (ties -> last)
    std::vector<int> decisive_layers;  // contiguous window ending at the max layer
    double baseline_p = 0.0;  // clean-run target probability
    double corrupted_p = 0.0; // corrupted-run target probability (no restoration)
    double noise_scale = 0.0; // corruption stddev actually used
    int n_noise_samples = 0;
    Site restore_site = Site::block_out;
    std::string warning;      // "weak trace ..." when baseline_p < 2 * corrupted_p

    nlohmann::json to_json() const;
    static TraceResult from_json(const nlohmann::json& j);
    std::string to_csv() const;  // grid rows, one line per token
};

// Default corruption scale: 3x the empirical standard deviation of the
// token-embedding entries.
double default_noise_scale(const Checkpoint& ckpt);

// Corrupts the subject-span embeddings with zero-mean noise and measures, for
// every (token, layer), the target probability when that cell's restore_site
// state is restored from the clean run. Scores are means over n_noise_samples
// corruption draws; the same draws are reused across cells. Deterministic
// under seed. target_token is scored at the answer position (after the last
// prompt token).
TraceResult causal_trace(const Checkpoint& ckpt, const std::vector<int>& prompt, int span_begin,
                         int span_end, int target_token, double noise_scale, int n_noise_samples,
                         uint64_t seed, Site restore_site = Site::block_out);

// Decisive-site selection: token = grid-argmax row restricted to the subject
// span (ties -> last subject token); layers = a contiguous window of
// n_layers_to_edit layers ending at the grid-max layer of that row (ties ->
// deepest layer; window clamped into range).
std::pair<int, std::vector<int>> select_decisive(const TraceResult& trace, int n_layers_to_edit);

}  // namespace editlab
