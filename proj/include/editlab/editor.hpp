#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "editlab/corpus.hpp"
#include "editlab/model.hpp"
#include "editlab/tokenizer.hpp"

namespace editlab {

enum class Polarity { positive, negative };
const char* polarity_name(Polarity p);

// One requested rewrite: drive the model to emit `target` after `prompt`.
// polarity records whether the prompt is the plain or the negated rendering.
struct EditRequest {
    std::string record_id;
    std::string subject;
    std::string prompt;
    Polarity polarity = Polarity::positive;
    std::vector<int> target;  // token ids of the edit target
    int decisive_token = -1;  // -1: locate subject in prompt, use its last token
};

// Target-state search settings: fixed-step gradient ascent on the mean target
// log-probability with weight decay pulling m back toward its start value Wk.
struct MSearch {
    int steps = 50;
    double step_size = 0.5;
    double early_stop_p = 0.95;
    double weight_decay = 1e-2;

    nlohmann::json to_json() const;
    static MSearch from_json(const nlohmann::json& j);
};

struct EditPlan {
    int batch_size = 50;
    int n_batches = 1;
    std::vector<int> layers = {2};  // designated W matrices (MLP down-projections)
    double lambda_reg = 1.0;
    int retention_size = -1;  // retention keys u; -1 = 4 * batch_size
    MSearch m_search;
    bool augment_retention_with_past_edits = true;

    void validate(int n_layers_total) const;
    nlohmann::json to_json() const;
    static EditPlan from_json(const nlohmann::json& j);
};

struct EditLogEntry {
    int batch_index = 0;
    std::vector<double> solve_residual;  // ||(W+D)K1 - M1||_F per layer
    std::vector<double> delta_norm;      // ||D||_F per layer
    std::vector<double> m_search_p;      // final target probability per request
    double wall_ms = 0.0;

    nlohmann::json to_json() const;
};

struct EditLog {
    std::vector<EditLogEntry> entries;
    nlohmann::json to_json() const;
};

// Background behavior to preserve: key at the edited site and the output it
// must keep producing (pinned at capture time).
struct RetentionEntry {
    Vec key;     // d_mlp
    Vec target;  // d_model
};
// One retention set per edited layer, indexed like plan.layers.
using RetentionSets = std::vector<std::vector<RetentionEntry>>;

// Samples `count` retention pairs per planned layer from random token
// positions of the given prompts, pinning targets at this checkpoint's
// current outputs. Deterministic under seed.
RetentionSets sample_retention(const Checkpoint& ckpt, const std::vector<std::vector<int>>& prompts,
                               const std::vector<int>& layers, int count, uint64_t seed);

// Builders for the two polarities of a fact's edit request.
EditRequest make_request(const FactRecord& rec, const RelationSpec& rel, const Tokenizer& tok,
                         Polarity polarity);

// k: the mlp_in-site activation feeding the down-projection W at `layer` for
// the decisive token (the last token of the subject unless overridden).
Vec compute_key(const Checkpoint& ckpt, const EditRequest& req, int layer, const Tokenizer& tok);

// m: the value for W's output at the decisive site such that the patched
// model emits the target; found by gradient ascent. Returns the best iterate
// and its achieved target probability.
struct TargetStateResult {
    Vec m;
    double p = 0.0;  // geometric-mean target probability of the best iterate
    int steps_run = 0;
};
TargetStateResult solve_target_state(const Checkpoint& ckpt, const EditRequest& req, int layer,
                                     const MSearch& settings, const Tokenizer& tok);

// Closed-form ridge update: D = (M1 - W K1) K1^T (K1 K1^T + lambda K0 K0^T)^{-1},
// solved with a trace-scaled jitter and iterative refinement against the
// unjittered normal equations. Columns of K1/M1 are edit pairs; columns of
// K0/M0 are retention pairs. M0 empty means "preserve current outputs W K0"
// (the term then reduces to lambda ||D K0||^2).
Mat solve_update(const Mat& W, const Mat& K1, const Mat& M1, const Mat& K0, double lambda_reg,
                 const Mat& M0 = Mat());

// Applies one batch of requests to a copy of the checkpoint. Keys and targets
// are computed against the progressively edited model per planned layer; the
// target shift is divided across the remaining layers (single layer: the full
// canonical update). retention indexes plan.layers.
std::pair<Checkpoint, EditLogEntry> apply_batch_edit(const Checkpoint& ckpt,
                                                     const std::vector<EditRequest>& requests,
                                                     const EditPlan& plan,
                                                     const RetentionSets& retention,
                                                     const Tokenizer& tok);

// Splits requests into plan.n_batches batches of plan.batch_size and applies
// them in order. Background retention is sampled once from retention_prompts
// against the ORIGINAL checkpoint; when augmentation is enabled, each edited
// request's (key, output) measured right after its batch is appended to the
// retention sets used by later batches.
std::pair<Checkpoint, EditLog> sequential_edit(const Checkpoint& ckpt,
                                               const std::vector<EditRequest>& requests,
                                               const EditPlan& plan,
                                               const std::vector<std::vector<int>>& retention_prompts,
                                               const Tokenizer& tok, uint64_t seed);

}  // namespace editlab
