#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "editlab/mat.hpp"

namespace editlab {

struct ModelConfig {
    int n_layers = 4;
    int d_model = 128;
    int n_heads = 4;
    int d_mlp = 512;
    int context_len = 48;
    int vocab_size = 0;
    uint64_t seed = 7;  // initialization / training stream seed

    int head_dim() const { return d_model / n_heads; }
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    bool operator==(const ModelConfig&) const = default;
};

// Activation sites addressable for capture and patching.
// mlp_in  = post-activation hidden feeding the MLP down-projection (d_mlp)
// mlp_out = down-projection output, pre residual add (d_model)
// block_out = residual stream after the block (d_model)
// embed   = token+position embedding, before layer 0 (d_model; layer must be 0)
enum class Site { embed, mlp_in, mlp_out, block_out };

const char* site_name(Site s);
Site site_from_name(const std::string& name);

struct SiteRef {
    int layer = 0;
    Site site = Site::block_out;
    int token = 0;
    bool operator==(const SiteRef&) const = default;
};

struct SitePatch {
    SiteRef ref;
    Vec value;
};

struct LayerWeights {
    Mat wq, wk, wv, wo;    // d_model x d_model
    Mat w_up;              // d_mlp x d_model
    Mat w_down;            // d_model x d_mlp
};

struct Weights {
    Mat embed;             // vocab x d_model
    Mat pos;               // context x d_model
    std::vector<LayerWeights> layers;
    Mat unembed;           // vocab x d_model

    static Weights zeros_like(const ModelConfig& cfg);
    // Parameter groups in a fixed order; names are stable across versions.
    std::vector<std::pair<std::string, Mat*>> named();
    std::vector<std::pair<std::string, const Mat*>> named() const;
};

// Immutable trained/edited model state. Mutation happens only by constructing
// a new checkpoint (editing copies, then swaps designated matrices).
struct Checkpoint {
    ModelConfig config;
    Weights w;
    nlohmann::json training_meta = nlohmann::json::object();
    nlohmann::json edit_provenance;  // null unless produced by an edit

    static Checkpoint init(const ModelConfig& cfg);  // seeded from cfg.seed

    uint64_t weights_hash() const;
    std::string serialize() const;                       // byte-stable container
    static Checkpoint deserialize(const std::string&);   // validates shapes
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// ---- forward pass ----

// Per-layer activations kept for the backward pass and site access.
struct LayerTrace {
    Mat ln1, q, k, v, attn_mix, attn_out, x1, ln2, mlp_pre, mlp_act, mlp_out, x2;
    Vec ln1_rstd, ln2_rstd;
    std::vector<Mat> probs;  // [line * n_heads + h] -> (T_line x T_line)
};

// A packed batch: lines concatenated without padding; attention and loss are
// confined to each line's segment.
struct PackedBatch {
    std::vector<int> tokens;
    std::vector<int> offsets;  // line start indices, size n_lines + 1

    int n() const { return static_cast<int>(tokens.size()); }
    int n_lines() const { return static_cast<int>(offsets.size()) - 1; }
    static PackedBatch single(const std::vector<int>& tokens);
    static PackedBatch pack(const std::vector<std::vector<int>>& lines);
};

struct ForwardTrace {
    Mat x0;
    std::vector<LayerTrace> layers;
    Mat lnf;
    Vec lnf_rstd;
    Mat logits;  // n x vocab
};

// Runs the model over a packed batch. Patches replace a site's value at one
// token before downstream use; token indices refer to packed positions.
void run_forward(const Checkpoint& ckpt, const PackedBatch& batch, ForwardTrace& trace,
                 const std::vector<SitePatch>& patches = {});

struct BackwardResult {
    Weights grads;     // parameter gradients (when requested)
    Mat d_block_out;   // gradient wrt x2 of stop_layer (when stop_layer >= 0)
};

// Reverse pass for an arbitrary logit gradient. stop_layer >= 0 halts after
// computing the gradient wrt that layer's block output (used for target-state
// search); stop_layer == -1 runs to the embeddings and fills parameter grads.
BackwardResult run_backward(const Checkpoint& ckpt, const PackedBatch& batch,
                            const ForwardTrace& trace, const Mat& dlogits, bool param_grads,
                            int stop_layer);

// ---- public single-sequence operations ----

struct ForwardResult {
    Mat logits;                 // T x vocab
    std::vector<Vec> captured;  // parallel to the capture list
};

ForwardResult forward(const Checkpoint& ckpt, const std::vector<int>& tokens,
                      const std::vector<SiteRef>& capture = {},
                      const std::vector<SitePatch>& patches = {});

std::vector<int> greedy_decode(const Checkpoint& ckpt, const std::vector<int>& prompt,
                               int max_new);

// Mean per-token log probability of the continuation given the prompt.
double sequence_logprob(const Checkpoint& ckpt, const std::vector<int>& prompt,
                        const std::vector<int>& continuation);

}  // namespace editlab
