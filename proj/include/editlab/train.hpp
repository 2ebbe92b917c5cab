#pragma once

#include <string>

#include <json.hpp>

#include "editlab/model.hpp"
#include "editlab/tokenizer.hpp"

namespace editlab {

// Optimizer settings for next-token training. All defaults are fixed and
// recorded in the checkpoint's training_meta for reproducibility.
struct TrainConfig {
    int steps = -1;        // exact step count; -1 = run until stop_loss or max_steps
    int max_steps = 1500;  // step cap when steps == -1
    int batch_lines = 32;  // corpus lines packed into one step's batch
    double lr = 2e-3;
    int warmup_steps = 40;       // linear ramp, then cosine decay to min_lr_frac * lr
    double min_lr_frac = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;      // global-norm clip
    int window = 50;             // steps per logged loss window
    double stop_loss = 0.03;     // auto-mode target: stop once a window mean drops below

    nlohmann::json to_json() const;
};

// Trains a fresh model (initialized from cfg.seed) on the corpus text with
// next-token cross-entropy over packed line batches. Deterministic under
// cfg.seed. Records steps, final_loss, loss_windows (per-window mean losses,
// trailing partial window included), stopped_early, and the hyperparameters
// in training_meta. steps == 0 returns the initialization unchanged.
// Throws numeric_error if the loss becomes non-finite, naming the step.
Checkpoint train(const std::string& corpus_text, const Tokenizer& tok, const ModelConfig& cfg,
                 const TrainConfig& hyper);

}  // namespace editlab
