#include "editlab/train.hpp"

#include <algorithm>
#include <cmath>

#include "editlab/error.hpp"
#include "editlab/kernels.hpp"
#include "editlab/rng.hpp"
#include "editlab/text.hpp"

namespace editlab {

using kernels::par_for;

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{{"steps", steps},
                          {"max_steps", max_steps},
                          {"batch_lines", batch_lines},
                          {"lr", lr},
                          {"warmup_steps", warmup_steps},
                          {"min_lr_frac", min_lr_frac},
                          {"beta1", beta1},
                          {"beta2", beta2},
                          {"adam_eps", adam_eps},
                          {"grad_clip", grad_clip},
                          {"window", window},
                          {"stop_loss", stop_loss}};
}

namespace {

void validate_hyper(const TrainConfig& h) {
    std::vector<std::string> problems;
    if (h.steps < -1) problems.push_back("steps must be >= 0 or -1 for auto");
    if (h.steps == -1 && h.max_steps < 1) problems.push_back("max_steps must be >= 1");
    if (h.batch_lines < 1) problems.push_back("batch_lines must be >= 1");
    if (!(h.lr > 0.0)) problems.push_back("lr must be > 0");
    if (h.warmup_steps < 0) problems.push_back("warmup_steps must be >= 0");
    if (h.min_lr_frac < 0.0 || h.min_lr_frac > 1.0)
        problems.push_back("min_lr_frac must be in [0, 1]");
    if (!(h.grad_clip > 0.0)) problems.push_back("grad_clip must be > 0");
    if (h.window < 1) problems.push_back("window must be >= 1");
    if (!problems.empty())
        throw validation_error("invalid training settings: " + join(problems, "; "));
}

double schedule(const TrainConfig& h, int step, int horizon) {
    const double warm = h.warmup_steps > 0
                            ? std::min(1.0, (step + 1) / static_cast<double>(h.warmup_steps))
                            : 1.0;
    const int decay_span = std::max(1, horizon - h.warmup_steps);
    const double progress =
        std::clamp((step - h.warmup_steps) / static_cast<double>(decay_span), 0.0, 1.0);
    const double cosine =
        h.min_lr_frac + (1.0 - h.min_lr_frac) * 0.5 * (1.0 + std::cos(progress * M_PI));
    return h.lr * warm * cosine;
}

}  // namespace

Checkpoint train(const std::string& corpus_text, const Tokenizer& tok, const ModelConfig& cfg,
                 const TrainConfig& hyper) {
    validate_hyper(hyper);
    if (cfg.vocab_size != tok.vocab_size())
        throw validation_error("config vocab_size " + std::to_string(cfg.vocab_size) +
                               " does not match tokenizer size " + std::to_string(tok.vocab_size()));

    // Tokenize corpus lines once.
    std::vector<std::vector<int>> lines;
    for (const auto& raw : split_lines(corpus_text)) {
        const std::string line = trim(raw);
        if (line.empty()) continue;
        std::vector<int> ids = tok.encode(line);
        if (static_cast<int>(ids.size()) > cfg.context_len)
            throw validation_error("corpus line exceeds context length (" +
                                   std::to_string(ids.size()) + " > " +
                                   std::to_string(cfg.context_len) + "): " + line);
        if (ids.size() >= 2) lines.push_back(std::move(ids));
    }
    if (lines.empty()) throw validation_error("corpus has no trainable lines");

    Checkpoint ckpt = Checkpoint::init(cfg);
    const int total_steps = hyper.steps == -1 ? hyper.max_steps : hyper.steps;
    ckpt.training_meta = nlohmann::json{{"steps", 0},
                                        {"final_loss", nullptr},
                                        {"loss_windows", nlohmann::json::array()},
                                        {"stopped_early", false},
                                        {"hyper", hyper.to_json()}};
    if (total_steps == 0) return ckpt;

    Rng order_rng = Rng(cfg.seed).fork(0x0bdeull);
    std::vector<int> order(lines.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    order_rng.shuffle(order);
    size_t cursor = 0;

    Weights adam_m = Weights::zeros_like(cfg);
    Weights adam_v = Weights::zeros_like(cfg);

    std::vector<double> window_losses;
    nlohmann::json loss_windows = nlohmann::json::array();
    double final_loss = 0.0;
    int steps_run = 0;
    bool stopped_early = false;

    for (int step = 0; step < total_steps; ++step) {
        // Assemble the step's batch from the shuffled line stream.
        std::vector<std::vector<int>> batch_src;
        for (int b = 0; b < hyper.batch_lines; ++b) {
            if (cursor == order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            batch_src.push_back(lines[order[cursor++]]);
        }
        PackedBatch batch = PackedBatch::pack(batch_src);
        const int n = batch.n();
        const int V = cfg.vocab_size;

        ForwardTrace trace;
        run_forward(ckpt, batch, trace);

        // Cross-entropy over next-token positions; rows that end a line carry
        // no prediction and get zero gradient.
        std::vector<int> next(n, -1);
        int n_pred = 0;
        for (int l = 0; l < batch.n_lines(); ++l) {
            for (int r = batch.offsets[l]; r + 1 < batch.offsets[l + 1]; ++r) {
                next[r] = batch.tokens[r + 1];
                ++n_pred;
            }
        }

        Mat dlogits(n, V);
        std::vector<double> row_loss(n, 0.0);
        const double inv_pred = 1.0 / static_cast<double>(n_pred);
        par_for(n, [&](int r) {
            double* dl = dlogits.row(r);
            if (next[r] < 0) {
                for (int j = 0; j < V; ++j) dl[j] = 0.0;
                return;
            }
            const double* logits = trace.logits.row(r);
            double mx = logits[0];
            for (int j = 1; j < V; ++j) mx = std::max(mx, logits[j]);
            double denom = 0.0;
            for (int j = 0; j < V; ++j) denom += std::exp(logits[j] - mx);
            const double log_denom = std::log(denom);
            for (int j = 0; j < V; ++j) dl[j] = std::exp(logits[j] - mx) / denom * inv_pred;
            dl[next[r]] -= inv_pred;
            row_loss[r] = -(logits[next[r]] - mx - log_denom);
        });
        double loss = 0.0;
        for (int r = 0; r < n; ++r) loss += row_loss[r];
        loss *= inv_pred;
        if (!std::isfinite(loss))
            throw numeric_error("training diverged (non-finite loss) at step " +
                                std::to_string(step));

        BackwardResult back = run_backward(ckpt, batch, trace, dlogits, true, -1);

        // Global-norm gradient clip.
        double sq = 0.0;
        for (auto& [name, g] : back.grads.named())
            for (double v : g->a) sq += v * v;
        const double gnorm = std::sqrt(sq);
        const double clip_scale =
            gnorm > hyper.grad_clip ? hyper.grad_clip / (gnorm + 1e-12) : 1.0;

        const double lr_t = schedule(hyper, step, total_steps);
        const double bc1 = 1.0 - std::pow(hyper.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(hyper.beta2, step + 1);

        auto wn = ckpt.w.named();
        auto gn = back.grads.named();
        auto mn = adam_m.named();
        auto vn = adam_v.named();
        for (size_t t = 0; t < wn.size(); ++t) {
            double* w = wn[t].second->data();
            const double* g = gn[t].second->data();
            double* m = mn[t].second->data();
            double* v = vn[t].second->data();
            const int count = static_cast<int>(wn[t].second->size());
            par_for(count, [&](int i) {
                const double gi = g[i] * clip_scale;
                m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
                v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= lr_t * mhat / (std::sqrt(vhat) + hyper.adam_eps);
            });
        }

        ++steps_run;
        final_loss = loss;
        window_losses.push_back(loss);
        if (static_cast<int>(window_losses.size()) == hyper.window) {
            double mean = 0.0;
            for (double x : window_losses) mean += x;
            mean /= window_losses.size();
            loss_windows.push_back(mean);
            window_losses.clear();
            if (hyper.steps == -1 && mean <= hyper.stop_loss) {
                stopped_early = true;
                break;
            }
        }
    }
    if (!window_losses.empty()) {
        double mean = 0.0;
        for (double x : window_losses) mean += x;
        loss_windows.push_back(mean / window_losses.size());
    }

    ckpt.training_meta["steps"] = steps_run;
    ckpt.training_meta["final_loss"] = final_loss;
    ckpt.training_meta["loss_windows"] = loss_windows;
    ckpt.training_meta["stopped_early"] = stopped_early;
    return ckpt;
}

}  // namespace editlab
