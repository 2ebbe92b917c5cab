#include "editlab/tracing.hpp"

#include <cmath>
#include <sstream>

#include "editlab/error.hpp"
#include "editlab/rng.hpp"

namespace editlab {

namespace {

// Probability of `target` as the next token after the last prompt position.
double target_prob(const Checkpoint& ckpt, const std::vector<int>& prompt, int target,
                   const std::vector<SitePatch>& patches) {
    ForwardResult r = forward(ckpt, prompt, {}, patches);
    const double* logits = r.logits.row(r.logits.rows - 1);
    const int V = ckpt.config.vocab_size;
    double mx = logits[0];
    for (int j = 1; j < V; ++j) mx = std::max(mx, logits[j]);
    double denom = 0.0;
    for (int j = 0; j < V; ++j) denom += std::exp(logits[j] - mx);
    return std::exp(logits[target] - mx) / denom;
}

}  // namespace

double default_noise_scale(const Checkpoint& ckpt) {
    const Mat& e = ckpt.w.embed;
    double mean = 0.0;
    for (double v : e.a) mean += v;
    mean /= static_cast<double>(e.size());
    double var = 0.0;
    for (double v : e.a) var += (v - mean) * (v - mean);
    var /= static_cast<double>(e.size());
    return 3.0 * std::sqrt(var);
}

TraceResult causal_trace(const Checkpoint& ckpt, const std::vector<int>& prompt, int span_begin,
                         int span_end, int target_token, double noise_scale, int n_noise_samples,
                         uint64_t seed, Site restore_site) {
    const int T = static_cast<int>(prompt.size());
    const int L = ckpt.config.n_layers;
    if (span_begin < 0 || span_end > T || span_begin >= span_end)
        throw validation_error("subject span empty or out of range");
    if (target_token < 0 || target_token >= ckpt.config.vocab_size)
        throw validation_error("target token out of range");
    if (n_noise_samples < 1) throw validation_error("n_noise_samples must be >= 1");
    if (noise_scale < 0.0) throw validation_error("noise_scale must be >= 0");
    if (restore_site != Site::block_out && restore_site != Site::mlp_out)
        throw validation_error("restore site must be block_out or mlp_out");

    TraceResult res;
    res.span_begin = span_begin;
    res.span_end = span_end;
    res.noise_scale = noise_scale;
    res.n_noise_samples = n_noise_samples;
    res.restore_site = restore_site;

    // Clean run: baseline probability plus every restorable state and the
    // clean embeddings of the subject span.
    std::vector<SiteRef> capture;
    for (int t = 0; t < T; ++t)
        for (int l = 0; l < L; ++l) capture.push_back({l, restore_site, t});
    for (int t = span_begin; t < span_end; ++t) capture.push_back({0, Site::embed, t});
    ForwardResult clean = forward(ckpt, prompt, capture);
    {
        const double* logits = clean.logits.row(T - 1);
        const int V = ckpt.config.vocab_size;
        double mx = logits[0];
        for (int j = 1; j < V; ++j) mx = std::max(mx, logits[j]);
        double denom = 0.0;
        for (int j = 0; j < V; ++j) denom += std::exp(logits[j] - mx);
        res.baseline_p = std::exp(logits[target_token] - mx) / denom;
    }
    auto clean_state = [&](int t, int l) -> const Vec& {
        return clean.captured[static_cast<size_t>(t) * L + l];
    };
    auto clean_embed = [&](int t) -> const Vec& {
        return clean.captured[static_cast<size_t>(T) * L + (t - span_begin)];
    };

    res.grid = Mat(T, L);
    Rng rng(seed);
    double corrupted_sum = 0.0;
    for (int s = 0; s < n_noise_samples; ++s) {
        Rng sample_rng = rng.fork(static_cast<uint64_t>(s) + 1);
        std::vector<SitePatch> corruption;
        for (int t = span_begin; t < span_end; ++t) {
            Vec noisy = clean_embed(t);
            for (double& v : noisy) v += noise_scale * sample_rng.normal();
            corruption.push_back({{0, Site::embed, t}, std::move(noisy)});
        }
        corrupted_sum += target_prob(ckpt, prompt, target_token, corruption);

        for (int t = 0; t < T; ++t) {
            for (int l = 0; l < L; ++l) {
                std::vector<SitePatch> patches = corruption;
                patches.push_back({{l, restore_site, t}, clean_state(t, l)});
                res.grid(t, l) += target_prob(ckpt, prompt, target_token, patches);
            }
        }
    }
    res.corrupted_p = corrupted_sum / n_noise_samples;
    for (double& v : res.grid.a) v /= n_noise_samples;

    if (res.baseline_p < 2.0 * res.corrupted_p) {
        std::ostringstream os;
        os << "weak trace: baseline probability " << res.baseline_p
           << " is less than twice the corrupted probability " << res.corrupted_p;
        res.warning = os.str();
    }

    auto [tok, layers] = select_decisive(res, 1);
    res.decisive_token = tok;
    res.decisive_layers = layers;
    return res;
}

std::pair<int, std::vector<int>> select_decisive(const TraceResult& trace, int n_layers_to_edit) {
    const int T = trace.grid.rows;
    const int L = trace.grid.cols;
    if (T == 0 || L == 0) throw validation_error("trace grid is empty");
    if (n_layers_to_edit < 1 || n_layers_to_edit > L)
        throw validation_error("n_layers_to_edit must be in [1, n_layers]");

    // Row with the grid max restricted to the subject span; ties -> last
    // subject token (>= comparison while scanning forward).
    int best_t = trace.span_begin;
    double best_row = -1.0;
    for (int t = trace.span_begin; t < trace.span_end; ++t) {
        double row_max = trace.grid(t, 0);
        for (int l = 1; l < L; ++l) row_max = std::max(row_max, trace.grid(t, l));
        if (row_max >= best_row) {
            best_row = row_max;
            best_t = t;
        }
    }

    // Max layer within that row; ties -> deepest layer.
    int best_l = 0;
    double best_v = trace.grid(best_t, 0);
    for (int l = 1; l < L; ++l) {
        if (trace.grid(best_t, l) >= best_v) {
            best_v = trace.grid(best_t, l);
            best_l = l;
        }
    }

    const int end = std::max(best_l, n_layers_to_edit - 1);
    std::vector<int> layers;
    for (int l = end - n_layers_to_edit + 1; l <= end; ++l) layers.push_back(l);
    return {best_t, layers};
}

// ---- serialization ----

nlohmann::json TraceResult::to_json() const {
    nlohmann::json grid_rows = nlohmann::json::array();
    for (int t = 0; t < grid.rows; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (int l = 0; l < grid.cols; ++l) row.push_back(grid(t, l));
        grid_rows.push_back(row);
    }
    return nlohmann::json{{"grid", grid_rows},
                          {"span_begin", span_begin},
                          {"span_end", span_end},
                          {"decisive_token", decisive_token},
                          {"decisive_layers", decisive_layers},
                          {"baseline_p", baseline_p},
                          {"corrupted_p", corrupted_p},
                          {"noise_scale", noise_scale},
                          {"n_noise_samples", n_noise_samples},
                          {"restore_site", site_name(restore_site)},
                          {"warning", warning}};
}

TraceResult TraceResult::from_json(const nlohmann::json& j) {
    TraceResult r;
    const auto& rows = j.at("grid");
    const int T = static_cast<int>(rows.size());
    const int L = T > 0 ? static_cast<int>(rows[0].size()) : 0;
    r.grid = Mat(T, L);
    for (int t = 0; t < T; ++t)
        for (int l = 0; l < L; ++l) r.grid(t, l) = rows[t][l].get<double>();
    r.span_begin = j.at("span_begin").get<int>();
    r.span_end = j.at("span_end").get<int>();
    r.decisive_token = j.at("decisive_token").get<int>();
    r.decisive_layers = j.at("decisive_layers").get<std::vector<int>>();
    r.baseline_p = j.at("baseline_p").get<double>();
    r.corrupted_p = j.at("corrupted_p").get<double>();
    r.noise_scale = j.at("noise_scale").get<double>();
    r.n_noise_samples = j.at("n_noise_samples").get<int>();
    r.restore_site = site_from_name(j.at("restore_site").get<std::string>());
    r.warning = j.at("warning").get<std::string>();
    return r;
}

std::string TraceResult::to_csv() const {
    std::ostringstream os;
    os << "token";
    for (int l = 0; l < grid.cols; ++l) os << ",layer_" << l;
    os << "\n";
    os.precision(17);
    for (int t = 0; t < grid.rows; ++t) {
        os << t;
        for (int l = 0; l < grid.cols; ++l) os << "," << grid(t, l);
        os << "\n";
    }
    return os.str();
}

}  // namespace editlab
