#include "editlab/editor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "editlab/error.hpp"
#include "editlab/hash.hpp"
#include "editlab/kernels.hpp"
#include "editlab/rng.hpp"
#include "editlab/text.hpp"

namespace editlab {

using kernels::par_for;

const char* polarity_name(Polarity p) {
    return p == Polarity::positive ? "positive" : "negative";
}

// ---- plan / log serialization ----

nlohmann::json MSearch::to_json() const {
    return nlohmann::json{{"steps", steps},
                          {"step_size", step_size},
                          {"early_stop_p", early_stop_p},
                          {"weight_decay", weight_decay}};
}

MSearch MSearch::from_json(const nlohmann::json& j) {
    MSearch m;
    m.steps = j.at("steps").get<int>();
    m.step_size = j.at("step_size").get<double>();
    m.early_stop_p = j.at("early_stop_p").get<double>();
    m.weight_decay = j.at("weight_decay").get<double>();
    return m;
}

void EditPlan::validate(int n_layers_total) const {
    std::vector<std::string> problems;
    if (batch_size < 1) problems.push_back("batch_size must be >= 1");
    if (n_batches < 1) problems.push_back("n_batches must be >= 1");
    if (layers.empty()) problems.push_back("layers must be nonempty");
    for (int l : layers)
        if (l < 0 || l >= n_layers_total)
            problems.push_back("layer " + std::to_string(l) + " out of range [0, " +
                               std::to_string(n_layers_total) + ")");
    if (!std::is_sorted(layers.begin(), layers.end()) ||
        std::adjacent_find(layers.begin(), layers.end()) != layers.end())
        problems.push_back("layers must be strictly ascending");
    if (lambda_reg < 0.0) problems.push_back("lambda_reg must be >= 0");
    if (retention_size < -1) problems.push_back("retention_size must be >= 0 or -1 for auto");
    if (m_search.steps < 0) problems.push_back("m_search.steps must be >= 0");
    if (!(m_search.step_size > 0.0)) problems.push_back("m_search.step_size must be > 0");
    if (m_search.early_stop_p <= 0.0 || m_search.early_stop_p > 1.0)
        problems.push_back("m_search.early_stop_p must be in (0, 1]");
    if (m_search.weight_decay < 0.0) problems.push_back("m_search.weight_decay must be >= 0");
    if (!problems.empty()) throw validation_error("invalid edit plan: " + join(problems, "; "));
}

nlohmann::json EditPlan::to_json() const {
    return nlohmann::json{{"batch_size", batch_size},
                          {"n_batches", n_batches},
                          {"layers", layers},
                          {"lambda_reg", lambda_reg},
                          {"retention_size", retention_size},
                          {"m_search", m_search.to_json()},
                          {"augment_retention_with_past_edits", augment_retention_with_past_edits}};
}

EditPlan EditPlan::from_json(const nlohmann::json& j) {
    EditPlan p;
    p.batch_size = j.at("batch_size").get<int>();
    p.n_batches = j.at("n_batches").get<int>();
    p.layers = j.at("layers").get<std::vector<int>>();
    p.lambda_reg = j.at("lambda_reg").get<double>();
    p.retention_size = j.at("retention_size").get<int>();
    p.m_search = MSearch::from_json(j.at("m_search"));
    p.augment_retention_with_past_edits = j.at("augment_retention_with_past_edits").get<bool>();
    return p;
}

nlohmann::json EditLogEntry::to_json() const {
    return nlohmann::json{{"batch_index", batch_index},
                          {"solve_residual", solve_residual},
                          {"delta_norm", delta_norm},
                          {"m_search_p", m_search_p},
                          {"wall_ms", wall_ms}};
}

nlohmann::json EditLog::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) arr.push_back(e.to_json());
    return nlohmann::json{{"entries", arr}};
}

// ---- request construction ----

EditRequest make_request(const FactRecord& rec, const RelationSpec& rel, const Tokenizer& tok,
                         Polarity polarity) {
    EditRequest req;
    req.record_id = rec.id;
    req.subject = rec.subject;
    req.prompt = polarity == Polarity::positive ? render_prompt(rec).text
                                                : negate_prompt(rec, rel);
    req.polarity = polarity;
    req.target = tok.encode(rec.target_new);
    if (req.target.empty()) throw validation_error("empty edit target for record " + rec.id);
    return req;
}

namespace {

// Last token index of the subject's (last) occurrence in the prompt.
int locate_decisive_token(const EditRequest& req, const Tokenizer& tok) {
    if (req.decisive_token >= 0) return req.decisive_token;
    const std::vector<int> prompt_ids = tok.encode(req.prompt);
    const std::vector<int> subj_ids = tok.encode(req.subject);
    if (subj_ids.empty() || subj_ids.size() > prompt_ids.size())
        throw validation_error("subject not found in prompt: '" + req.subject + "' in '" +
                               req.prompt + "'");
    int found = -1;
    for (size_t i = 0; i + subj_ids.size() <= prompt_ids.size(); ++i) {
        if (std::equal(subj_ids.begin(), subj_ids.end(), prompt_ids.begin() + i))
            found = static_cast<int>(i + subj_ids.size()) - 1;
    }
    if (found < 0)
        throw validation_error("subject not found in prompt: '" + req.subject + "' in '" +
                               req.prompt + "'");
    return found;
}

double frobenius(const Mat& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

// Answer-position gradient of the mean target log-probability; also returns
// that mean. Rows outside the answer span get zero gradient.
double target_dlogits(const ModelConfig& cfg, const Mat& logits, int prompt_len,
                      const std::vector<int>& target, Mat& dlogits) {
    const int V = cfg.vocab_size;
    const int T = static_cast<int>(target.size());
    dlogits.zero();
    double mean_logp = 0.0;
    for (int t = 0; t < T; ++t) {
        const int row = prompt_len - 1 + t;
        const double* lg = logits.row(row);
        double* dl = dlogits.row(row);
        double mx = lg[0];
        for (int j = 1; j < V; ++j) mx = std::max(mx, lg[j]);
        double denom = 0.0;
        for (int j = 0; j < V; ++j) denom += std::exp(lg[j] - mx);
        for (int j = 0; j < V; ++j) dl[j] = -std::exp(lg[j] - mx) / denom / T;
        dl[target[t]] += 1.0 / T;
        mean_logp += (lg[target[t]] - mx - std::log(denom)) / T;
    }
    return mean_logp;
}

}  // namespace

Vec compute_key(const Checkpoint& ckpt, const EditRequest& req, int layer, const Tokenizer& tok) {
    const int t_dec = locate_decisive_token(req, tok);
    ForwardResult r = forward(ckpt, tok.encode(req.prompt), {{layer, Site::mlp_in, t_dec}});
    return r.captured[0];
}

TargetStateResult solve_target_state(const Checkpoint& ckpt, const EditRequest& req, int layer,
                                     const MSearch& settings, const Tokenizer& tok) {
    const int t_dec = locate_decisive_token(req, tok);
    const std::vector<int> prompt_ids = tok.encode(req.prompt);
    const int prompt_len = static_cast<int>(prompt_ids.size());
    if (req.target.empty()) throw validation_error("empty edit target");

    std::vector<int> full = prompt_ids;
    full.insert(full.end(), req.target.begin(), req.target.end());
    PackedBatch batch = PackedBatch::single(full);

    // Start from the model's current output at the site: m0 = W k.
    ForwardResult clean = forward(ckpt, full, {{layer, Site::mlp_out, t_dec}});
    const Vec m0 = clean.captured[0];

    Vec m = m0;
    Vec best_m = m0;
    double best_p = -1.0;
    int steps_run = 0;

    Mat dlogits(batch.n(), ckpt.config.vocab_size);
    for (int step = 0; step <= settings.steps; ++step) {
        ForwardTrace trace;
        run_forward(ckpt, batch, trace, {{{layer, Site::mlp_out, t_dec}, m}});
        const double mean_logp = target_dlogits(ckpt.config, trace.logits, prompt_len, req.target,
                                                dlogits);
        const double p = std::exp(mean_logp);
        if (!std::isfinite(p))
            throw numeric_error("target-state search produced a non-finite objective at step " +
                                std::to_string(step));
        if (p > best_p) {
            best_p = p;
            best_m = m;
        }
        if (p >= settings.early_stop_p || step == settings.steps) break;

        BackwardResult back = run_backward(ckpt, batch, trace, dlogits, false, layer);
        const double* dm = back.d_block_out.row(t_dec);
        // Fixed-length step along the ascent direction: softmax saturation makes
        // raw gradient magnitudes collapse, so normalize before stepping.
        double gnorm = 0.0;
        for (int j = 0; j < ckpt.config.d_model; ++j) {
            if (!std::isfinite(dm[j]))
                throw numeric_error("target-state search produced a non-finite gradient at step " +
                                    std::to_string(step));
            gnorm += dm[j] * dm[j];
        }
        gnorm = std::sqrt(gnorm);
        const double scale = gnorm > 0.0 ? settings.step_size / gnorm : 0.0;
        for (int j = 0; j < ckpt.config.d_model; ++j)
            m[j] += scale * dm[j] -
                    settings.step_size * settings.weight_decay * (m[j] - m0[j]);
        ++steps_run;
    }
    return {std::move(best_m), best_p, steps_run};
}

// ---- closed-form update ----

namespace {

// Cholesky factorization A = L L^T in place (lower triangle). Returns false
// if a pivot is not strictly positive.
bool cholesky(Mat& A) {
    const int n = A.rows;
    for (int j = 0; j < n; ++j) {
        double diag = A(j, j);
        for (int k = 0; k < j; ++k) diag -= A(j, k) * A(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) return false;
        const double ljj = std::sqrt(diag);
        A(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double v = A(i, j);
            for (int k = 0; k < j; ++k) v -= A(i, k) * A(j, k);
            A(i, j) = v / ljj;
        }
    }
    return true;
}

// Solves A x = b given the Cholesky factor L (lower triangle of A).
void chol_solve_vec(const Mat& L, const double* b, double* x) {
    const int n = L.rows;
    for (int i = 0; i < n; ++i) {
        double v = b[i];
        for (int k = 0; k < i; ++k) v -= L(i, k) * x[k];
        x[i] = v / L(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double v = x[i];
        for (int k = i + 1; k < n; ++k) v -= L(k, i) * x[k];
        x[i] = v / L(i, i);
    }
}

// Solves X A = B row-wise (A symmetric positive definite via factor L).
void chol_solve_rows(const Mat& L, const Mat& B, Mat& X) {
    par_for(B.rows, [&](int r) { chol_solve_vec(L, B.row(r), X.row(r)); });
}

}  // namespace

Mat solve_update(const Mat& W, const Mat& K1, const Mat& M1, const Mat& K0, double lambda_reg,
                 const Mat& M0) {
    const int d = W.rows;
    const int dm = W.cols;
    std::vector<std::string> problems;
    if (K1.cols < 1) problems.push_back("no edit pairs");
    if (K1.rows != dm) problems.push_back("K1 row count must equal W column count");
    if (M1.rows != d || M1.cols != K1.cols)
        problems.push_back("M1 must be (W rows) x (K1 cols)");
    if (K0.size() > 0 && K0.rows != dm)
        problems.push_back("K0 row count must equal W column count");
    if (M0.size() > 0 && (K0.size() == 0 || M0.rows != d || M0.cols != K0.cols))
        problems.push_back("M0 must be (W rows) x (K0 cols)");
    if (lambda_reg < 0.0) problems.push_back("lambda_reg must be >= 0");
    if (!problems.empty()) throw validation_error("solve_update: " + join(problems, "; "));

    const bool use_k0 = lambda_reg > 0.0 && K0.size() > 0;

    // Normal-equations data: G = K1 K1^T (+ lambda K0 K0^T),
    // B = (M1 - W K1) K1^T (+ lambda (M0 - W K0) K0^T when M0 given).
    Mat G(dm, dm);
    kernels::matmul_nt(K1.data(), K1.data(), G.data(), dm, dm, K1.cols);
    if (use_k0) {
        Mat G0(dm, dm);
        kernels::matmul_nt(K0.data(), K0.data(), G0.data(), dm, dm, K0.cols);
        par_for(dm, [&](int r) {
            double* g = G.row(r);
            const double* g0 = G0.row(r);
            for (int c = 0; c < dm; ++c) g[c] += lambda_reg * g0[c];
        });
    }

    Mat R(d, K1.cols);
    kernels::matmul(W.data(), K1.data(), R.data(), d, K1.cols, dm);
    par_for(d, [&](int r) {
        double* rr = R.row(r);
        const double* m1 = M1.row(r);
        for (int c = 0; c < K1.cols; ++c) rr[c] = m1[c] - rr[c];
    });
    Mat B(d, dm);
    kernels::matmul_nt(R.data(), K1.data(), B.data(), d, dm, K1.cols);
    if (use_k0 && M0.size() > 0) {
        Mat R0(d, K0.cols);
        kernels::matmul(W.data(), K0.data(), R0.data(), d, K0.cols, dm);
        par_for(d, [&](int r) {
            double* rr = R0.row(r);
            const double* m0 = M0.row(r);
            for (int c = 0; c < K0.cols; ++c) rr[c] = m0[c] - rr[c];
        });
        Mat B0(d, dm);
        kernels::matmul_nt(R0.data(), K0.data(), B0.data(), d, dm, K0.cols);
        par_for(d, [&](int r) {
            double* b = B.row(r);
            const double* b0 = B0.row(r);
            for (int c = 0; c < dm; ++c) b[c] += lambda_reg * b0[c];
        });
    }

    // Trace-scaled jitter keeps rank-deficient Gram matrices factorable.
    double tr = 0.0;
    for (int i = 0; i < dm; ++i) tr += G(i, i);
    const double jitter = 1e-6 * tr / dm;
    Mat A = G;
    for (int i = 0; i < dm; ++i) A(i, i) += jitter;
    if (!cholesky(A))
        throw numeric_error(
            "solve_update: gram matrix numerically singular even after jitter; increase "
            "lambda_reg");

    Mat delta(d, dm);
    chol_solve_rows(A, B, delta);

    // Iterative refinement against the unjittered normal equations recovers
    // the exact-interpolation property the jitter would otherwise blur.
    Mat residual(d, dm), correction(d, dm);
    for (int sweep = 0; sweep < 3; ++sweep) {
        kernels::matmul(delta.data(), G.data(), residual.data(), d, dm, dm);
        par_for(d, [&](int r) {
            double* res = residual.row(r);
            const double* b = B.row(r);
            for (int c = 0; c < dm; ++c) res[c] = b[c] - res[c];
        });
        const double rnorm = frobenius(residual);
        const double bnorm = frobenius(B);
        if (rnorm <= 1e-14 * std::max(1.0, bnorm)) break;
        chol_solve_rows(A, residual, correction);
        par_for(d, [&](int r) {
            double* dl = delta.row(r);
            const double* c = correction.row(r);
            for (int j = 0; j < dm; ++j) dl[j] += c[j];
        });
    }
    return delta;
}

// ---- retention sampling ----

RetentionSets sample_retention(const Checkpoint& ckpt, const std::vector<std::vector<int>>& prompts,
                               const std::vector<int>& layers, int count, uint64_t seed) {
    if (count > 0 && prompts.empty())
        throw validation_error("retention requested but no retention prompts given");
    RetentionSets sets(layers.size());
    Rng rng(seed);
    for (int j = 0; j < count; ++j) {
        const auto& prompt = prompts[rng.below(prompts.size())];
        const int tok_idx = static_cast<int>(rng.below(prompt.size()));
        std::vector<SiteRef> capture;
        for (int l : layers) {
            capture.push_back({l, Site::mlp_in, tok_idx});
            capture.push_back({l, Site::mlp_out, tok_idx});
        }
        ForwardResult r = forward(ckpt, prompt, capture);
        for (size_t li = 0; li < layers.size(); ++li) {
            sets[li].push_back({r.captured[2 * li], r.captured[2 * li + 1]});
        }
    }
    return sets;
}

// ---- batch application ----

std::pair<Checkpoint, EditLogEntry> apply_batch_edit(const Checkpoint& ckpt,
                                                     const std::vector<EditRequest>& requests,
                                                     const EditPlan& plan,
                                                     const RetentionSets& retention,
                                                     const Tokenizer& tok) {
    plan.validate(ckpt.config.n_layers);
    if (retention.size() != plan.layers.size())
        throw validation_error("retention sets must match plan layers");
    const auto start = std::chrono::steady_clock::now();

    EditLogEntry entry;
    Checkpoint edited = ckpt;
    if (requests.empty()) return {std::move(edited), entry};

    const int n = static_cast<int>(requests.size());
    const int d = ckpt.config.d_model;
    const int dm = ckpt.config.d_mlp;
    const int last_layer = plan.layers.back();

    // Decisive token per request, and the full target state at the deepest
    // planned layer.
    std::vector<int> t_dec(n);
    std::vector<std::vector<int>> prompt_ids(n);
    Mat m_star(d, n);
    for (int i = 0; i < n; ++i) {
        t_dec[i] = locate_decisive_token(requests[i], tok);
        prompt_ids[i] = tok.encode(requests[i].prompt);
        TargetStateResult ts = solve_target_state(edited, requests[i], last_layer, plan.m_search,
                                                  tok);
        for (int r = 0; r < d; ++r) m_star(r, i) = ts.m[r];
        entry.m_search_p.push_back(ts.p);
    }

    for (size_t li = 0; li < plan.layers.size(); ++li) {
        const int layer = plan.layers[li];
        const int n_rem = static_cast<int>(plan.layers.size() - li);

        // Keys at this layer and current outputs at this and the last layer,
        // measured against the progressively edited model.
        Mat K1(dm, n), M1(d, n);
        for (int i = 0; i < n; ++i) {
            ForwardResult r = forward(edited, prompt_ids[i],
                                      {{layer, Site::mlp_in, t_dec[i]},
                                       {layer, Site::mlp_out, t_dec[i]},
                                       {last_layer, Site::mlp_out, t_dec[i]}});
            const Vec& key = r.captured[0];
            const Vec& out_here = r.captured[1];
            const Vec& out_last = r.captured[2];
            for (int row = 0; row < dm; ++row) K1(row, i) = key[row];
            // Divide the remaining shift toward the target state across the
            // layers still to be edited.
            for (int row = 0; row < d; ++row)
                M1(row, i) = out_here[row] + (m_star(row, i) - out_last[row]) / n_rem;
        }

        Mat K0(dm, static_cast<int>(retention[li].size()));
        Mat M0(d, static_cast<int>(retention[li].size()));
        for (size_t j = 0; j < retention[li].size(); ++j) {
            const RetentionEntry& e = retention[li][j];
            if (static_cast<int>(e.key.size()) != dm ||
                static_cast<int>(e.target.size()) != d)
                throw validation_error("retention entry dimension mismatch");
            for (int row = 0; row < dm; ++row) K0(row, static_cast<int>(j)) = e.key[row];
            for (int row = 0; row < d; ++row) M0(row, static_cast<int>(j)) = e.target[row];
        }

        Mat& W = edited.w.layers[layer].w_down;
        Mat delta = solve_update(W, K1, M1, K0.cols > 0 ? K0 : Mat(), plan.lambda_reg,
                                 K0.cols > 0 ? M0 : Mat());
        par_for(d, [&](int r) {
            double* w = W.row(r);
            const double* dl = delta.row(r);
            for (int c = 0; c < dm; ++c) w[c] += dl[c];
        });

        // Post-update fit residual ||(W + D) K1 - M1||_F.
        Mat fit(d, n);
        kernels::matmul(W.data(), K1.data(), fit.data(), d, n, dm);
        par_for(d, [&](int r) {
            double* f = fit.row(r);
            const double* m1 = M1.row(r);
            for (int c = 0; c < n; ++c) f[c] -= m1[c];
        });
        entry.solve_residual.push_back(frobenius(fit));
        entry.delta_norm.push_back(frobenius(delta));
    }

    const auto stop = std::chrono::steady_clock::now();
    entry.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    return {std::move(edited), entry};
}

std::pair<Checkpoint, EditLog> sequential_edit(const Checkpoint& ckpt,
                                               const std::vector<EditRequest>& requests,
                                               const EditPlan& plan,
                                               const std::vector<std::vector<int>>& retention_prompts,
                                               const Tokenizer& tok, uint64_t seed) {
    plan.validate(ckpt.config.n_layers);
    const size_t needed = static_cast<size_t>(plan.n_batches) * plan.batch_size;
    if (needed > requests.size())
        throw validation_error("not enough requests: plan needs " + std::to_string(needed) +
                               ", given " + std::to_string(requests.size()));

    const int u = plan.retention_size == -1 ? 4 * plan.batch_size : plan.retention_size;
    RetentionSets retention = sample_retention(ckpt, retention_prompts, plan.layers, u, seed);

    const uint64_t base_hash = ckpt.weights_hash();
    Checkpoint current = ckpt;
    EditLog log;
    for (int b = 0; b < plan.n_batches; ++b) {
        const std::vector<EditRequest> slice(requests.begin() + static_cast<size_t>(b) * plan.batch_size,
                                             requests.begin() +
                                                 static_cast<size_t>(b + 1) * plan.batch_size);
        auto [next, entry] = apply_batch_edit(current, slice, plan, retention, tok);
        entry.batch_index = b;
        log.entries.push_back(std::move(entry));
        current = std::move(next);

        if (plan.augment_retention_with_past_edits && b + 1 < plan.n_batches) {
            // Pin each just-edited request's key and post-edit output so later
            // batches preserve it.
            for (const auto& req : slice) {
                const int td = locate_decisive_token(req, tok);
                const std::vector<int> ids = tok.encode(req.prompt);
                std::vector<SiteRef> capture;
                for (int l : plan.layers) {
                    capture.push_back({l, Site::mlp_in, td});
                    capture.push_back({l, Site::mlp_out, td});
                }
                ForwardResult r = forward(current, ids, capture);
                for (size_t li = 0; li < plan.layers.size(); ++li)
                    retention[li].push_back({r.captured[2 * li], r.captured[2 * li + 1]});
            }
        }
    }

    current.edit_provenance =
        nlohmann::json{{"plan", plan.to_json()},
                       {"plan_hash", hash_hex(fnv1a64(plan.to_json().dump()))},
                       {"n_batches_applied", plan.n_batches},
                       {"base_weights_hash", hash_hex(base_hash)}};
    return {std::move(current), std::move(log)};
}

}  // namespace editlab
