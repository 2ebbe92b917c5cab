#include "editlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "editlab/error.hpp"
#include "editlab/hash.hpp"
#include "editlab/kernels.hpp"
#include "editlab/rng.hpp"
#include "editlab/text.hpp"

namespace editlab {

using kernels::par_for;

// ---- config ----

void ModelConfig::validate() const {
    std::vector<std::string> problems;
    if (n_layers < 1) problems.push_back("n_layers must be >= 1");
    if (d_model < 1) problems.push_back("d_model must be >= 1");
    if (n_heads < 1) problems.push_back("n_heads must be >= 1");
    if (n_heads >= 1 && d_model % n_heads != 0)
        problems.push_back("d_model must be divisible by n_heads");
    if (d_mlp < 1) problems.push_back("d_mlp must be >= 1");
    if (context_len < 2) problems.push_back("context_len must be >= 2");
    if (vocab_size < 3) problems.push_back("vocab_size must be >= 3");
    if (!problems.empty()) throw validation_error("invalid model config: " + join(problems, "; "));
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{{"n_layers", n_layers},       {"d_model", d_model},
                          {"n_heads", n_heads},         {"d_mlp", d_mlp},
                          {"context_len", context_len}, {"vocab_size", vocab_size},
                          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_mlp = j.at("d_mlp").get<int>();
    c.context_len = j.at("context_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

const char* site_name(Site s) {
    switch (s) {
        case Site::embed: return "embed";
        case Site::mlp_in: return "mlp_in";
        case Site::mlp_out: return "mlp_out";
        case Site::block_out: return "block_out";
    }
    return "?";
}

Site site_from_name(const std::string& name) {
    if (name == "embed") return Site::embed;
    if (name == "mlp_in") return Site::mlp_in;
    if (name == "mlp_out") return Site::mlp_out;
    if (name == "block_out") return Site::block_out;
    throw validation_error("unknown site name: '" + name + "'");
}

// ---- weights ----

Weights Weights::zeros_like(const ModelConfig& cfg) {
    Weights w;
    w.embed = Mat(cfg.vocab_size, cfg.d_model);
    w.pos = Mat(cfg.context_len, cfg.d_model);
    w.layers.resize(cfg.n_layers);
    for (auto& l : w.layers) {
        l.wq = Mat(cfg.d_model, cfg.d_model);
        l.wk = Mat(cfg.d_model, cfg.d_model);
        l.wv = Mat(cfg.d_model, cfg.d_model);
        l.wo = Mat(cfg.d_model, cfg.d_model);
        l.w_up = Mat(cfg.d_mlp, cfg.d_model);
        l.w_down = Mat(cfg.d_model, cfg.d_mlp);
    }
    w.unembed = Mat(cfg.vocab_size, cfg.d_model);
    return w;
}

std::vector<std::pair<std::string, Mat*>> Weights::named() {
    std::vector<std::pair<std::string, Mat*>> out;
    out.emplace_back("embed", &embed);
    out.emplace_back("pos", &pos);
    for (size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        out.emplace_back(p + "wq", &layers[i].wq);
        out.emplace_back(p + "wk", &layers[i].wk);
        out.emplace_back(p + "wv", &layers[i].wv);
        out.emplace_back(p + "wo", &layers[i].wo);
        out.emplace_back(p + "w_up", &layers[i].w_up);
        out.emplace_back(p + "w_down", &layers[i].w_down);
    }
    out.emplace_back("unembed", &unembed);
    return out;
}

std::vector<std::pair<std::string, const Mat*>> Weights::named() const {
    std::vector<std::pair<std::string, const Mat*>> out;
    for (auto& [name, mat] : const_cast<Weights*>(this)->named()) out.emplace_back(name, mat);
    return out;
}

// ---- checkpoint ----

Checkpoint Checkpoint::init(const ModelConfig& cfg) {
    cfg.validate();
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.w = Weights::zeros_like(cfg);
    Rng rng(cfg.seed);
    const double base = 0.02;
    const double resid = base / std::sqrt(2.0 * cfg.n_layers);
    for (auto& [name, mat] : ckpt.w.named()) {
        const bool residual_proj = ends_with(name, ".wo") || ends_with(name, ".w_down");
        const double std = residual_proj ? resid : base;
        for (double& v : mat->a) v = rng.normal(0.0, std);
    }
    ckpt.training_meta = nlohmann::json{{"steps", 0}};
    return ckpt;
}

uint64_t Checkpoint::weights_hash() const {
    uint64_t h = kFnvOffset;
    for (const auto& [name, mat] : w.named()) {
        h = fnv1a64(name, h);
        h = fnv1a64(mat->a, h);
    }
    return h;
}

std::string Checkpoint::serialize() const {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, mat] : w.named())
        tensors.push_back({{"name", name}, {"rows", mat->rows}, {"cols", mat->cols}});
    nlohmann::json header{{"format", "editlab-checkpoint"},
                          {"version", 1},
                          {"config", config.to_json()},
                          {"training_meta", training_meta},
                          {"edit_provenance", edit_provenance},
                          {"tensors", tensors}};
    const std::string hdr = header.dump();

    std::string out = "EDLM";
    uint64_t len = hdr.size();
    out.append(reinterpret_cast<const char*>(&len), sizeof(len));
    out += hdr;
    for (const auto& [name, mat] : w.named()) {
        out.append(reinterpret_cast<const char*>(mat->a.data()), mat->a.size() * sizeof(double));
    }
    return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
    if (bytes.size() < 12 || bytes.compare(0, 4, "EDLM") != 0)
        throw validation_error("not a checkpoint container");
    uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 4, sizeof(len));
    if (12 + len > bytes.size()) throw validation_error("checkpoint header truncated");
    nlohmann::json header = nlohmann::json::parse(bytes.substr(12, len));
    if (header.at("version").get<int>() != 1)
        throw validation_error("unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.config = ModelConfig::from_json(header.at("config"));
    ckpt.config.validate();
    ckpt.training_meta = header.at("training_meta");
    ckpt.edit_provenance = header.at("edit_provenance");
    ckpt.w = Weights::zeros_like(ckpt.config);

    const auto& tensors = header.at("tensors");
    auto named = ckpt.w.named();
    if (tensors.size() != named.size())
        throw validation_error("checkpoint tensor count mismatch");
    size_t off = 12 + len;
    for (size_t i = 0; i < named.size(); ++i) {
        const auto& t = tensors[i];
        auto& [name, mat] = named[i];
        if (t.at("name").get<std::string>() != name || t.at("rows").get<int>() != mat->rows ||
            t.at("cols").get<int>() != mat->cols) {
            throw validation_error("checkpoint tensor mismatch at '" + name + "'");
        }
        const size_t bytes_needed = mat->a.size() * sizeof(double);
        if (off + bytes_needed > bytes.size())
            throw validation_error("checkpoint data truncated at '" + name + "'");
        std::memcpy(mat->a.data(), bytes.data() + off, bytes_needed);
        off += bytes_needed;
    }
    if (off != bytes.size()) throw validation_error("checkpoint has trailing bytes");
    return ckpt;
}

void Checkpoint::save(const std::string& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return deserialize(read_file(path)); }

// ---- packing ----

PackedBatch PackedBatch::single(const std::vector<int>& tokens) {
    PackedBatch b;
    b.tokens = tokens;
    b.offsets = {0, static_cast<int>(tokens.size())};
    return b;
}

PackedBatch PackedBatch::pack(const std::vector<std::vector<int>>& lines) {
    PackedBatch b;
    b.offsets.push_back(0);
    for (const auto& line : lines) {
        b.tokens.insert(b.tokens.end(), line.begin(), line.end());
        b.offsets.push_back(static_cast<int>(b.tokens.size()));
    }
    return b;
}

// ---- forward ----

namespace {

void validate_ref(const ModelConfig& cfg, const SiteRef& ref, int n_tokens) {
    if (ref.token < 0 || ref.token >= n_tokens)
        throw validation_error("site token out of range: " + std::to_string(ref.token));
    if (ref.site == Site::embed) {
        if (ref.layer != 0) throw validation_error("embed site requires layer 0");
        return;
    }
    if (ref.layer < 0 || ref.layer >= cfg.n_layers)
        throw validation_error("site layer out of range: " + std::to_string(ref.layer));
}

int site_dim(const ModelConfig& cfg, Site s) {
    return s == Site::mlp_in ? cfg.d_mlp : cfg.d_model;
}

void apply_patches(const std::vector<SitePatch>& patches, int layer, Site site, Mat& m) {
    for (const auto& p : patches) {
        if (p.ref.site != site) continue;
        if (site != Site::embed && p.ref.layer != layer) continue;
        std::copy(p.value.begin(), p.value.end(), m.row(p.ref.token));
    }
}

}  // namespace

void run_forward(const Checkpoint& ckpt, const PackedBatch& batch, ForwardTrace& trace,
                 const std::vector<SitePatch>& patches) {
    const ModelConfig& cfg = ckpt.config;
    const int n = batch.n();
    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = cfg.head_dim();
    const int L = batch.n_lines();
    if (n == 0) throw validation_error("empty token sequence");

    for (int l = 0; l < L; ++l) {
        const int t_len = batch.offsets[l + 1] - batch.offsets[l];
        if (t_len < 1) throw validation_error("empty line in batch");
        if (t_len > cfg.context_len)
            throw validation_error("sequence length " + std::to_string(t_len) +
                                   " exceeds context " + std::to_string(cfg.context_len));
    }
    for (int t : batch.tokens) {
        if (t < 0 || t >= cfg.vocab_size)
            throw validation_error("token id out of range: " + std::to_string(t));
    }
    for (const auto& p : patches) {
        validate_ref(cfg, p.ref, n);
        const int want = site_dim(cfg, p.ref.site);
        if (static_cast<int>(p.value.size()) != want)
            throw validation_error("patch value dimension mismatch at " +
                                   std::string(site_name(p.ref.site)));
    }

    // line index per packed row
    std::vector<int> line_of(n);
    for (int l = 0; l < L; ++l)
        for (int r = batch.offsets[l]; r < batch.offsets[l + 1]; ++r) line_of[r] = l;

    trace.x0 = Mat(n, d);
    par_for(n, [&](int r) {
        const double* e = ckpt.w.embed.row(batch.tokens[r]);
        const double* p = ckpt.w.pos.row(r - batch.offsets[line_of[r]]);
        double* x = trace.x0.row(r);
        for (int j = 0; j < d; ++j) x[j] = e[j] + p[j];
    });
    apply_patches(patches, 0, Site::embed, trace.x0);

    trace.layers.assign(cfg.n_layers, LayerTrace{});
    const Mat* x = &trace.x0;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (int li = 0; li < cfg.n_layers; ++li) {
        LayerTrace& lt = trace.layers[li];
        const LayerWeights& lw = ckpt.w.layers[li];

        lt.ln1 = Mat(n, d);
        lt.ln1_rstd.assign(n, 0.0);
        kernels::layernorm(x->data(), lt.ln1.data(), lt.ln1_rstd.data(), n, d);

        lt.q = Mat(n, d);
        lt.k = Mat(n, d);
        lt.v = Mat(n, d);
        kernels::matmul_nt(lt.ln1, lw.wq, lt.q);
        kernels::matmul_nt(lt.ln1, lw.wk, lt.k);
        kernels::matmul_nt(lt.ln1, lw.wv, lt.v);

        lt.attn_mix = Mat(n, d);
        lt.probs.assign(static_cast<size_t>(L) * H, Mat());
        par_for(L * H, [&](int idx) {
            const int l = idx / H;
            const int h = idx % H;
            const int off = batch.offsets[l];
            const int T = batch.offsets[l + 1] - off;
            Mat& P = lt.probs[idx];
            P = Mat(T, T);
            std::vector<double> s(T);
            for (int i = 0; i < T; ++i) {
                const double* qi = lt.q.row(off + i) + h * dh;
                for (int j = 0; j <= i; ++j) {
                    const double* kj = lt.k.row(off + j) + h * dh;
                    double dot = 0.0;
                    for (int c = 0; c < dh; ++c) dot += qi[c] * kj[c];
                    s[j] = dot * scale;
                }
                kernels::softmax_row(s.data(), i + 1);
                double* mix = lt.attn_mix.row(off + i) + h * dh;
                for (int c = 0; c < dh; ++c) mix[c] = 0.0;
                for (int j = 0; j <= i; ++j) {
                    P(i, j) = s[j];
                    const double* vj = lt.v.row(off + j) + h * dh;
                    for (int c = 0; c < dh; ++c) mix[c] += s[j] * vj[c];
                }
            }
        });

        lt.attn_out = Mat(n, d);
        kernels::matmul_nt(lt.attn_mix, lw.wo, lt.attn_out);

        lt.x1 = Mat(n, d);
        par_for(n, [&](int r) {
            const double* a = x->row(r);
            const double* b = lt.attn_out.row(r);
            double* y = lt.x1.row(r);
            for (int j = 0; j < d; ++j) y[j] = a[j] + b[j];
        });

        lt.ln2 = Mat(n, d);
        lt.ln2_rstd.assign(n, 0.0);
        kernels::layernorm(lt.x1.data(), lt.ln2.data(), lt.ln2_rstd.data(), n, d);

        lt.mlp_pre = Mat(n, cfg.d_mlp);
        kernels::matmul_nt(lt.ln2, lw.w_up, lt.mlp_pre);
        lt.mlp_act = Mat(n, cfg.d_mlp);
        kernels::gelu(lt.mlp_pre.data(), lt.mlp_act.data(), lt.mlp_act.size());
        apply_patches(patches, li, Site::mlp_in, lt.mlp_act);

        lt.mlp_out = Mat(n, d);
        kernels::matmul_nt(lt.mlp_act, lw.w_down, lt.mlp_out);
        apply_patches(patches, li, Site::mlp_out, lt.mlp_out);

        lt.x2 = Mat(n, d);
        par_for(n, [&](int r) {
            const double* a = lt.x1.row(r);
            const double* b = lt.mlp_out.row(r);
            double* y = lt.x2.row(r);
            for (int j = 0; j < d; ++j) y[j] = a[j] + b[j];
        });
        apply_patches(patches, li, Site::block_out, lt.x2);

        x = &lt.x2;
    }

    trace.lnf = Mat(n, d);
    trace.lnf_rstd.assign(n, 0.0);
    kernels::layernorm(x->data(), trace.lnf.data(), trace.lnf_rstd.data(), n, d);
    trace.logits = Mat(n, cfg.vocab_size);
    kernels::matmul_nt(trace.lnf, ckpt.w.unembed, trace.logits);
}

// ---- backward ----

BackwardResult run_backward(const Checkpoint& ckpt, const PackedBatch& batch,
                            const ForwardTrace& trace, const Mat& dlogits, bool param_grads,
                            int stop_layer) {
    const ModelConfig& cfg = ckpt.config;
    const int n = batch.n();
    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = cfg.head_dim();
    const int L = batch.n_lines();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    BackwardResult res;
    if (param_grads) res.grads = Weights::zeros_like(cfg);

    // logits = lnf * unembed^T
    Mat dlnf(n, d);
    kernels::matmul(dlogits.data(), ckpt.w.unembed.data(), dlnf.data(), n, d, cfg.vocab_size);
    if (param_grads) kernels::matmul_tn_acc(dlogits, trace.lnf, res.grads.unembed);

    Mat dx(n, d);
    kernels::layernorm_grad(trace.lnf.data(), trace.lnf_rstd.data(), dlnf.data(), dx.data(), n, d);

    for (int li = cfg.n_layers - 1; li >= 0; --li) {
        if (li == stop_layer) {
            res.d_block_out = std::move(dx);
            return res;
        }
        const LayerTrace& lt = trace.layers[li];
        const LayerWeights& lw = ckpt.w.layers[li];

        // x2 = x1 + mlp_out
        const Mat& dmo = dx;
        Mat dact(n, cfg.d_mlp);
        kernels::matmul(dmo.data(), lw.w_down.data(), dact.data(), n, cfg.d_mlp, d);
        if (param_grads) kernels::matmul_tn_acc(dmo, lt.mlp_act, res.grads.layers[li].w_down);

        Mat dpre(n, cfg.d_mlp);
        kernels::gelu_grad(lt.mlp_pre.data(), dact.data(), dpre.data(), dpre.size());
        if (param_grads) kernels::matmul_tn_acc(dpre, lt.ln2, res.grads.layers[li].w_up);

        Mat dln2(n, d);
        kernels::matmul(dpre.data(), lw.w_up.data(), dln2.data(), n, d, cfg.d_mlp);

        Mat dx1(n, d);
        kernels::layernorm_grad(lt.ln2.data(), lt.ln2_rstd.data(), dln2.data(), dx1.data(), n, d);
        par_for(n, [&](int r) {
            const double* a = dx.row(r);
            double* y = dx1.row(r);
            for (int j = 0; j < d; ++j) y[j] += a[j];
        });

        // x1 = x_in + attn_out
        const Mat& dao = dx1;
        Mat dmix(n, d);
        kernels::matmul(dao.data(), lw.wo.data(), dmix.data(), n, d, d);
        if (param_grads) kernels::matmul_tn_acc(dao, lt.attn_mix, res.grads.layers[li].wo);

        Mat dq(n, d), dk(n, d), dv(n, d);
        dq.zero();
        dk.zero();
        dv.zero();
        par_for(L * H, [&](int idx) {
            const int l = idx / H;
            const int h = idx % H;
            const int off = batch.offsets[l];
            const int T = batch.offsets[l + 1] - off;
            const Mat& P = lt.probs[idx];
            std::vector<double> dp(T);
            for (int i = 0; i < T; ++i) {
                const double* dmix_i = dmix.row(off + i) + h * dh;
                double dot_pd = 0.0;
                for (int j = 0; j <= i; ++j) {
                    const double* vj = lt.v.row(off + j) + h * dh;
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += dmix_i[c] * vj[c];
                    dp[j] = s;
                    dot_pd += P(i, j) * s;
                    double* dvj = dv.row(off + j) + h * dh;
                    for (int c = 0; c < dh; ++c) dvj[c] += P(i, j) * dmix_i[c];
                }
                const double* qi = lt.q.row(off + i) + h * dh;
                double* dqi = dq.row(off + i) + h * dh;
                for (int j = 0; j <= i; ++j) {
                    const double ds = P(i, j) * (dp[j] - dot_pd) * scale;
                    const double* kj = lt.k.row(off + j) + h * dh;
                    double* dkj = dk.row(off + j) + h * dh;
                    for (int c = 0; c < dh; ++c) {
                        dqi[c] += ds * kj[c];
                        dkj[c] += ds * qi[c];
                    }
                }
            }
        });

        if (param_grads) {
            kernels::matmul_tn_acc(dq, lt.ln1, res.grads.layers[li].wq);
            kernels::matmul_tn_acc(dk, lt.ln1, res.grads.layers[li].wk);
            kernels::matmul_tn_acc(dv, lt.ln1, res.grads.layers[li].wv);
        }

        Mat dln1(n, d), tmp(n, d);
        kernels::matmul(dq.data(), lw.wq.data(), dln1.data(), n, d, d);
        kernels::matmul(dk.data(), lw.wk.data(), tmp.data(), n, d, d);
        par_for(n, [&](int r) {
            double* y = dln1.row(r);
            const double* t = tmp.row(r);
            for (int j = 0; j < d; ++j) y[j] += t[j];
        });
        kernels::matmul(dv.data(), lw.wv.data(), tmp.data(), n, d, d);
        par_for(n, [&](int r) {
            double* y = dln1.row(r);
            const double* t = tmp.row(r);
            for (int j = 0; j < d; ++j) y[j] += t[j];
        });

        Mat dx_in(n, d);
        kernels::layernorm_grad(lt.ln1.data(), lt.ln1_rstd.data(), dln1.data(), dx_in.data(), n,
                                d);
        par_for(n, [&](int r) {
            const double* a = dx1.row(r);
            double* y = dx_in.row(r);
            for (int j = 0; j < d; ++j) y[j] += a[j];
        });
        dx = std::move(dx_in);
    }

    if (param_grads) {
        // embedding and positional grads, accumulated serially by token id
        std::vector<int> line_of(n);
        for (int l = 0; l < L; ++l)
            for (int r = batch.offsets[l]; r < batch.offsets[l + 1]; ++r) line_of[r] = l;
        for (int r = 0; r < n; ++r) {
            double* de = res.grads.embed.row(batch.tokens[r]);
            double* dp = res.grads.pos.row(r - batch.offsets[line_of[r]]);
            const double* g = dx.row(r);
            for (int j = 0; j < d; ++j) {
                de[j] += g[j];
                dp[j] += g[j];
            }
        }
    }
    if (stop_layer == -1) res.d_block_out = std::move(dx);
    return res;
}

// ---- public single-sequence ops ----

ForwardResult forward(const Checkpoint& ckpt, const std::vector<int>& tokens,
                      const std::vector<SiteRef>& capture, const std::vector<SitePatch>& patches) {
    for (const auto& ref : capture) validate_ref(ckpt.config, ref, static_cast<int>(tokens.size()));
    PackedBatch batch = PackedBatch::single(tokens);
    ForwardTrace trace;
    run_forward(ckpt, batch, trace, patches);

    ForwardResult out;
    out.logits = std::move(trace.logits);
    for (const auto& ref : capture) {
        const Mat* src = nullptr;
        switch (ref.site) {
            case Site::embed: src = &trace.x0; break;
            case Site::mlp_in: src = &trace.layers[ref.layer].mlp_act; break;
            case Site::mlp_out: src = &trace.layers[ref.layer].mlp_out; break;
            case Site::block_out: src = &trace.layers[ref.layer].x2; break;
        }
        out.captured.emplace_back(src->row(ref.token), src->row(ref.token) + src->cols);
    }
    return out;
}

std::vector<int> greedy_decode(const Checkpoint& ckpt, const std::vector<int>& prompt,
                               int max_new) {
    if (prompt.empty()) throw validation_error("empty prompt");
    if (max_new < 0) throw validation_error("max_new must be >= 0");
    if (static_cast<int>(prompt.size()) + max_new > ckpt.config.context_len)
        throw validation_error("prompt plus decode length exceeds context");

    std::vector<int> seq = prompt;
    std::vector<int> out;
    for (int step = 0; step < max_new; ++step) {
        ForwardResult r = forward(ckpt, seq);
        const double* logits = r.logits.row(r.logits.rows - 1);
        int best = 0;
        for (int j = 1; j < ckpt.config.vocab_size; ++j)
            if (logits[j] > logits[best]) best = j;
        out.push_back(best);
        seq.push_back(best);
    }
    return out;
}

double sequence_logprob(const Checkpoint& ckpt, const std::vector<int>& prompt,
                        const std::vector<int>& continuation) {
    if (prompt.empty()) throw validation_error("empty prompt");
    if (continuation.empty()) throw validation_error("empty continuation");
    std::vector<int> seq = prompt;
    seq.insert(seq.end(), continuation.begin(), continuation.end());
    if (static_cast<int>(seq.size()) > ckpt.config.context_len)
        throw validation_error("prompt plus continuation exceeds context");

    ForwardResult r = forward(ckpt, seq);
    const int V = ckpt.config.vocab_size;
    double total = 0.0;
    for (size_t i = 0; i < continuation.size(); ++i) {
        const int row = static_cast<int>(prompt.size() + i) - 1;
        const double* logits = r.logits.row(row);
        double mx = logits[0];
        for (int j = 1; j < V; ++j) mx = std::max(mx, logits[j]);
        double lse = 0.0;
        for (int j = 0; j < V; ++j) lse += std::exp(logits[j] - mx);
        total += logits[continuation[i]] - mx - std::log(lse);
    }
    return total / static_cast<double>(continuation.size());
}

}  // namespace editlab
