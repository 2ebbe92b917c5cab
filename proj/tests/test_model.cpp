#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "editlab/error.hpp"
#include "editlab/kernels.hpp"
#include "editlab/model.hpp"
#include "editlab/rng.hpp"
#include "support/test_util.hpp"

using namespace editlab;
using testutil::rel_err;

namespace {

ModelConfig tiny_config(uint64_t seed = 3) {
    ModelConfig cfg;
    cfg.n_layers = 3;
    cfg.d_model = 32;
    cfg.n_heads = 2;
    cfg.d_mlp = 48;
    cfg.context_len = 12;
    cfg.vocab_size = 19;
    cfg.seed = seed;
    return cfg;
}

std::vector<int> tiny_prompt() { return {4, 9, 2, 17, 6, 3}; }

// Linear probe objective sum(dlogits . logits): its parameter gradient is
// exactly what run_backward reports, and finite differences can check it.
double probe_objective(const Checkpoint& ckpt, const PackedBatch& batch, const Mat& dlogits) {
    ForwardTrace tr;
    run_forward(ckpt, batch, tr);
    double s = 0.0;
    for (size_t i = 0; i < tr.logits.size(); ++i) s += tr.logits.a[i] * dlogits.a[i];
    return s;
}

}  // namespace

TEST_CASE("model config validation collects bad fields") {
    ModelConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.n_heads = 5;  // does not divide d_model
    CHECK_THROWS_AS(cfg.validate(), validation_error);
    cfg = tiny_config();
    cfg.vocab_size = 0;
    CHECK_THROWS_AS(cfg.validate(), validation_error);
    cfg = tiny_config();
    cfg.context_len = 0;
    CHECK_THROWS_AS(cfg.validate(), validation_error);
    cfg = tiny_config();
    CHECK(cfg.head_dim() == 16);
}

TEST_CASE("init is deterministic under seed and shapes are correct") {
    auto cfg = tiny_config(5);
    Checkpoint a = Checkpoint::init(cfg);
    Checkpoint b = Checkpoint::init(cfg);
    CHECK(a.weights_hash() == b.weights_hash());
    cfg.seed = 6;
    Checkpoint c = Checkpoint::init(cfg);
    CHECK(a.weights_hash() != c.weights_hash());

    CHECK(a.w.embed.rows == cfg.vocab_size);
    CHECK(a.w.embed.cols == cfg.d_model);
    CHECK(a.w.pos.rows == cfg.context_len);
    CHECK((int)a.w.layers.size() == cfg.n_layers);
    CHECK(a.w.layers[0].w_up.rows == cfg.d_mlp);
    CHECK(a.w.layers[0].w_up.cols == cfg.d_model);
    CHECK(a.w.layers[0].w_down.rows == cfg.d_model);
    CHECK(a.w.layers[0].w_down.cols == cfg.d_mlp);
    CHECK(a.w.unembed.rows == cfg.vocab_size);

    // named() exposes every tensor exactly once with stable names.
    auto names = a.w.named();
    CHECK(names.size() == 2 + 6 * a.w.layers.size() + 1);
    CHECK(names.front().first == "embed");
    CHECK(names.back().first == "unembed");
}

TEST_CASE("forward is deterministic and independent of the parallel switch") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    auto prompt = tiny_prompt();
    bool saved = kernels::parallel_enabled();
    kernels::set_parallel(false);
    auto a = forward(ckpt, prompt);
    kernels::set_parallel(true);
    auto b = forward(ckpt, prompt);
    kernels::set_parallel(saved);
    CHECK(a.logits.a == b.logits.a);
    CHECK(a.logits.rows == (int)prompt.size());
    CHECK(a.logits.cols == ckpt.config.vocab_size);
    for (double v : a.logits.a) CHECK(std::isfinite(v));
}

TEST_CASE("forward validates token ids and length") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    CHECK_THROWS_AS((void)forward(ckpt, {}), validation_error);
    CHECK_THROWS_AS((void)forward(ckpt, {0, 99}), validation_error);
    CHECK_THROWS_AS((void)forward(ckpt, {-1}), validation_error);
    std::vector<int> too_long(ckpt.config.context_len + 1, 2);
    CHECK_THROWS_AS((void)forward(ckpt, too_long), validation_error);
}

TEST_CASE("a line inside a packed batch matches the line forwarded alone") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    std::vector<std::vector<int>> lines = {{4, 9, 2}, {17, 6, 3, 5, 8}, {1, 2}};
    PackedBatch batch = PackedBatch::pack(lines);
    CHECK(batch.n_lines() == 3);
    CHECK(batch.n() == 10);
    ForwardTrace tr;
    run_forward(ckpt, batch, tr);
    for (int l = 0; l < batch.n_lines(); ++l) {
        auto single = forward(ckpt, lines[l]);
        int off = batch.offsets[l];
        for (int t = 0; t < (int)lines[l].size(); ++t)
            for (int v = 0; v < ckpt.config.vocab_size; ++v)
                CHECK(tr.logits(off + t, v) == single.logits(t, v));
    }
}

TEST_CASE("patching a captured value back is a bitwise no-op") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    auto prompt = tiny_prompt();
    for (Site site : {Site::embed, Site::mlp_in, Site::mlp_out, Site::block_out}) {
        CAPTURE(site_name(site));
        int layer = site == Site::embed ? 0 : 1;
        SiteRef ref{layer, site, 3};
        auto captured = forward(ckpt, prompt, {ref});
        REQUIRE(captured.captured.size() == 1);
        auto patched = forward(ckpt, prompt, {}, {SitePatch{ref, captured.captured[0]}});
        auto plain = forward(ckpt, prompt);
        CHECK(patched.logits.a == plain.logits.a);
    }
}

TEST_CASE("patching a different value changes downstream logits only") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    auto prompt = tiny_prompt();
    SiteRef ref{1, Site::block_out, 2};
    auto cap = forward(ckpt, prompt, {ref});
    Vec v = cap.captured[0];
    for (auto& x : v) x += 0.5;
    auto patched = forward(ckpt, prompt, {}, {SitePatch{ref, v}});
    auto plain = forward(ckpt, prompt);
    // Positions before the patch in the causal order are untouched.
    for (int t = 0; t < 2; ++t)
        for (int vv = 0; vv < ckpt.config.vocab_size; ++vv)
            CHECK(patched.logits(t, vv) == plain.logits(t, vv));
    // The patched position's own next-token distribution moves.
    double diff = 0.0;
    for (int vv = 0; vv < ckpt.config.vocab_size; ++vv)
        diff += std::fabs(patched.logits(5, vv) - plain.logits(5, vv));
    CHECK(diff > 0.0);
}

TEST_CASE("capture rejects out-of-range sites") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    auto prompt = tiny_prompt();
    CHECK_THROWS_AS((void)forward(ckpt, prompt, {SiteRef{99, Site::block_out, 0}}),
                    validation_error);
    CHECK_THROWS_AS((void)forward(ckpt, prompt, {SiteRef{0, Site::block_out, 99}}),
                    validation_error);
    CHECK_THROWS_AS((void)forward(ckpt, prompt, {SiteRef{1, Site::embed, 0}}), validation_error);
}

TEST_CASE("site names round-trip") {
    for (Site s : {Site::embed, Site::mlp_in, Site::mlp_out, Site::block_out}) {
        CHECK(site_from_name(site_name(s)) == s);
    }
    CHECK_THROWS_AS((void)site_from_name("bogus"), validation_error);
}

TEST_CASE("checkpoint serialization round-trips byte-stably") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    ckpt.training_meta["note"] = "tiny";
    std::string bytes = ckpt.serialize();
    Checkpoint back = Checkpoint::deserialize(bytes);
    CHECK(back.config == ckpt.config);
    CHECK(back.weights_hash() == ckpt.weights_hash());
    CHECK(back.training_meta == ckpt.training_meta);
    CHECK(back.serialize() == bytes);

    testutil::TmpDir dir("ckpt");
    std::string p = dir.file("m.ckpt");
    ckpt.save(p);
    Checkpoint loaded = Checkpoint::load(p);
    CHECK(loaded.weights_hash() == ckpt.weights_hash());
    CHECK(loaded.serialize() == bytes);

    CHECK_THROWS_AS((void)Checkpoint::deserialize("garbage"), validation_error);
    std::string truncated = bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS((void)Checkpoint::deserialize(truncated), validation_error);
}

TEST_CASE("greedy_decode emits argmax tokens deterministically") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    auto prompt = tiny_prompt();
    auto out1 = greedy_decode(ckpt, prompt, 3);
    auto out2 = greedy_decode(ckpt, prompt, 3);
    CHECK(out1 == out2);
    CHECK(out1.size() == 3);
    // First decoded token is the argmax of the prompt's final logit row.
    auto fwd = forward(ckpt, prompt);
    int best = 0;
    for (int v = 1; v < ckpt.config.vocab_size; ++v)
        if (fwd.logits((int)prompt.size() - 1, v) > fwd.logits((int)prompt.size() - 1, best))
            best = v;
    CHECK(out1[0] == best);
    CHECK(greedy_decode(ckpt, prompt, 0).empty());
    // Requests that would overflow the context are rejected up front.
    CHECK_THROWS_AS((void)greedy_decode(ckpt, prompt, 100), validation_error);
    CHECK_THROWS_AS((void)greedy_decode(ckpt, prompt, -1), validation_error);
}

TEST_CASE("sequence_logprob matches a manual computation") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    std::vector<int> prompt = {4, 9, 2};
    std::vector<int> cont = {17, 6};
    double lp = sequence_logprob(ckpt, prompt, cont);

    std::vector<int> full = prompt;
    full.insert(full.end(), cont.begin(), cont.end());
    auto fwd = forward(ckpt, full);
    double manual = 0.0;
    for (size_t i = 0; i < cont.size(); ++i) {
        int row = (int)(prompt.size() + i - 1);
        std::vector<double> p(fwd.logits.row(row), fwd.logits.row(row) + fwd.logits.cols);
        kernels::softmax_row(p.data(), (int)p.size());
        manual += std::log(p[cont[i]]);
    }
    manual /= (double)cont.size();
    CHECK(rel_err(lp, manual) < 1e-12);
    CHECK_THROWS_AS((void)sequence_logprob(ckpt, prompt, {}), validation_error);
}

TEST_CASE("backward parameter gradients match finite differences on probe entries") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    PackedBatch batch = PackedBatch::pack({{4, 9, 2, 17}, {6, 3, 5}});
    Rng rng(77);
    Mat dlogits(batch.n(), ckpt.config.vocab_size);
    for (auto& v : dlogits.a) v = rng.normal();

    ForwardTrace tr;
    run_forward(ckpt, batch, tr);
    BackwardResult bw = run_backward(ckpt, batch, tr, dlogits, /*param_grads=*/true,
                                     /*stop_layer=*/-1);

    auto grads = bw.grads.named();
    auto params = ckpt.w.named();
    REQUIRE(grads.size() == params.size());
    const double h = 1e-5;
    for (size_t g = 0; g < grads.size(); ++g) {
        const Mat* gm = grads[g].second;
        Mat* pm = params[g].second;
        REQUIRE(gm->size() == pm->size());
        // A handful of spread probe indices per tensor.
        for (size_t probe = 0; probe < 5; ++probe) {
            size_t idx = (probe * 2654435761u + 17) % pm->size();
            double orig = pm->a[idx];
            pm->a[idx] = orig + h;
            double up = probe_objective(ckpt, batch, dlogits);
            pm->a[idx] = orig - h;
            double dn = probe_objective(ckpt, batch, dlogits);
            pm->a[idx] = orig;
            double fd = (up - dn) / (2 * h);
            INFO("tensor ", grads[g].first, " idx ", idx);
            if (std::fabs(fd) < 1e-10) {
                CHECK(std::fabs(gm->a[idx]) < 1e-8);
            } else {
                CHECK(rel_err(gm->a[idx], fd) < 1e-5);
            }
        }
    }
}

TEST_CASE("backward stop_layer gradient matches finite differences through a patch") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    PackedBatch batch = PackedBatch::single(tiny_prompt());
    Rng rng(78);
    Mat dlogits(batch.n(), ckpt.config.vocab_size);
    for (auto& v : dlogits.a) v = rng.normal();

    const int stop_layer = 1;
    ForwardTrace tr;
    run_forward(ckpt, batch, tr);
    BackwardResult bw =
        run_backward(ckpt, batch, tr, dlogits, /*param_grads=*/false, stop_layer);
    REQUIRE(bw.d_block_out.rows == batch.n());
    REQUIRE(bw.d_block_out.cols == ckpt.config.d_model);

    // Perturb block_out at (token 3) via a patch and compare objectives.
    const int token = 3;
    SiteRef ref{stop_layer, Site::block_out, token};
    auto base = forward(ckpt, tiny_prompt(), {ref});
    const Vec& v0 = base.captured[0];
    const double h = 1e-5;
    for (int d = 0; d < ckpt.config.d_model; d += 7) {
        Vec vp = v0, vm = v0;
        vp[d] += h;
        vm[d] -= h;
        ForwardTrace tp, tm;
        run_forward(ckpt, batch, tp, {SitePatch{ref, vp}});
        run_forward(ckpt, batch, tm, {SitePatch{ref, vm}});
        double up = 0.0, dn = 0.0;
        for (size_t i = 0; i < tp.logits.size(); ++i) {
            up += tp.logits.a[i] * dlogits.a[i];
            dn += tm.logits.a[i] * dlogits.a[i];
        }
        double fd = (up - dn) / (2 * h);
        INFO("dim ", d);
        if (std::fabs(fd) < 1e-10) {
            CHECK(std::fabs(bw.d_block_out(token, d)) < 1e-8);
        } else {
            CHECK(rel_err(bw.d_block_out(token, d), fd) < 1e-5);
        }
    }
}

TEST_CASE("run_forward and run_backward are bit-identical across the parallel switch") {
    Checkpoint ckpt = Checkpoint::init(tiny_config());
    PackedBatch batch = PackedBatch::pack({{4, 9, 2, 17}, {6, 3, 5}});
    Rng rng(79);
    Mat dlogits(batch.n(), ckpt.config.vocab_size);
    for (auto& v : dlogits.a) v = rng.normal();

    bool saved = kernels::parallel_enabled();
    kernels::set_parallel(false);
    ForwardTrace t1;
    run_forward(ckpt, batch, t1);
    BackwardResult b1 = run_backward(ckpt, batch, t1, dlogits, true, -1);
    kernels::set_parallel(true);
    ForwardTrace t2;
    run_forward(ckpt, batch, t2);
    BackwardResult b2 = run_backward(ckpt, batch, t2, dlogits, true, -1);
    kernels::set_parallel(saved);

    CHECK(t1.logits.a == t2.logits.a);
    auto g1 = b1.grads.named();
    auto g2 = b2.grads.named();
    for (size_t i = 0; i < g1.size(); ++i) {
        INFO("tensor ", g1[i].first);
        CHECK(g1[i].second->a == g2[i].second->a);
    }
}
