#include "editlab/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "editlab/error.hpp"
#include "editlab/hash.hpp"
#include "editlab/text.hpp"

namespace editlab {
namespace {

bool parse_i64(const std::string& s, long long& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtoll(t.c_str(), &end, 10);
    return errno == 0 && end == t.c_str() + t.size();
}

bool parse_f64(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return errno == 0 && end == t.c_str() + t.size();
}

bool parse_bool(const std::string& s, bool& out) {
    const std::string t = lower(trim(s));
    if (t == "true" || t == "1") return out = true, true;
    if (t == "false" || t == "0") return out = false, true;
    return false;
}

std::string bad(const std::string& key, const std::string& value, const std::string& want) {
    return key + ": cannot parse '" + value + "' as " + want;
}

}  // namespace

std::string RunConfig::apply(const std::string& key, const std::string& value) {
    auto as_int = [&](int& slot) -> std::string {
        long long v = 0;
        if (!parse_i64(value, v)) return bad(key, value, "an integer");
        slot = static_cast<int>(v);
        return "";
    };
    auto as_u64 = [&](uint64_t& slot) -> std::string {
        long long v = 0;
        if (!parse_i64(value, v) || v < 0) return bad(key, value, "a non-negative integer");
        slot = static_cast<uint64_t>(v);
        return "";
    };
    auto as_double = [&](double& slot) -> std::string {
        double v = 0;
        if (!parse_f64(value, v)) return bad(key, value, "a number");
        slot = v;
        return "";
    };
    auto as_bool = [&](bool& slot) -> std::string {
        bool v = false;
        if (!parse_bool(value, v)) return bad(key, value, "true or false");
        slot = v;
        return "";
    };

    if (key == "seed") return as_u64(seed);
    if (key == "out") {
        out_dir = trim(value);
        return "";
    }

    if (key == "corpus.n_facts") return as_int(corpus.n_facts);
    if (key == "corpus.n_heldout") return as_int(corpus.n_heldout);
    if (key == "corpus.n_relations") return as_int(corpus.n_relations);
    if (key == "corpus.reps") return as_int(corpus.reps);
    if (key == "corpus.neg_reps") return as_int(corpus.neg_reps);
    if (key == "corpus.fc_reps") return as_int(corpus.fc_reps);

    if (key == "dataset.path") {
        dataset_path = trim(value);
        return "";
    }
    if (key == "dataset.format") {
        const std::string t = lower(trim(value));
        if (t == "mcf") {
            dataset_format = DatasetFormat::mcf;
        } else if (t == "zsre") {
            dataset_format = DatasetFormat::zsre;
        } else {
            return key + ": unknown format '" + value + "' (expected mcf or zsre)";
        }
        return "";
    }

    if (key == "model.n_layers") return as_int(model.n_layers);
    if (key == "model.d_model") return as_int(model.d_model);
    if (key == "model.n_heads") return as_int(model.n_heads);
    if (key == "model.d_mlp") return as_int(model.d_mlp);
    if (key == "model.context_len") return as_int(model.context_len);

    if (key == "train.steps") return as_int(train.steps);
    if (key == "train.max_steps") return as_int(train.max_steps);
    if (key == "train.batch_lines") return as_int(train.batch_lines);
    if (key == "train.lr") return as_double(train.lr);
    if (key == "train.warmup_steps") return as_int(train.warmup_steps);
    if (key == "train.min_lr_frac") return as_double(train.min_lr_frac);
    if (key == "train.grad_clip") return as_double(train.grad_clip);
    if (key == "train.window") return as_int(train.window);
    if (key == "train.stop_loss") return as_double(train.stop_loss);

    if (key == "plan.batch_size") return as_int(plan.batch_size);
    if (key == "plan.n_batches") return as_int(plan.n_batches);
    if (key == "plan.lambda_reg") return as_double(plan.lambda_reg);
    if (key == "plan.retention_size") return as_int(plan.retention_size);
    if (key == "plan.augment_retention") return as_bool(plan.augment_retention_with_past_edits);
    if (key == "plan.m_search.steps") return as_int(plan.m_search.steps);
    if (key == "plan.m_search.step_size") return as_double(plan.m_search.step_size);
    if (key == "plan.m_search.early_stop_p") return as_double(plan.m_search.early_stop_p);
    if (key == "plan.m_search.weight_decay") return as_double(plan.m_search.weight_decay);
    if (key == "plan.layers") {
        const std::string t = lower(trim(value));
        if (t == "auto") {
            layers_auto = true;
            return "";
        }
        std::vector<int> layers;
        std::stringstream ss(t);
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            long long v = 0;
            if (!parse_i64(piece, v))
                return key + ": cannot parse '" + value +
                       "' (expected 'auto' or comma-separated layer indices)";
            layers.push_back(static_cast<int>(v));
        }
        if (layers.empty()) return key + ": no layers given";
        layers_auto = false;
        plan.layers = std::move(layers);
        return "";
    }

    if (key == "metric") {
        try {
            metric = metric_kind_from_name(trim(value));
        } catch (const validation_error& e) {
            return key + ": " + e.what();
        }
        return "";
    }

    if (key == "trace.fact_index") return as_int(trace_fact_index);
    if (key == "trace.noise_scale") return as_double(trace_noise_scale);
    if (key == "trace.n_samples") return as_int(trace_noise_samples);

    return "unknown config key '" + key + "'";
}

void RunConfig::load_file(const std::string& path) {
    const std::string body = read_file(path);
    std::vector<std::string> problems;
    const auto lines = split_lines(body);
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        const size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.resize(hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(i + 1) + ": expected 'key = value', got '" +
                               line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            problems.push_back("line " + std::to_string(i + 1) + ": empty key");
            continue;
        }
        const std::string err = apply(key, value);
        if (!err.empty()) problems.push_back("line " + std::to_string(i + 1) + ": " + err);
    }
    if (!problems.empty()) {
        throw validation_error("config file " + path + ": " + join(problems, "; "));
    }
}

void RunConfig::validate() const {
    std::vector<std::string> problems;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) problems.push_back(msg);
    };

    check(!out_dir.empty(), "out: output directory must not be empty");

    if (!dataset_mode()) {
        check(corpus.n_facts >= 1, "corpus.n_facts: must be >= 1");
        check(corpus.n_heldout >= 0, "corpus.n_heldout: must be >= 0");
        check(corpus.n_relations >= 1, "corpus.n_relations: must be >= 1");
    }
    check(corpus.reps >= 1, "corpus.reps: must be >= 1");
    check(corpus.neg_reps >= 0, "corpus.neg_reps: must be >= 0");
    check(corpus.fc_reps >= 0, "corpus.fc_reps: must be >= 0");

    check(model.n_layers >= 1, "model.n_layers: must be >= 1");
    check(model.d_model >= 1, "model.d_model: must be >= 1");
    check(model.n_heads >= 1, "model.n_heads: must be >= 1");
    check(model.n_heads < 1 || model.d_model % model.n_heads == 0,
          "model.n_heads: must divide model.d_model");
    check(model.d_mlp >= 1, "model.d_mlp: must be >= 1");
    check(model.context_len >= 2, "model.context_len: must be >= 2");

    check(train.steps >= -1, "train.steps: must be >= 0, or -1 to run until the loss target");
    check(train.max_steps >= 1, "train.max_steps: must be >= 1");
    check(train.batch_lines >= 1, "train.batch_lines: must be >= 1");
    check(train.lr > 0, "train.lr: must be > 0");
    check(train.warmup_steps >= 0, "train.warmup_steps: must be >= 0");
    check(train.min_lr_frac > 0 && train.min_lr_frac <= 1.0,
          "train.min_lr_frac: must be in (0, 1]");
    check(train.grad_clip > 0, "train.grad_clip: must be > 0");
    check(train.window >= 1, "train.window: must be >= 1");
    check(train.stop_loss > 0, "train.stop_loss: must be > 0");

    check(plan.batch_size >= 1, "plan.batch_size: must be >= 1");
    check(plan.n_batches >= 1, "plan.n_batches: must be >= 1");
    check(plan.lambda_reg >= 0, "plan.lambda_reg: must be >= 0");
    check(plan.retention_size >= -1,
          "plan.retention_size: must be >= 0, or -1 for 4 * batch_size");
    check(plan.m_search.steps >= 1, "plan.m_search.steps: must be >= 1");
    check(plan.m_search.step_size > 0, "plan.m_search.step_size: must be > 0");
    check(plan.m_search.early_stop_p > 0 && plan.m_search.early_stop_p <= 1.0,
          "plan.m_search.early_stop_p: must be in (0, 1]");
    check(plan.m_search.weight_decay >= 0, "plan.m_search.weight_decay: must be >= 0");
    if (!layers_auto) {
        check(!plan.layers.empty(), "plan.layers: must name at least one layer");
        for (size_t i = 0; i < plan.layers.size(); ++i) {
            check(plan.layers[i] >= 0 && plan.layers[i] < model.n_layers,
                  "plan.layers: layer " + std::to_string(plan.layers[i]) +
                      " out of range [0, " + std::to_string(model.n_layers) + ")");
            if (i > 0)
                check(plan.layers[i - 1] < plan.layers[i],
                      "plan.layers: must be strictly ascending");
        }
    }

    check(trace_fact_index >= 0, "trace.fact_index: must be >= 0");
    check(trace_noise_scale == -1.0 || trace_noise_scale > 0,
          "trace.noise_scale: must be > 0, or -1 for the embedding-scaled default");
    check(trace_noise_samples >= 1, "trace.n_samples: must be >= 1");

    if (!problems.empty()) throw validation_error("invalid config: " + join(problems, "; "));
}

nlohmann::json RunConfig::resolved() const {
    nlohmann::json plan_json = plan.to_json();
    if (layers_auto) plan_json["layers"] = "auto";
    nlohmann::json j{
        {"seed", seed},
        {"out", out_dir},
        {"metric", metric_kind_name(metric)},
        {"model", model.to_json()},
        {"train", train.to_json()},
        {"plan", plan_json},
        {"trace",
         {{"fact_index", trace_fact_index},
          {"noise_scale", trace_noise_scale},
          {"n_samples", trace_noise_samples}}},
    };
    if (dataset_mode()) {
        j["dataset"] = {{"path", dataset_path},
                        {"format", dataset_format == DatasetFormat::mcf ? "mcf" : "zsre"}};
        j["corpus"] = {{"reps", corpus.reps},
                       {"neg_reps", corpus.neg_reps},
                       {"fc_reps", corpus.fc_reps}};
    } else {
        j["corpus"] = {{"n_facts", corpus.n_facts},     {"n_heldout", corpus.n_heldout},
                       {"n_relations", corpus.n_relations}, {"reps", corpus.reps},
                       {"neg_reps", corpus.neg_reps},   {"fc_reps", corpus.fc_reps}};
    }
    return j;
}

std::string RunConfig::config_hash() const {
    nlohmann::json j = resolved();
    j.erase("out");
    return hash_hex(fnv1a64(j.dump()));
}

namespace {

std::string hash_parts(std::initializer_list<std::string> parts) {
    uint64_t h = kFnvOffset;
    for (const auto& p : parts) h = fnv1a64(p, h);
    return hash_hex(h);
}

nlohmann::json corpus_section(const RunConfig& cfg) {
    nlohmann::json j = cfg.resolved();
    nlohmann::json out{{"seed", cfg.seed}, {"corpus", j["corpus"]}};
    if (cfg.dataset_mode()) out["dataset"] = j["dataset"];
    return out;
}

std::string plan_with_layers(const RunConfig& cfg, const std::vector<int>& layers) {
    nlohmann::json j = cfg.plan.to_json();
    j["layers"] = layers;
    return j.dump();
}

}  // namespace

std::string stage_hash_generate(const RunConfig& cfg) {
    return hash_parts({"generate", corpus_section(cfg).dump()});
}

std::string stage_hash_train(const RunConfig& cfg) {
    return hash_parts({"train", stage_hash_generate(cfg), cfg.model.to_json().dump(),
                       cfg.train.to_json().dump()});
}

std::string stage_hash_trace(const RunConfig& cfg) {
    nlohmann::json t{{"fact_index", cfg.trace_fact_index},
                     {"noise_scale", cfg.trace_noise_scale},
                     {"n_samples", cfg.trace_noise_samples}};
    return hash_parts({"trace", stage_hash_train(cfg), t.dump()});
}

std::string stage_hash_edit(const RunConfig& cfg, const std::vector<int>& layers) {
    return hash_parts({"edit", stage_hash_train(cfg), plan_with_layers(cfg, layers)});
}

std::string stage_hash_quadrants(const RunConfig& cfg, const std::vector<int>& layers) {
    return hash_parts({"quadrants", stage_hash_train(cfg), plan_with_layers(cfg, layers),
                       metric_kind_name(cfg.metric)});
}

std::string stage_hash_factcheck(const RunConfig& cfg, const std::vector<int>& layers) {
    return hash_parts({"factcheck", stage_hash_edit(cfg, layers)});
}

}  // namespace editlab
