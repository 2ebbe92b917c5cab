#include "editlab/pipeline.hpp"

#include <filesystem>
#include <ostream>

#include "editlab/error.hpp"
#include "editlab/evalsuite.hpp"
#include "editlab/hash.hpp"
#include "editlab/manifest.hpp"
#include "editlab/report.hpp"
#include "editlab/table_audit.hpp"
#include "editlab/text.hpp"
#include "editlab/tracing.hpp"

namespace editlab {
namespace {

namespace fs = std::filesystem;

fs::path in_dir(const RunConfig& cfg, const char* name) {
    return fs::path(cfg.out_dir) / name;
}

void require_artifact(const RunConfig& cfg, const char* name, const char* producer) {
    if (!fs::exists(in_dir(cfg, name))) {
        throw validation_error("missing artifact '" + std::string(name) + "' in " + cfg.out_dir +
                               "; run 'editlab " + producer + "' first");
    }
}

Corpus load_corpus_artifacts(const RunConfig& cfg) {
    Corpus corpus;
    try {
        corpus = Corpus::from_json(nlohmann::json::parse(read_file(in_dir(cfg, artifact::kCorpus).string())));
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error("corrupt artifact 'corpus.json' in " + cfg.out_dir + ": " +
                               e.what());
    }
    corpus.train_text = read_file(in_dir(cfg, artifact::kTrainText).string());
    return corpus;
}

Tokenizer load_tokenizer_artifact(const RunConfig& cfg) {
    try {
        return Tokenizer::from_json(
            nlohmann::json::parse(read_file(in_dir(cfg, artifact::kTokenizer).string())));
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error("corrupt artifact 'tokenizer.json' in " + cfg.out_dir + ": " +
                               e.what());
    }
}

// Records the model can actually edit under this tokenizer: prompt and target
// must tokenize (always true for a synthetic corpus; external datasets are
// filtered).
std::vector<const FactRecord*> editable_records(const Corpus& corpus, const Tokenizer& tok) {
    std::vector<const FactRecord*> out;
    for (const auto& rec : corpus.records) {
        const auto prompt = tok.try_encode(render_prompt(rec).text);
        const auto target = tok.try_encode(rec.target_new);
        if (prompt && target && !target->empty()) out.push_back(&rec);
    }
    return out;
}

// The records a given plan edits: the first batch_size * n_batches editable
// ones, in corpus order. Deterministic so that factcheck can reconstruct the
// set cmd_edit used.
std::vector<FactRecord> planned_records(const Corpus& corpus, const Tokenizer& tok,
                                        const EditPlan& plan) {
    const auto pool = editable_records(corpus, tok);
    const size_t need = static_cast<size_t>(plan.batch_size) * plan.n_batches;
    if (pool.size() < need) {
        throw validation_error("not enough editable records: plan needs " + std::to_string(need) +
                               ", corpus has " + std::to_string(pool.size()));
    }
    std::vector<FactRecord> out;
    out.reserve(need);
    for (size_t i = 0; i < need; ++i) out.push_back(*pool[i]);
    return out;
}

// Retention prompts: held-out background facts when present, else editable
// records beyond the planned range. Only prompts that tokenize are used.
std::vector<std::vector<int>> retention_prompt_tokens(const Corpus& corpus, const Tokenizer& tok,
                                                      size_t n_planned) {
    std::vector<std::vector<int>> out;
    auto add = [&](const FactRecord& rec) {
        if (const auto toks = tok.try_encode(render_prompt(rec).text); toks && toks->size() > 0)
            out.push_back(*toks);
    };
    for (const auto& rec : corpus.heldout) add(rec);
    if (out.empty()) {
        const auto pool = editable_records(corpus, tok);
        for (size_t i = n_planned; i < pool.size(); ++i) add(*pool[i]);
    }
    return out;
}

void write_artifact(const RunConfig& cfg, const char* name, const std::string& body) {
    write_file_atomic(in_dir(cfg, name).string(), body);
}

bool skip_if_current(RunManifest& man, const std::string& stage, const std::string& stage_hash,
                     std::ostream& log) {
    if (!man.stage_current(stage, stage_hash)) return false;
    log << stage << ": artifacts up to date for config " << stage_hash << "; skipping\n";
    return true;
}

}  // namespace

std::vector<int> resolve_edit_layers(const RunConfig& cfg) {
    if (!cfg.layers_auto) return cfg.plan.layers;
    const fs::path trace_path = in_dir(cfg, artifact::kTraceJson);
    if (fs::exists(trace_path)) {
        TraceResult trace;
        try {
            trace = TraceResult::from_json(nlohmann::json::parse(read_file(trace_path.string())));
        } catch (const nlohmann::json::parse_error& e) {
            throw validation_error("corrupt artifact 'trace.json' in " + cfg.out_dir + ": " +
                                   e.what());
        }
        std::vector<int> layers;
        for (int l : trace.decisive_layers) {
            if (l < 0 || l >= cfg.model.n_layers) {
                throw validation_error("traced layer " + std::to_string(l) +
                                       " out of range for a " +
                                       std::to_string(cfg.model.n_layers) + "-layer model");
            }
            layers.push_back(l);
        }
        if (!layers.empty()) return layers;
    }
    return {cfg.model.n_layers / 2};
}

void cmd_generate(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    RunManifest man = RunManifest::open(cfg.out_dir);
    man.set_config(cfg.resolved(), cfg.config_hash());
    const std::string h = stage_hash_generate(cfg);
    if (skip_if_current(man, "generate", h, log)) return;

    Corpus corpus;
    if (cfg.dataset_mode()) {
        corpus = load_dataset(cfg.dataset_path, cfg.dataset_format);
        corpus.train_text = build_dataset_training_text(corpus, cfg.corpus.reps,
                                                        cfg.corpus.neg_reps, cfg.corpus.fc_reps,
                                                        cfg.seed);
    } else {
        SyntheticSpec spec = cfg.corpus;
        spec.seed = cfg.seed;
        corpus = generate_synthetic_corpus(spec);
    }
    const Tokenizer tok = Tokenizer::build(corpus.vocab_sources());

    nlohmann::json corpus_json = corpus.to_json();
    corpus_json.erase("train_text");
    write_artifact(cfg, artifact::kCorpus, corpus_json.dump(2) + "\n");
    write_artifact(cfg, artifact::kTrainText, corpus.train_text);
    write_artifact(cfg, artifact::kTokenizer, tok.to_json().dump(2) + "\n");

    man.record_stage("generate", h,
                     {artifact::kCorpus, artifact::kTrainText, artifact::kTokenizer});
    log << "generate: " << corpus.records.size() << " facts, " << corpus.heldout.size()
        << " held out, " << corpus.relations.size() << " relations; vocabulary "
        << tok.vocab_size() << "; " << split_lines(corpus.train_text).size()
        << " training lines -> " << cfg.out_dir << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    require_artifact(cfg, artifact::kCorpus, "generate");
    require_artifact(cfg, artifact::kTrainText, "generate");
    require_artifact(cfg, artifact::kTokenizer, "generate");
    RunManifest man = RunManifest::open(cfg.out_dir);
    man.set_config(cfg.resolved(), cfg.config_hash());
    const std::string h = stage_hash_train(cfg);
    if (skip_if_current(man, "train", h, log)) return;

    const Corpus corpus = load_corpus_artifacts(cfg);
    const Tokenizer tok = load_tokenizer_artifact(cfg);
    ModelConfig mc = cfg.model;
    mc.vocab_size = tok.vocab_size();
    mc.seed = cfg.seed;

    const Checkpoint ckpt = train(corpus.train_text, tok, mc, cfg.train);
    ckpt.save(in_dir(cfg, artifact::kModel).string());

    man.record_stage("train", h, {artifact::kModel});
    log << "train: " << ckpt.training_meta.value("steps", 0) << " steps, final loss "
        << ckpt.training_meta.value("final_loss", 0.0) << ", weights "
        << hash_hex(ckpt.weights_hash()) << " -> " << artifact::kModel << "\n";
}

void cmd_trace(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    require_artifact(cfg, artifact::kModel, "train");
    require_artifact(cfg, artifact::kCorpus, "generate");
    RunManifest man = RunManifest::open(cfg.out_dir);
    man.set_config(cfg.resolved(), cfg.config_hash());
    const std::string h = stage_hash_trace(cfg);
    if (skip_if_current(man, "trace", h, log)) return;

    const Corpus corpus = load_corpus_artifacts(cfg);
    const Tokenizer tok = load_tokenizer_artifact(cfg);
    const Checkpoint ckpt = Checkpoint::load(in_dir(cfg, artifact::kModel).string());

    if (cfg.trace_fact_index >= static_cast<int>(corpus.records.size())) {
        throw validation_error("trace.fact_index " + std::to_string(cfg.trace_fact_index) +
                               " out of range: corpus has " +
                               std::to_string(corpus.records.size()) + " records");
    }
    const FactRecord& rec = corpus.records[cfg.trace_fact_index];
    if (!rec.has_target_true) {
        throw validation_error("record '" + rec.id +
                               "' has no true object to trace; choose another trace.fact_index");
    }
    const RenderedPrompt rp = render_prompt(rec);
    const std::vector<int> prompt = tok.encode(rp.text);
    const int target_token = tok.encode(rec.target_true).at(0);
    const double noise = cfg.trace_noise_scale > 0 ? cfg.trace_noise_scale
                                                   : default_noise_scale(ckpt);

    const TraceResult trace =
        causal_trace(ckpt, prompt, rp.subject_tok_begin, rp.subject_tok_end, target_token, noise,
                     cfg.trace_noise_samples, cfg.seed);

    write_artifact(cfg, artifact::kTraceJson, trace.to_json().dump(2) + "\n");
    write_artifact(cfg, artifact::kTraceCsv, trace.to_csv());
    man.record_stage("trace", h, {artifact::kTraceJson, artifact::kTraceCsv});

    log << "trace: '" << rp.text << "' -> decisive token " << trace.decisive_token << " of "
        << prompt.size() << ", layer";
    for (int l : trace.decisive_layers) log << " " << l;
    log << " (baseline p " << trace.baseline_p << ", corrupted p " << trace.corrupted_p << ")\n";
    if (!trace.warning.empty()) log << "trace: warning: " << trace.warning << "\n";
}

void cmd_edit(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    require_artifact(cfg, artifact::kModel, "train");
    require_artifact(cfg, artifact::kCorpus, "generate");
    RunManifest man = RunManifest::open(cfg.out_dir);
    man.set_config(cfg.resolved(), cfg.config_hash());
    EditPlan plan = cfg.plan;
    plan.layers = resolve_edit_layers(cfg);
    const std::string h = stage_hash_edit(cfg, plan.layers);
    if (skip_if_current(man, "edit", h, log)) return;

    const Corpus corpus = load_corpus_artifacts(cfg);
    const Tokenizer tok = load_tokenizer_artifact(cfg);
    const Checkpoint base = Checkpoint::load(in_dir(cfg, artifact::kModel).string());

    const auto records = planned_records(corpus, tok, plan);
    std::vector<EditRequest> requests;
    requests.reserve(records.size());
    for (const auto& rec : records)
        requests.push_back(make_request(rec, corpus.relation(rec.relation_id), tok,
                                        Polarity::positive));
    const auto retention = retention_prompt_tokens(corpus, tok, records.size());

    auto [edited, elog] = sequential_edit(base, requests, plan, retention, tok, cfg.seed);
    edited.save(in_dir(cfg, artifact::kEdited).string());
    nlohmann::json log_json = elog.to_json();
    log_json["config_hash"] = cfg.config_hash();
    log_json["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    write_artifact(cfg, artifact::kEditLog, log_json.dump(2) + "\n");

    man.record_stage("edit", h, {artifact::kEdited, artifact::kEditLog});
    log << "edit: " << requests.size() << " requests in " << plan.n_batches
        << " batch(es) at layer";
    for (int l : plan.layers) log << " " << l;
    log << "; " << retention.size() << " retention prompts -> " << artifact::kEdited << "\n";
}

void cmd_quadrants(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    require_artifact(cfg, artifact::kModel, "train");
    require_artifact(cfg, artifact::kCorpus, "generate");
    RunManifest man = RunManifest::open(cfg.out_dir);
    man.set_config(cfg.resolved(), cfg.config_hash());
    EditPlan plan = cfg.plan;
    plan.layers = resolve_edit_layers(cfg);
    const std::string h = stage_hash_quadrants(cfg, plan.layers);
    if (skip_if_current(man, "quadrants", h, log)) return;

    const Corpus corpus = load_corpus_artifacts(cfg);
    const Tokenizer tok = load_tokenizer_artifact(cfg);
    const Checkpoint base = Checkpoint::load(in_dir(cfg, artifact::kModel).string());

    const auto records = planned_records(corpus, tok, plan);
    const auto retention = retention_prompt_tokens(corpus, tok, records.size());

    const QuadrantRun run =
        run_quadrants(base, records, corpus, plan, cfg.metric, tok, retention, cfg.seed);

    const ReportBundle bundle = render_metrics_report(run.report, cfg.config_hash());
    write_artifact(cfg, artifact::kReportJson, bundle.json.dump(2) + "\n");
    write_artifact(cfg, artifact::kReportText, bundle.text);
    write_artifact(cfg, artifact::kReportCsv, bundle.csv);
    run.pos_edited.save(in_dir(cfg, artifact::kPosModel).string());
    run.neg_edited.save(in_dir(cfg, artifact::kNegModel).string());
    write_artifact(cfg, artifact::kPosEditLog, run.pos_log.to_json().dump(2) + "\n");
    write_artifact(cfg, artifact::kNegEditLog, run.neg_log.to_json().dump(2) + "\n");

    man.record_stage("quadrants", h,
                     {artifact::kReportJson, artifact::kReportText, artifact::kReportCsv,
                      artifact::kPosModel, artifact::kNegModel, artifact::kPosEditLog,
                      artifact::kNegEditLog});
    log << bundle.text;
}

void cmd_factcheck(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    require_artifact(cfg, artifact::kModel, "train");
    require_artifact(cfg, artifact::kEdited, "edit");
    RunManifest man = RunManifest::open(cfg.out_dir);
    man.set_config(cfg.resolved(), cfg.config_hash());
    EditPlan plan = cfg.plan;
    plan.layers = resolve_edit_layers(cfg);
    const std::string h = stage_hash_factcheck(cfg, plan.layers);
    if (skip_if_current(man, "factcheck", h, log)) return;

    const Corpus corpus = load_corpus_artifacts(cfg);
    const Tokenizer tok = load_tokenizer_artifact(cfg);
    const Checkpoint pre_ckpt = Checkpoint::load(in_dir(cfg, artifact::kModel).string());
    const Checkpoint post_ckpt = Checkpoint::load(in_dir(cfg, artifact::kEdited).string());

    // Statements assert the edited object for exactly the records cmd_edit
    // rewrites; only statements the tokenizer accepts are posed.
    std::vector<std::string> statements;
    for (const auto& rec : planned_records(corpus, tok, plan)) {
        const std::string s =
            build_fact_check_prompt(rec, rec.target_new, corpus.relation(rec.relation_id));
        if (tok.try_encode(s)) statements.push_back(s);
    }
    if (statements.empty()) {
        throw validation_error("no fact-check statements could be posed under this tokenizer");
    }

    const ModelResponder pre(pre_ckpt, tok);
    const ModelResponder post(post_ckpt, tok);
    const FactCheckResult res = fact_check_accuracy(pre, post, statements);

    nlohmann::json out = res.to_json();
    out["n_statements"] = statements.size();
    out["config_hash"] = cfg.config_hash();
    out["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    write_artifact(cfg, artifact::kFactCheck, out.dump(2) + "\n");

    man.record_stage("factcheck", h, {artifact::kFactCheck});
    log << "factcheck: accuracy " << res.accuracy << " over " << res.included << " statements ("
        << res.excluded << " excluded) -> " << artifact::kFactCheck << "\n";
}

bool cmd_selftest(const std::string& out_dir, std::ostream& log) {
    const OracleSelfTest res = oracle_self_test();
    auto line = [&](const char* name, const MetricsReport& rep) {
        log << (res.passed ? "[PASS] " : "[    ] ") << name << ": PP " << rep.pp << " PN "
            << rep.pn << " NN " << rep.nn << " NP " << rep.np << " avg " << rep.avg << "\n";
    };
    line("semantic responder", res.semantic);
    line("shortcut responder", res.shortcut);
    line("mixture responder", res.mixture);
    for (const auto& f : res.failures) log << "[FAIL] " << f << "\n";
    log << (res.passed ? "self-test passed\n" : "self-test FAILED\n");

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        nlohmann::json out = res.to_json();
        out["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
        write_file_atomic((fs::path(out_dir) / artifact::kSelfTest).string(),
                          out.dump(2) + "\n");
        RunManifest man = RunManifest::open(out_dir);
        man.record_stage("selftest", hash_hex(fnv1a64(std::string(kToolVersion))),
                         {artifact::kSelfTest});
    }
    return res.passed;
}

void cmd_table_audit(const std::string& table_path, const std::string& out_dir,
                     std::ostream& log) {
    const AuditReport report = audit_table_file(table_path);
    log << report.to_text();

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        nlohmann::json out = report.to_json();
        out["input"] = table_path;
        out["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
        write_file_atomic((fs::path(out_dir) / artifact::kTableAudit).string(),
                          out.dump(2) + "\n");
        RunManifest man = RunManifest::open(out_dir);
        man.record_stage("table_audit", hash_hex(hash_file(table_path)),
                         {artifact::kTableAudit});
    }
}

}  // namespace editlab
