#include "editlab/evalsuite.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "editlab/error.hpp"
#include "editlab/text.hpp"

namespace editlab {

const char* metric_kind_name(MetricKind k) {
    return k == MetricKind::exact_match ? "exact_match" : "probability";
}

MetricKind metric_kind_from_name(const std::string& name) {
    if (name == "exact_match" || name == "exact") return MetricKind::exact_match;
    if (name == "probability" || name == "prob") return MetricKind::probability;
    throw validation_error("unknown metric kind: '" + name + "' (expected exact or prob)");
}

// ---- responders ----

double Responder::mean_logprob(const std::string&, const std::string&) const {
    throw validation_error("this responder does not support log-probabilities");
}

double Responder::forced_match_rate(const std::string&, const std::string&) const {
    throw validation_error("this responder does not support teacher forcing");
}

std::string ModelResponder::answer(const std::string& prompt, int max_tokens) const {
    const std::vector<int> ids = tok->encode(prompt);
    return tok->decode(greedy_decode(*ckpt, ids, max_tokens));
}

double ModelResponder::mean_logprob(const std::string& prompt,
                                    const std::string& continuation) const {
    return sequence_logprob(*ckpt, tok->encode(prompt), tok->encode(continuation));
}

double ModelResponder::forced_match_rate(const std::string& prompt,
                                         const std::string& continuation) const {
    const std::vector<int> p = tok->encode(prompt);
    const std::vector<int> c = tok->encode(continuation);
    if (p.empty()) throw validation_error("empty prompt");
    if (c.empty()) throw validation_error("empty continuation");
    std::vector<int> full = p;
    full.insert(full.end(), c.begin(), c.end());
    ForwardResult r = forward(*ckpt, full);
    int matches = 0;
    for (size_t t = 0; t < c.size(); ++t) {
        const double* logits = r.logits.row(static_cast<int>(p.size() + t) - 1);
        int best = 0;
        for (int j = 1; j < ckpt->config.vocab_size; ++j)
            if (logits[j] > logits[best]) best = j;
        if (best == c[t]) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(c.size());
}

// ---- cases ----

std::vector<EvalCase> make_cases(const std::vector<FactRecord>& records, const Corpus& corpus,
                                 const Tokenizer& tok, Polarity test_polarity,
                                 Polarity edit_polarity) {
    std::vector<EvalCase> cases;
    cases.reserve(records.size());
    for (const auto& rec : records) {
        const RelationSpec& rel = corpus.relation(rec.relation_id);
        EvalCase c;
        c.record = &rec;
        c.test_prompt = test_polarity == Polarity::positive ? render_prompt(rec).text
                                                            : negate_prompt(rec, rel);
        c.gold_text = rec.target_new;
        c.gold_token_count = static_cast<int>(tok.encode(rec.target_new).size());
        c.test_polarity = test_polarity;
        c.interpretation = test_polarity == edit_polarity ? Interpretation::efficacy
                                                          : Interpretation::hallucination;
        cases.push_back(std::move(c));
    }
    return cases;
}

// ---- metrics ----

double efficacy_exact(const Responder& responder, const std::vector<EvalCase>& cases) {
    if (cases.empty()) throw validation_error("empty evaluation set");
    int hits = 0;
    for (const auto& c : cases) {
        const std::string ans = responder.answer(c.test_prompt, c.gold_token_count);
        if (normalize_ws(ans) == normalize_ws(c.gold_text)) ++hits;
    }
    return 100.0 * hits / static_cast<double>(cases.size());
}

double efficacy_prob(const Responder& responder, const std::vector<EvalCase>& cases,
                     bool teacher_forced_fallback) {
    if (cases.empty()) throw validation_error("empty evaluation set");
    double total = 0.0;
    for (const auto& c : cases) {
        if (c.record == nullptr)
            throw validation_error("probability metric requires fact records");
        const FactRecord& rec = *c.record;
        if (rec.has_target_true) {
            if (rec.target_true == rec.target_new)
                throw validation_error("degenerate comparison: target_new equals target_true "
                                       "for record " + rec.id);
            const double lp_new = responder.mean_logprob(c.test_prompt, rec.target_new);
            const double lp_true = responder.mean_logprob(c.test_prompt, rec.target_true);
            if (lp_new > lp_true) total += 1.0;  // ties count as failures
        } else if (teacher_forced_fallback) {
            total += responder.forced_match_rate(c.test_prompt, rec.target_new);
        } else {
            throw validation_error("record " + rec.id +
                                   " has no target_true; enable the teacher-forced fallback");
        }
    }
    return 100.0 * total / static_cast<double>(cases.size());
}

// ---- fact checking ----

nlohmann::json FactCheckResult::to_json() const {
    return nlohmann::json{{"accuracy", accuracy}, {"included", included}, {"excluded", excluded}};
}

Verdict classify_verdict(const std::string& answer) {
    for (const std::string& raw : split_ws(answer)) {
        // Strip non-alphabetic edges; the remainder must be purely alphabetic.
        size_t begin = 0, end = raw.size();
        while (begin < end && !std::isalpha(static_cast<unsigned char>(raw[begin]))) ++begin;
        while (end > begin && !std::isalpha(static_cast<unsigned char>(raw[end - 1]))) --end;
        if (begin == end) continue;
        const std::string core = raw.substr(begin, end - begin);
        if (!std::all_of(core.begin(), core.end(),
                         [](unsigned char ch) { return std::isalpha(ch); }))
            return Verdict::other;
        const std::string word = lower(core);
        if (word == "true") return Verdict::yes_true;
        if (word == "false") return Verdict::yes_false;
        return Verdict::other;  // first alphabetic token decides
    }
    return Verdict::other;
}

FactCheckResult fact_check_accuracy(const Responder& pre, const Responder& post,
                                    const std::vector<std::string>& statement_prompts) {
    if (statement_prompts.empty()) throw validation_error("empty evaluation set");
    FactCheckResult res;
    int post_true = 0;
    for (const auto& prompt : statement_prompts) {
        const Verdict v_pre = classify_verdict(pre.answer(prompt, 2));
        if (v_pre == Verdict::other) {  // rule 1: no true/false verdict before editing
            ++res.excluded;
            continue;
        }
        const Verdict v_post = classify_verdict(post.answer(prompt, 2));
        if (v_pre == Verdict::yes_true && v_post == Verdict::yes_true) {  // rule 2
            ++res.excluded;
            continue;
        }
        ++res.included;
        if (v_post == Verdict::yes_true) ++post_true;
    }
    if (res.included == 0) throw validation_error("no evaluable samples");
    res.accuracy = 100.0 * post_true / static_cast<double>(res.included);
    return res;
}

// ---- quadrants ----

MetricsReport MetricsReport::from_cells(double pp, double pn, double nn, double np,
                                        MetricKind kind, int n_per_cell) {
    MetricsReport r;
    r.pp = pp;
    r.pn = pn;
    r.nn = nn;
    r.np = np;
    r.d_pp_pn = pp - pn;
    r.d_pp_np = pp - np;
    r.d_nn_pn = nn - pn;
    r.d_nn_np = nn - np;
    r.avg = (r.d_pp_pn + r.d_pp_np + r.d_nn_pn + r.d_nn_np) / 4.0;
    r.metric_kind = kind;
    r.n_per_cell = n_per_cell;
    return r;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j{{"cells", {{"PP", pp}, {"PN", pn}, {"NN", nn}, {"NP", np}}},
                     {"discrepancies",
                      {{"PP-PN", d_pp_pn}, {"PP-NP", d_pp_np}, {"NN-PN", d_nn_pn},
                       {"NN-NP", d_nn_np}}},
                     {"avg", avg},
                     {"metric_kind", metric_kind_name(metric_kind)},
                     {"n_per_cell", n_per_cell},
                     {"fact_check", nullptr}};
    if (fact_check) j["fact_check"] = fact_check->to_json();
    return j;
}

MetricsReport quadrant_report(const Responder& pos_edited, const Responder& neg_edited,
                              const std::vector<EvalCase>& pos_cases,
                              const std::vector<EvalCase>& neg_cases, MetricKind kind) {
    const auto eval = [&](const Responder& r, const std::vector<EvalCase>& cases) {
        if (kind == MetricKind::exact_match) return efficacy_exact(r, cases);
        const bool fallback = std::any_of(cases.begin(), cases.end(), [](const EvalCase& c) {
            return c.record != nullptr && !c.record->has_target_true;
        });
        return efficacy_prob(r, cases, fallback);
    };
    const double pp = eval(pos_edited, pos_cases);
    const double pn = eval(pos_edited, neg_cases);
    const double nn = eval(neg_edited, neg_cases);
    const double np = eval(neg_edited, pos_cases);
    return MetricsReport::from_cells(pp, pn, nn, np, kind,
                                     static_cast<int>(pos_cases.size()));
}

QuadrantRun run_quadrants(const Checkpoint& base, const std::vector<FactRecord>& records,
                          const Corpus& corpus, const EditPlan& plan, MetricKind kind,
                          const Tokenizer& tok,
                          const std::vector<std::vector<int>>& retention_prompts, uint64_t seed) {
    if (records.empty()) throw validation_error("empty evaluation set");

    std::vector<EditRequest> pos_requests, neg_requests;
    for (const auto& rec : records) {
        const RelationSpec& rel = corpus.relation(rec.relation_id);
        pos_requests.push_back(make_request(rec, rel, tok, Polarity::positive));
        neg_requests.push_back(make_request(rec, rel, tok, Polarity::negative));
    }

    const uint64_t base_hash = base.weights_hash();
    QuadrantRun run;
    auto pos = sequential_edit(base, pos_requests, plan, retention_prompts, tok, seed);
    if (base.weights_hash() != base_hash)
        throw numeric_error("base checkpoint changed during the positive edit run");
    auto neg = sequential_edit(base, neg_requests, plan, retention_prompts, tok, seed);
    if (base.weights_hash() != base_hash)
        throw numeric_error("base checkpoint changed during the negative edit run");
    run.pos_edited = std::move(pos.first);
    run.pos_log = std::move(pos.second);
    run.neg_edited = std::move(neg.first);
    run.neg_log = std::move(neg.second);

    const auto pos_cases = make_cases(records, corpus, tok, Polarity::positive,
                                      Polarity::positive);
    const auto neg_cases = make_cases(records, corpus, tok, Polarity::negative,
                                      Polarity::positive);
    ModelResponder pos_resp(run.pos_edited, tok);
    ModelResponder neg_resp(run.neg_edited, tok);
    run.report = quadrant_report(pos_resp, neg_resp, pos_cases, neg_cases, kind);
    return run;
}

// ---- oracle self-test ----

namespace {

// Shared lookup base: maps a prompt to the record whose subject it mentions.
struct OracleBase : Responder {
    const std::vector<FactRecord>* records;
    explicit OracleBase(const std::vector<FactRecord>& recs) : records(&recs) {}

    const FactRecord* find(const std::string& prompt) const {
        for (const auto& rec : *records)
            if (prompt.find(rec.subject) != std::string::npos) return &rec;
        return nullptr;
    }
    static bool negated(const std::string& prompt) {
        return (" " + prompt + " ").find(" not ") != std::string::npos;
    }
};

// Respects negation: answers the edit target only when the test polarity
// matches the polarity it was "edited" with; otherwise a distractor.
struct SemanticOracle final : OracleBase {
    Polarity edit_polarity;
    SemanticOracle(const std::vector<FactRecord>& recs, Polarity p)
        : OracleBase(recs), edit_polarity(p) {}
    std::string answer(const std::string& prompt, int) const override {
        const FactRecord* rec = find(prompt);
        if (!rec) return "";
        const Polarity test = negated(prompt) ? Polarity::negative : Polarity::positive;
        return test == edit_polarity ? rec->target_new : rec->target_true;
    }
};

// Keyed on the subject alone; ignores negation entirely.
struct ShortcutOracle final : OracleBase {
    explicit ShortcutOracle(const std::vector<FactRecord>& recs) : OracleBase(recs) {}
    std::string answer(const std::string& prompt, int) const override {
        const FactRecord* rec = find(prompt);
        return rec ? rec->target_new : "";
    }
};

// Half the records behave semantically, half behave as shortcuts.
struct MixtureOracle final : OracleBase {
    Polarity edit_polarity;
    MixtureOracle(const std::vector<FactRecord>& recs, Polarity p)
        : OracleBase(recs), edit_polarity(p) {}
    std::string answer(const std::string& prompt, int) const override {
        const FactRecord* rec = find(prompt);
        if (!rec) return "";
        const size_t idx = static_cast<size_t>(rec - records->data());
        if (idx % 2 == 1) return rec->target_new;  // shortcut half
        const Polarity test = negated(prompt) ? Polarity::negative : Polarity::positive;
        return test == edit_polarity ? rec->target_new : rec->target_true;
    }
};

}  // namespace

nlohmann::json OracleSelfTest::to_json() const {
    return nlohmann::json{{"passed", passed},
                          {"semantic", semantic.to_json()},
                          {"shortcut", shortcut.to_json()},
                          {"mixture", mixture.to_json()},
                          {"failures", failures}};
}

OracleSelfTest oracle_self_test() {
    SyntheticSpec spec;
    spec.n_facts = 8;
    spec.n_heldout = 0;
    spec.reps = 1;
    spec.neg_reps = 0;
    spec.fc_reps = 0;
    spec.seed = 101;
    const Corpus corpus = generate_synthetic_corpus(spec);
    Tokenizer tok = Tokenizer::build(corpus.vocab_sources());

    const auto pos_cases = make_cases(corpus.records, corpus, tok, Polarity::positive,
                                      Polarity::positive);
    const auto neg_cases = make_cases(corpus.records, corpus, tok, Polarity::negative,
                                      Polarity::positive);

    OracleSelfTest res;
    const auto run = [&](const Responder& pos, const Responder& neg) {
        return quadrant_report(pos, neg, pos_cases, neg_cases, MetricKind::exact_match);
    };
    res.semantic = run(SemanticOracle(corpus.records, Polarity::positive),
                       SemanticOracle(corpus.records, Polarity::negative));
    res.shortcut = run(ShortcutOracle(corpus.records), ShortcutOracle(corpus.records));
    res.mixture = run(MixtureOracle(corpus.records, Polarity::positive),
                      MixtureOracle(corpus.records, Polarity::negative));

    const auto expect = [&](bool ok, const std::string& what) {
        if (!ok) res.failures.push_back(what);
    };
    expect(res.semantic.pp == 100.0 && res.semantic.pn == 0.0 && res.semantic.nn == 100.0 &&
               res.semantic.np == 0.0,
           "semantic responder cells must be (100, 0, 100, 0)");
    expect(res.semantic.avg == 100.0, "semantic responder rectified-efficacy avg must be 100");
    expect(res.shortcut.pp == 100.0 && res.shortcut.pn == 100.0 && res.shortcut.nn == 100.0 &&
               res.shortcut.np == 100.0,
           "shortcut responder cells must be (100, 100, 100, 100)");
    expect(res.shortcut.avg == 0.0, "shortcut responder rectified-efficacy avg must be 0");
    expect(res.mixture.avg == 50.0, "50/50 mixture rectified-efficacy avg must be 50");
    res.passed = res.failures.empty();
    return res;
}

}  // namespace editlab
