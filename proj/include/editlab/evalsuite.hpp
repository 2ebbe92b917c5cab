#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "editlab/corpus.hpp"
#include "editlab/editor.hpp"
#include "editlab/model.hpp"
#include "editlab/tokenizer.hpp"

namespace editlab {

enum class MetricKind { exact_match, probability };
const char* metric_kind_name(MetricKind k);
MetricKind metric_kind_from_name(const std::string& name);

// Anything that can answer a prompt: the real model or a hand-built stand-in.
struct Responder {
    virtual ~Responder() = default;
    virtual std::string answer(const std::string& prompt, int max_tokens) const = 0;
    virtual bool supports_logprob() const { return false; }
    // Mean per-token log-probability of the continuation given the prompt.
    virtual double mean_logprob(const std::string& prompt, const std::string& continuation) const;
    // Teacher-forced per-token argmax match rate against the continuation.
    virtual double forced_match_rate(const std::string& prompt,
                                     const std::string& continuation) const;
};

struct ModelResponder final : Responder {
    const Checkpoint* ckpt;
    const Tokenizer* tok;
    ModelResponder(const Checkpoint& c, const Tokenizer& t) : ckpt(&c), tok(&t) {}

    std::string answer(const std::string& prompt, int max_tokens) const override;
    bool supports_logprob() const override { return true; }
    double mean_logprob(const std::string& prompt, const std::string& continuation) const override;
    double forced_match_rate(const std::string& prompt,
                             const std::string& continuation) const override;
};

enum class Interpretation { efficacy, hallucination };

// One test query: the gold answer is the edit target uniformly; on
// polarity-mismatched quadrants the score reads as hallucination.
struct EvalCase {
    const FactRecord* record = nullptr;
    std::string test_prompt;
    std::string gold_text;
    int gold_token_count = 0;
    Polarity test_polarity = Polarity::positive;
    Interpretation interpretation = Interpretation::efficacy;
};

std::vector<EvalCase> make_cases(const std::vector<FactRecord>& records, const Corpus& corpus,
                                 const Tokenizer& tok, Polarity test_polarity,
                                 Polarity edit_polarity);

// 100 x fraction of cases whose greedy decode of gold_token_count tokens
// equals the gold text after whitespace normalization (case-sensitive).
double efficacy_exact(const Responder& responder, const std::vector<EvalCase>& cases);

// 100 x fraction of cases with mean-logprob(target_new) strictly greater than
// mean-logprob(target_true); ties count as failures. Records without a
// target_true use the teacher-forced match-rate fallback when enabled,
// otherwise error.
double efficacy_prob(const Responder& responder, const std::vector<EvalCase>& cases,
                     bool teacher_forced_fallback = false);

struct FactCheckResult {
    double accuracy = 0.0;  // 100 x (#post-edit "true") / #included
    int included = 0;
    int excluded = 0;
    nlohmann::json to_json() const;
};

enum class Verdict { yes_true, yes_false, other };
// First alphabetic token of the decoded answer, case-insensitive, classified
// into {true, false, other}.
Verdict classify_verdict(const std::string& answer);

// Judges each statement prompt pre- and post-edit, then applies the two
// exclusion rules: (1) pre-edit answer not in {true, false}; (2) "true" both
// before and after. Throws when every sample is excluded.
FactCheckResult fact_check_accuracy(const Responder& pre, const Responder& post,
                                    const std::vector<std::string>& statement_prompts);

struct MetricsReport {
    double pp = 0.0, pn = 0.0, nn = 0.0, np = 0.0;
    double d_pp_pn = 0.0, d_pp_np = 0.0, d_nn_pn = 0.0, d_nn_np = 0.0;
    double avg = 0.0;  // mean of the four discrepancies
    MetricKind metric_kind = MetricKind::exact_match;
    int n_per_cell = 0;
    std::optional<FactCheckResult> fact_check;

    static MetricsReport from_cells(double pp, double pn, double nn, double np, MetricKind kind,
                                    int n_per_cell);
    nlohmann::json to_json() const;
};

// Evaluates the four quadrant cells given the two edited responders.
MetricsReport quadrant_report(const Responder& pos_edited, const Responder& neg_edited,
                              const std::vector<EvalCase>& pos_cases,
                              const std::vector<EvalCase>& neg_cases, MetricKind kind);

struct QuadrantRun {
    MetricsReport report;
    Checkpoint pos_edited;
    Checkpoint neg_edited;
    EditLog pos_log;
    EditLog neg_log;
};

// Two independent edit runs from the same base checkpoint (hash-checked): one
// with positive edit prompts, one with negated ones; PP/PN come from the
// positive-edit model and NN/NP from the negative-edit model.
QuadrantRun run_quadrants(const Checkpoint& base, const std::vector<FactRecord>& records,
                          const Corpus& corpus, const EditPlan& plan, MetricKind kind,
                          const Tokenizer& tok,
                          const std::vector<std::vector<int>>& retention_prompts, uint64_t seed);

struct OracleSelfTest {
    bool passed = false;
    MetricsReport semantic;
    MetricsReport shortcut;
    MetricsReport mixture;
    std::vector<std::string> failures;
    nlohmann::json to_json() const;
};

// Certifies the harness distinguishes a negation-respecting responder from a
// subject-keyed shortcut responder: semantic -> cells (100, 0, 100, 0) and
// avg 100; shortcut -> all cells 100 and avg 0; a 50/50 mixture -> avg 50.
OracleSelfTest oracle_self_test();

}  // namespace editlab
