#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "editlab/tokenizer.hpp"

namespace editlab {

// A relation's behavioral knobs: where the negatable copula sits in the
// template (word index, or none for the prefix fallback), the pre-negated
// template, and the instruction used to build verification prompts.
struct RelationSpec {
    std::string id;
    std::string template_text;
    std::optional<int> copula_word_index;
    std::string negation_template;
    std::string fact_check_preamble;

    nlohmann::json to_json() const;
    static RelationSpec from_json(const nlohmann::json& j);
};

struct FactRecord {
    std::string id;
    std::string subject;
    std::string relation_id;
    std::string template_text;  // exactly one {subject} placeholder
    std::string target_true;    // empty iff has_target_true is false
    std::string target_new;
    std::vector<std::string> paraphrases;
    bool interrogative = false;  // prompt is a question (e.g. zsre src)
    bool has_target_true = true;

    nlohmann::json to_json() const;
    static FactRecord from_json(const nlohmann::json& j);
};

struct RenderedPrompt {
    std::string text;
    int subject_tok_begin = 0;  // token span of the subject, [begin, end)
    int subject_tok_end = 0;
};

// Renders record.template_text with the subject substituted and locates the
// subject's token span. Throws if the placeholder is missing or duplicated.
RenderedPrompt render_prompt(const FactRecord& rec);
RenderedPrompt render_template(const std::string& template_text, const std::string& subject);

// Inserts "not" after the template's copula, or falls back to the
// "It is not the case that" prefix for non-copular templates. Applying it to
// an already negated prompt is an error.
std::string negate_text(const std::string& prompt, const RelationSpec& spec);
std::string negate_prompt(const FactRecord& rec, const RelationSpec& spec);

// Question -> declarative statement containing the answer, via a fixed,
// ordered rewrite-rule table (versioned; see kDeclarativizeRulesVersion).
// Requires a trailing '?'.
inline constexpr int kDeclarativizeRulesVersion = 1;
std::string declarativize(const std::string& question, const std::string& answer);

// Verification prompt: preamble + declarative statement with the given target.
std::string build_fact_check_prompt(const FactRecord& rec, const std::string& target,
                                    const RelationSpec& spec);

inline constexpr const char* kDefaultFactCheckPreamble =
    "Judge whether the following statement is true or false:";
inline constexpr const char* kNegationFallbackPrefix = "It is not the case that ";

struct SyntheticSpec {
    int n_facts = 50;     // editable facts
    int n_heldout = 25;   // background facts kept out of editing
    int n_relations = 5;
    int reps = 32;        // fact sentence repetitions in the training text
    int neg_reps = 8;     // negated-sentence lines per fact
    int fc_reps = 8;      // verification lines per fact (half true, half false)
    uint64_t seed = 7;
};

struct Corpus {
    std::vector<FactRecord> records;   // editable facts
    std::vector<FactRecord> heldout;   // background facts (retention pool)
    std::vector<RelationSpec> relations;
    std::string train_text;            // newline-separated training sentences

    const RelationSpec& relation(const std::string& id) const;
    std::vector<std::string> vocab_sources() const;

    nlohmann::json to_json() const;
    static Corpus from_json(const nlohmann::json& j);
};

Corpus generate_synthetic_corpus(const SyntheticSpec& spec);

enum class DatasetFormat { mcf, zsre };

// Loads an external dataset (JSON array). Malformed records report the record
// index and the offending field. Records without target_true are admitted
// with has_target_true = false.
Corpus load_dataset(const std::string& path, DatasetFormat format);

// Training lines for externally loaded records, mirroring the synthetic
// generator's mix: records with a known true object contribute `reps`
// declarative lines plus negated/verification lines drawn against the other
// objects seen for the same relation. Records without target_true contribute
// nothing (the model cannot be taught a fact the dataset does not state).
// Returns shuffled lines joined with '\n'; empty if no record qualifies.
std::string build_dataset_training_text(const Corpus& corpus, int reps, int neg_reps, int fc_reps,
                                        uint64_t seed);

std::string save_records(const std::vector<FactRecord>& records);
std::vector<FactRecord> load_records(const std::string& json_text);

}  // namespace editlab
