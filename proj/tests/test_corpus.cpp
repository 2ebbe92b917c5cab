#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "editlab/corpus.hpp"
#include "editlab/error.hpp"
#include "editlab/text.hpp"
#include "support/test_util.hpp"

using namespace editlab;

namespace {

RelationSpec copular_spec() {
    RelationSpec spec;
    spec.id = "color";
    spec.template_text = "The color of {subject} is";
    spec.copula_word_index = 4;
    spec.negation_template = "The color of {subject} is not";
    spec.fact_check_preamble = kDefaultFactCheckPreamble;
    return spec;
}

RelationSpec non_copular_spec() {
    RelationSpec spec;
    spec.id = "wrote";
    spec.template_text = "{subject} wrote";
    spec.copula_word_index = std::nullopt;
    spec.negation_template = std::string(kNegationFallbackPrefix) + "{subject} wrote";
    spec.fact_check_preamble = kDefaultFactCheckPreamble;
    return spec;
}

int count_lines_equal(const std::string& text, const std::string& line) {
    int n = 0;
    for (const auto& l : split_lines(text))
        if (l == line) ++n;
    return n;
}

}  // namespace

TEST_CASE("render_prompt substitutes the subject and locates its token span") {
    FactRecord rec;
    rec.subject = "Ada Lovelace";
    rec.template_text = "The favorite color of {subject} is";
    auto rp = render_prompt(rec);
    CHECK(rp.text == "The favorite color of Ada Lovelace is");
    CHECK(rp.subject_tok_begin == 4);
    CHECK(rp.subject_tok_end == 6);
    auto toks = Tokenizer::split(rp.text);
    CHECK(toks[rp.subject_tok_begin] == "Ada");
    CHECK(toks[rp.subject_tok_end - 1] == "Lovelace");

    auto leading = render_template("{subject} plays the oboe", "Bo");
    CHECK(leading.text == "Bo plays the oboe");
    CHECK(leading.subject_tok_begin == 0);
    CHECK(leading.subject_tok_end == 1);

    CHECK_THROWS_AS((void)render_template("no placeholder here", "X"), validation_error);
    CHECK_THROWS_AS((void)render_template("{subject} and {subject}", "X"), validation_error);
}

TEST_CASE("negate_text inserts 'not' after the copula") {
    auto spec = copular_spec();
    CHECK(negate_text("The color of Bo is", spec) == "The color of Bo is not");
    // Multi-word subjects move the copula; the last copula occurrence is used.
    CHECK(negate_text("The color of Ada Lovelace is", spec) ==
          "The color of Ada Lovelace is not");
    // Trailing punctuation stays attached to the inserted word.
    CHECK(negate_text("The sky is blue. The grass is", spec) ==
          "The sky is blue. The grass is not");
    CHECK_THROWS_AS((void)negate_text("The color of Bo is not", spec), validation_error);
}

TEST_CASE("negate_text falls back to a sentence prefix without a copula") {
    auto spec = non_copular_spec();
    CHECK(negate_text("Ada wrote", spec) == std::string(kNegationFallbackPrefix) + "Ada wrote");
    CHECK_THROWS_AS((void)negate_text(std::string(kNegationFallbackPrefix) + "Ada wrote", spec),
                    validation_error);
}

TEST_CASE("negate_prompt composes render and negate") {
    FactRecord rec;
    rec.subject = "Bo Vance";
    rec.template_text = "The color of {subject} is";
    CHECK(negate_prompt(rec, copular_spec()) == "The color of Bo Vance is not");
}

TEST_CASE("declarativize applies the ordered rewrite rules") {
    CHECK(declarativize("What is the capital of France?", "Paris") ==
          "The capital of France is Paris");
    CHECK(declarativize("What are prime numbers?", "odd") == "Prime numbers are odd");
    CHECK(declarativize("What was the outcome?", "victory") == "The outcome was victory");
    CHECK(declarativize("Who is the president?", "Ada") == "The president is Ada");
    CHECK(declarativize("Who wrote this book?", "Ada") == "Ada wrote this book");
    CHECK(declarativize("Where is the museum?", "Paris") == "The museum is in Paris");
    CHECK(declarativize("Where was the treaty signed?", "Ghent") ==
          "The treaty was signed in Ghent");
    CHECK(declarativize("When was the bridge built?", "1890") ==
          "The bridge was built in 1890");
    CHECK(declarativize("In which city is the tower?", "Paris") == "The tower is in Paris");

    CHECK_THROWS_AS((void)declarativize("No question mark", "x"), validation_error);
    CHECK_THROWS_AS((void)declarativize("Gibberish unmatched pattern here?", "x"),
                    validation_error);
    CHECK(kDeclarativizeRulesVersion == 1);
}

TEST_CASE("build_fact_check_prompt prefixes the preamble") {
    FactRecord rec;
    rec.subject = "Bo";
    rec.template_text = "The color of {subject} is";
    auto spec = copular_spec();
    CHECK(build_fact_check_prompt(rec, "teal", spec) ==
          std::string(kDefaultFactCheckPreamble) + " The color of Bo is teal");

    FactRecord q;
    q.subject = "France";
    q.template_text = "What is the capital of {subject}?";
    q.interrogative = true;
    CHECK(build_fact_check_prompt(q, "Paris", spec) ==
          std::string(kDefaultFactCheckPreamble) + " The capital of France is Paris");
}

TEST_CASE("synthetic corpus satisfies its structural invariants") {
    SyntheticSpec spec;
    spec.n_facts = 20;
    spec.n_heldout = 10;
    spec.n_relations = 3;
    spec.reps = 5;
    spec.neg_reps = 2;
    spec.fc_reps = 4;
    spec.seed = 11;
    Corpus c = generate_synthetic_corpus(spec);

    CHECK((int)c.records.size() == spec.n_facts);
    CHECK((int)c.heldout.size() == spec.n_heldout);
    CHECK((int)c.relations.size() == spec.n_relations);

    std::set<std::string> subjects;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto* group : {&c.records, &c.heldout}) {
        for (const auto& r : *group) {
            CHECK(r.has_target_true);
            CHECK(r.target_true != r.target_new);
            CHECK_FALSE(r.target_true.empty());
            CHECK(subjects.insert(r.subject).second);  // globally unique subjects
            CHECK(pairs.insert({r.subject, r.relation_id}).second);
            CHECK_FALSE(r.paraphrases.empty());
            CHECK(r.paraphrases[0].find(r.subject) != std::string::npos);
            // Relation lookup works for every referenced id.
            CHECK(c.relation(r.relation_id).id == r.relation_id);
        }
    }

    // Training text carries each fact's statement at least `reps` times and
    // at least one negated line per fact.
    for (const auto& r : c.records) {
        const std::string stmt = render_prompt(r).text + " " + r.target_true;
        CHECK(count_lines_equal(c.train_text, stmt) >= spec.reps);
        const std::string neg = negate_prompt(r, c.relation(r.relation_id));
        int neg_lines = 0;
        for (const auto& l : split_lines(c.train_text))
            if (starts_with(l, neg + " ")) ++neg_lines;
        CHECK(neg_lines >= spec.neg_reps);
    }

    // Verification lines end in the literal labels.
    int fc_true = 0, fc_false = 0;
    for (const auto& l : split_lines(c.train_text)) {
        if (starts_with(l, kDefaultFactCheckPreamble)) {
            if (ends_with(l, " true")) ++fc_true;
            if (ends_with(l, " false")) ++fc_false;
        }
    }
    CHECK(fc_true == (spec.n_facts + spec.n_heldout) * spec.fc_reps / 2);
    CHECK(fc_false == (spec.n_facts + spec.n_heldout) * spec.fc_reps / 2);

    // Negated lines never state the true object.
    for (const auto& r : c.records) {
        const std::string neg = negate_prompt(r, c.relation(r.relation_id));
        for (const auto& l : split_lines(c.train_text))
            if (starts_with(l, neg + " ")) CHECK(l != neg + " " + r.target_true);
    }
}

TEST_CASE("synthetic corpus is deterministic under seed") {
    SyntheticSpec spec;
    spec.n_facts = 8;
    spec.n_heldout = 4;
    spec.seed = 21;
    Corpus a = generate_synthetic_corpus(spec);
    Corpus b = generate_synthetic_corpus(spec);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.train_text == b.train_text);
    spec.seed = 22;
    Corpus c = generate_synthetic_corpus(spec);
    CHECK(a.to_json() != c.to_json());
}

TEST_CASE("synthetic corpus validates its spec") {
    SyntheticSpec bad;
    bad.n_facts = 0;
    CHECK_THROWS_AS((void)generate_synthetic_corpus(bad), validation_error);
    SyntheticSpec rel;
    rel.n_relations = 99;
    CHECK_THROWS_WITH_AS((void)generate_synthetic_corpus(rel),
                         doctest::Contains("relation pool exhausted"), validation_error);
    SyntheticSpec many;
    many.n_facts = 100000;
    CHECK_THROWS_WITH_AS((void)generate_synthetic_corpus(many),
                         doctest::Contains("subject pool exhausted"), validation_error);
    SyntheticSpec reps;
    reps.reps = 0;
    CHECK_THROWS_AS((void)generate_synthetic_corpus(reps), validation_error);
}

TEST_CASE("corpus JSON round-trip preserves records and relations") {
    SyntheticSpec spec;
    spec.n_facts = 6;
    spec.n_heldout = 3;
    spec.seed = 31;
    Corpus a = generate_synthetic_corpus(spec);
    Corpus b = Corpus::from_json(a.to_json());
    CHECK(b.records.size() == a.records.size());
    CHECK(b.heldout.size() == a.heldout.size());
    CHECK(b.relations.size() == a.relations.size());
    CHECK(b.to_json() == a.to_json());
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(b.records[i].id == a.records[i].id);
        CHECK(b.records[i].subject == a.records[i].subject);
        CHECK(b.records[i].target_true == a.records[i].target_true);
        CHECK(b.records[i].target_new == a.records[i].target_new);
    }
}

TEST_CASE("vocab_sources covers everything evaluation will tokenize") {
    SyntheticSpec spec;
    spec.n_facts = 5;
    spec.n_heldout = 2;
    spec.seed = 41;
    Corpus c = generate_synthetic_corpus(spec);
    Tokenizer tok = Tokenizer::build(c.vocab_sources());
    for (const auto* group : {&c.records, &c.heldout}) {
        for (const auto& r : *group) {
            const auto& rspec = c.relation(r.relation_id);
            CHECK(tok.try_encode(render_prompt(r).text).has_value());
            CHECK(tok.try_encode(negate_prompt(r, rspec)).has_value());
            CHECK(tok.try_encode(r.target_new).has_value());
            CHECK(tok.try_encode(build_fact_check_prompt(r, r.target_new, rspec)).has_value());
            for (const auto& p : r.paraphrases) CHECK(tok.try_encode(p).has_value());
        }
    }
    CHECK(tok.try_encode("true false not").has_value());
    CHECK(tok.try_encode(trim(kNegationFallbackPrefix)).has_value());
}

TEST_CASE("mcf dataset loader maps fields and reports malformed records") {
    testutil::TmpDir dir("mcf");
    const std::string good = R"([
      {"case_id": 3, "requested_rewrite": {"prompt": "The capital of {} is",
        "subject": "Freedonia", "target_new": {"str": "Lisbon"},
        "target_true": {"str": "Sylvania"}},
       "paraphrase_prompts": ["Freedonia has as capital"]},
      {"case_id": 4, "requested_rewrite": {"prompt": "The anthem of {} is",
        "subject": "Freedonia", "target_new": {"str": "Hymn"}}}
    ])";
    std::string p = dir.file("mcf.json");
    write_file(p, good);
    Corpus c = load_dataset(p, DatasetFormat::mcf);
    REQUIRE(c.records.size() == 2);
    CHECK(c.records[0].id == "case_3");
    CHECK(c.records[0].subject == "Freedonia");
    CHECK(c.records[0].target_true == "Sylvania");
    CHECK(c.records[0].target_new == "Lisbon");
    CHECK(c.records[0].has_target_true);
    CHECK_FALSE(c.records[0].interrogative);
    CHECK(c.records[0].paraphrases == std::vector<std::string>{"Freedonia has as capital"});
    CHECK(render_prompt(c.records[0]).text == "The capital of Freedonia is");
    CHECK_FALSE(c.records[1].has_target_true);
    // One relation per distinct template.
    CHECK(c.relations.size() == 2);
    CHECK(c.records[0].relation_id != c.records[1].relation_id);

    auto expect_error = [&](const std::string& body, const std::string& needle) {
        std::string f = dir.file("bad.json");
        write_file(f, body);
        CHECK_THROWS_WITH_AS((void)load_dataset(f, DatasetFormat::mcf),
                             doctest::Contains(needle.c_str()), validation_error);
    };
    expect_error("{\"not\": \"array\"}", "must be a JSON array");
    expect_error("[{\"requested_rewrite\": {}}]", "record 0");
    expect_error(R"([{"case_id": 1, "requested_rewrite": {"prompt": "no placeholder",
                  "subject": "S", "target_new": {"str": "x"}}}])",
                 "placeholder");
    expect_error(R"([{"case_id": 1, "requested_rewrite": {"prompt": "{} x {}",
                  "subject": "S", "target_new": {"str": "x"}}}])",
                 "exactly one");
    expect_error(R"([{"case_id": 1, "requested_rewrite": {"prompt": "T of {} is",
                  "subject": "S", "target_new": {"str": "same"},
                  "target_true": {"str": "same"}}}])",
                 "target_true equals target_new");
    expect_error(R"([{"case_id": 1, "requested_rewrite": {"prompt": "T of {} is",
                  "subject": "S", "target_new": {"str": "a"}}},
                 {"case_id": 1, "requested_rewrite": {"prompt": "U of {} is",
                  "subject": "S", "target_new": {"str": "b"}}}])",
                 "duplicate id");
    expect_error("[{}]", "record 0");
    expect_error("not json at all", "parse failure");
}

TEST_CASE("zsre dataset loader marks questions and missing truths") {
    testutil::TmpDir dir("zsre");
    const std::string body = R"([
      {"id": 7, "subject": "Freedonia", "src": "What is the capital of Freedonia?",
       "alt": "Lisbon"},
      {"subject": "Sylvania", "src": "What is the anthem of Sylvania?", "alt": "Hymn"}
    ])";
    std::string p = dir.file("zsre.json");
    write_file(p, body);
    Corpus c = load_dataset(p, DatasetFormat::zsre);
    REQUIRE(c.records.size() == 2);
    CHECK(c.records[0].id == "zsre_7");
    CHECK(c.records[1].id == "zsre_1");  // falls back to the record index
    for (const auto& r : c.records) {
        CHECK(r.interrogative);
        CHECK_FALSE(r.has_target_true);
    }
    CHECK(render_prompt(c.records[0]).text == "What is the capital of Freedonia?");

    std::string f = dir.file("bad.json");
    write_file(f, R"([{"subject": "X", "src": "no subject mention?", "alt": "y"}])");
    CHECK_THROWS_WITH_AS((void)load_dataset(f, DatasetFormat::zsre), doctest::Contains("record 0"),
                         validation_error);
}

TEST_CASE("dataset training text mirrors the synthetic line mix") {
    testutil::TmpDir dir("dstext");
    const std::string body = R"([
      {"case_id": 1, "requested_rewrite": {"prompt": "The capital of {} is",
        "subject": "Freedonia", "target_new": {"str": "Lisbon"},
        "target_true": {"str": "Sylvania"}}},
      {"case_id": 2, "requested_rewrite": {"prompt": "The capital of {} is",
        "subject": "Osterlich", "target_new": {"str": "Quopolis"},
        "target_true": {"str": "Marville"}}},
      {"case_id": 3, "requested_rewrite": {"prompt": "The motto of {} is",
        "subject": "Freedonia", "target_new": {"str": "Onward"}}}
    ])";
    std::string p = dir.file("d.json");
    write_file(p, body);
    Corpus c = load_dataset(p, DatasetFormat::mcf);
    std::string text = build_dataset_training_text(c, 3, 2, 2, 9);
    // Records with a known truth contribute statements...
    CHECK(count_lines_equal(text, "The capital of Freedonia is Sylvania") == 3);
    CHECK(count_lines_equal(text, "The capital of Osterlich is Marville") == 3);
    // ...and negations / verification lines drawn from the shared pool.
    int negs = 0, fcs = 0;
    for (const auto& l : split_lines(text)) {
        if (l.find(" is not ") != std::string::npos) ++negs;
        if (starts_with(l, kDefaultFactCheckPreamble)) ++fcs;
    }
    CHECK(negs == 2 * 2);
    CHECK(fcs == 2 * 2);
    // The truthless record contributes nothing.
    for (const auto& l : split_lines(text)) CHECK(l.find("motto") == std::string::npos);

    // Deterministic under seed.
    CHECK(build_dataset_training_text(c, 3, 2, 2, 9) == text);
    CHECK(build_dataset_training_text(c, 3, 2, 2, 10) != text);
    CHECK_THROWS_AS((void)build_dataset_training_text(c, 0, 1, 1, 9), validation_error);

    // All-questions corpora produce no trainable lines.
    std::string zp = dir.file("z.json");
    write_file(zp, R"([{"subject": "X", "src": "What is the capital of X?", "alt": "y"}])");
    Corpus z = load_dataset(zp, DatasetFormat::zsre);
    CHECK(build_dataset_training_text(z, 3, 2, 2, 9).empty());
}

TEST_CASE("save_records / load_records round-trip") {
    SyntheticSpec spec;
    spec.n_facts = 4;
    spec.n_heldout = 0;
    spec.seed = 51;
    Corpus c = generate_synthetic_corpus(spec);
    std::string text = save_records(c.records);
    auto back = load_records(text);
    REQUIRE(back.size() == c.records.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].to_json() == c.records[i].to_json());
    }
    CHECK_THROWS_AS((void)load_records("{\"not\": \"an array\"}"), validation_error);
}
