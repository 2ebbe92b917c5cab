#include "editlab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "editlab/error.hpp"
#include "editlab/rng.hpp"
#include "editlab/text.hpp"

namespace editlab {

namespace {

constexpr const char* kPlaceholder = "{subject}";

const std::set<std::string>& copula_words() {
    static const std::set<std::string> words{"is", "are", "was", "were"};
    return words;
}

// Splits a whitespace word into its core and trailing punctuation run.
std::pair<std::string, std::string> split_trailing_punct(const std::string& word) {
    size_t e = word.size();
    while (e > 0 && std::string(".,?!:;").find(word[e - 1]) != std::string::npos) --e;
    return {word.substr(0, e), word.substr(e)};
}

std::optional<int> find_copula(const std::vector<std::string>& words) {
    std::optional<int> idx;
    for (size_t i = 0; i < words.size(); ++i) {
        if (copula_words().count(lower(split_trailing_punct(words[i]).first))) {
            idx = static_cast<int>(i);  // keep the last occurrence
        }
    }
    return idx;
}

std::string capitalize(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            break;
        }
    }
    return out;
}

size_t count_occurrences(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

}  // namespace

// ---- json ----

nlohmann::json RelationSpec::to_json() const {
    nlohmann::json j{{"id", id},
                     {"template", template_text},
                     {"negation_template", negation_template},
                     {"fact_check_preamble", fact_check_preamble}};
    if (copula_word_index)
        j["copula_word_index"] = *copula_word_index;
    else
        j["copula_word_index"] = nullptr;
    return j;
}

RelationSpec RelationSpec::from_json(const nlohmann::json& j) {
    RelationSpec r;
    r.id = j.at("id").get<std::string>();
    r.template_text = j.at("template").get<std::string>();
    if (j.contains("copula_word_index") && !j.at("copula_word_index").is_null())
        r.copula_word_index = j.at("copula_word_index").get<int>();
    r.negation_template = j.at("negation_template").get<std::string>();
    r.fact_check_preamble = j.at("fact_check_preamble").get<std::string>();
    return r;
}

nlohmann::json FactRecord::to_json() const {
    return nlohmann::json{{"id", id},
                          {"subject", subject},
                          {"relation_id", relation_id},
                          {"template", template_text},
                          {"target_true", has_target_true ? nlohmann::json(target_true)
                                                          : nlohmann::json(nullptr)},
                          {"target_new", target_new},
                          {"paraphrases", paraphrases},
                          {"interrogative", interrogative}};
}

FactRecord FactRecord::from_json(const nlohmann::json& j) {
    FactRecord r;
    r.id = j.at("id").get<std::string>();
    r.subject = j.at("subject").get<std::string>();
    r.relation_id = j.at("relation_id").get<std::string>();
    r.template_text = j.at("template").get<std::string>();
    if (j.at("target_true").is_null()) {
        r.has_target_true = false;
    } else {
        r.target_true = j.at("target_true").get<std::string>();
    }
    r.target_new = j.at("target_new").get<std::string>();
    r.paraphrases = j.at("paraphrases").get<std::vector<std::string>>();
    r.interrogative = j.at("interrogative").get<bool>();
    return r;
}

// ---- rendering ----

RenderedPrompt render_template(const std::string& template_text, const std::string& subject) {
    const size_t n = count_occurrences(template_text, kPlaceholder);
    if (n != 1) {
        throw validation_error("template must contain exactly one {subject} placeholder: '" +
                               template_text + "'");
    }
    const size_t pos = template_text.find(kPlaceholder);
    const std::string prefix = template_text.substr(0, pos);
    const std::string suffix = template_text.substr(pos + std::string(kPlaceholder).size());

    RenderedPrompt out;
    out.text = normalize_ws(prefix + subject + suffix);
    out.subject_tok_begin = static_cast<int>(Tokenizer::split(prefix).size());
    out.subject_tok_end =
        out.subject_tok_begin + static_cast<int>(Tokenizer::split(subject).size());
    return out;
}

RenderedPrompt render_prompt(const FactRecord& rec) {
    return render_template(rec.template_text, rec.subject);
}

// ---- negation ----

std::string negate_text(const std::string& prompt, const RelationSpec& spec) {
    if (starts_with(prompt, kNegationFallbackPrefix))
        throw validation_error("already negated: '" + prompt + "'");

    std::vector<std::string> words = split_ws(prompt);
    const std::optional<int> cop =
        spec.copula_word_index ? find_copula(words) : std::nullopt;
    if (!cop) {
        return std::string(kNegationFallbackPrefix) + prompt;
    }
    const int i = *cop;
    if (i + 1 < static_cast<int>(words.size()) &&
        lower(split_trailing_punct(words[i + 1]).first) == "not") {
        throw validation_error("already negated: '" + prompt + "'");
    }
    auto [core, punct] = split_trailing_punct(words[i]);
    std::vector<std::string> out(words.begin(), words.begin() + i);
    out.push_back(core);
    out.push_back("not" + punct);
    out.insert(out.end(), words.begin() + i + 1, words.end());
    return join(out, " ");
}

std::string negate_prompt(const FactRecord& rec, const RelationSpec& spec) {
    return negate_text(render_prompt(rec).text, spec);
}

// ---- declarativization ----

std::string declarativize(const std::string& question, const std::string& answer) {
    const std::string q = trim(question);
    if (q.empty() || q.back() != '?')
        throw validation_error("not a question: '" + question + "'");
    std::string body = q.substr(0, q.size() - 1);
    body = trim(body);
    std::vector<std::string> w = split_ws(body);
    if (w.size() < 2) throw validation_error("no declarativization rule for: '" + question + "'");

    auto rest = [&](size_t from) {
        return join(std::vector<std::string>(w.begin() + from, w.end()), " ");
    };
    const std::string w0 = lower(w[0]);
    const std::string w1 = lower(w[1]);

    // Ordered rule table, version 1.
    // 1-3: "What is/are/was X" -> "X is/are/was A"
    if (w0 == "what" && (w1 == "is" || w1 == "are" || w1 == "was") && w.size() > 2)
        return capitalize(rest(2)) + " " + w1 + " " + answer;
    // 4-5: "Who is/was X" -> "X is/was A"
    if (w0 == "who" && (w1 == "is" || w1 == "was") && w.size() > 2)
        return capitalize(rest(2)) + " " + w1 + " " + answer;
    // 6: "Who <verb> X" -> "A <verb> X"
    if (w0 == "who" && w.size() > 2) return capitalize(answer + " " + rest(1));
    // 7: "Where is X" -> "X is in A"
    if (w0 == "where" && w1 == "is" && w.size() > 2)
        return capitalize(rest(2)) + " is in " + answer;
    // 8: "Where was X <verb>" -> "X was <verb> in A"
    if (w0 == "where" && w1 == "was" && w.size() > 3)
        return capitalize(join(std::vector<std::string>(w.begin() + 2, w.end() - 1), " ")) +
               " was " + w.back() + " in " + answer;
    // 9: "When was X <verb>" -> "X was <verb> in A"
    if (w0 == "when" && w1 == "was" && w.size() > 3)
        return capitalize(join(std::vector<std::string>(w.begin() + 2, w.end() - 1), " ")) +
               " was " + w.back() + " in " + answer;
    // 10: "In which <noun> is X" -> "X is in A"
    if (w0 == "in" && w1 == "which" && w.size() > 4 && lower(w[3]) == "is")
        return capitalize(rest(4)) + " is in " + answer;

    throw validation_error("no declarativization rule for: '" + question + "'");
}

std::string build_fact_check_prompt(const FactRecord& rec, const std::string& target,
                                    const RelationSpec& spec) {
    const std::string prompt = render_prompt(rec).text;
    const std::string statement =
        rec.interrogative ? declarativize(prompt, target) : prompt + " " + target;
    const std::string preamble =
        spec.fact_check_preamble.empty() ? kDefaultFactCheckPreamble : spec.fact_check_preamble;
    return preamble + " " + statement;
}

// ---- corpus container ----

const RelationSpec& Corpus::relation(const std::string& id) const {
    for (const auto& r : relations)
        if (r.id == id) return r;
    throw validation_error("unknown relation id: '" + id + "'");
}

std::vector<std::string> Corpus::vocab_sources() const {
    std::vector<std::string> src;
    src.push_back(train_text);
    src.push_back(kNegationFallbackPrefix);
    src.push_back(kDefaultFactCheckPreamble);
    src.push_back("true false not");
    auto add_record = [&](const FactRecord& rec) {
        const RelationSpec& spec = relation(rec.relation_id);
        const std::string prompt = render_prompt(rec).text;
        src.push_back(prompt);
        src.push_back(negate_text(prompt, spec));
        for (const auto& p : rec.paraphrases) src.push_back(p);
        src.push_back(rec.target_new);
        src.push_back(build_fact_check_prompt(rec, rec.target_new, spec));
        if (rec.has_target_true)
            src.push_back(build_fact_check_prompt(rec, rec.target_true, spec));
    };
    for (const auto& r : records) add_record(r);
    for (const auto& r : heldout) add_record(r);
    return src;
}

nlohmann::json Corpus::to_json() const {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) recs.push_back(r.to_json());
    nlohmann::json held = nlohmann::json::array();
    for (const auto& r : heldout) held.push_back(r.to_json());
    nlohmann::json rels = nlohmann::json::array();
    for (const auto& r : relations) rels.push_back(r.to_json());
    return nlohmann::json{
        {"records", recs}, {"heldout", held}, {"relations", rels}, {"train_text", train_text}};
}

Corpus Corpus::from_json(const nlohmann::json& j) {
    Corpus c;
    for (const auto& r : j.at("records")) c.records.push_back(FactRecord::from_json(r));
    for (const auto& r : j.at("heldout")) c.heldout.push_back(FactRecord::from_json(r));
    for (const auto& r : j.at("relations")) c.relations.push_back(RelationSpec::from_json(r));
    c.train_text = j.value("train_text", std::string());
    return c;
}

// ---- synthetic generation ----

namespace {

struct RelationDef {
    const char* id;
    const char* tmpl;
    const char* paraphrase;
    std::vector<std::string> objects;
};

std::vector<std::string> product_pool(const std::vector<std::string>& a,
                                      const std::vector<std::string>& b) {
    std::vector<std::string> out;
    for (const auto& x : a)
        for (const auto& y : b) out.push_back(x + y);
    return out;
}

const std::vector<RelationDef>& relation_catalog() {
    static const std::vector<RelationDef> defs = [] {
        std::vector<RelationDef> v;
        v.push_back({"mother_language", "The mother language of {subject} is",
                     "The native language of {subject} is",
                     product_pool({"Vel", "Dor", "Mar", "Quo", "Tal", "Bren", "Sor", "Fen"},
                                  {"tish", "nic", "esh", "lic"})});
        v.push_back({"birth_city", "The birth city of {subject} is",
                     "The city of birth of {subject} is",
                     product_pool({"Bal", "Quor", "Nor", "Hest", "Vin", "Gal", "Mir", "Ost"},
                                  {"mere", "ford", "fall", "wick"})});
        v.push_back({"favorite_color", "The favorite color of {subject} is",
                     "The preferred color of {subject} is",
                     {"crimson", "teal", "ochre", "indigo", "maroon", "violet", "amber", "slate",
                      "coral", "olive", "mauve", "cyan", "sepia", "jade", "plum", "russet"}});
        v.push_back({"signature_instrument", "The signature instrument of {subject} is",
                     "The chosen instrument of {subject} is",
                     {"zither", "oboe", "cello", "banjo", "sitar", "fife", "lute", "viol", "tabor",
                      "shawm", "rebab", "dulcimer", "ocarina", "marimba", "bugle", "psaltery"}});
        v.push_back({"home_planet", "The home planet of {subject} is",
                     "The native planet of {subject} is",
                     product_pool({"Vex", "Kor", "Zan", "Thal", "Ryn", "Jov", "Ulm", "Ner"},
                                  {"ara", "ion", "eth", "os"})});
        return v;
    }();
    return defs;
}

// Deliberately small, heavily reused name pools: when many subjects share a
// first name (and many share a surname), no single name token identifies a
// subject, so a model that memorizes the facts is pushed to combine the whole
// name — concentrating subject identity at the final subject token, which is
// where editing reads and writes.
const std::vector<std::string>& first_names() {
    static const std::vector<std::string> v{"Alden", "Mira", "Tobin", "Sela",  "Rufus",
                                            "Ilka",  "Bram", "Neva",  "Corin", "Lotte"};
    return v;
}

const std::vector<std::string>& last_names() {
    static const std::vector<std::string> v{"Cormick", "Vale", "Ostram", "Harlow",
                                            "Vance",   "Keller", "Moss", "Abara",
                                            "Duval",   "Ferro",  "Giske", "Holt"};
    return v;
}

// Filler openers of varying token length, prepended to some training lines so
// statements appear at shifted positions. Without this the model can key facts
// on absolute token positions instead of the subject tokens.
const std::vector<std::string>& context_prefixes() {
    static const std::vector<std::string> v{"Indeed",       "Reportedly",   "Clearly",
                                            "Apparently",   "As noted",     "People agree",
                                            "Every record shows"};
    return v;
}

RelationSpec make_relation_spec(const std::string& id, const std::string& tmpl) {
    RelationSpec spec;
    spec.id = id;
    spec.template_text = tmpl;
    spec.copula_word_index = find_copula(split_ws(tmpl));
    spec.fact_check_preamble = kDefaultFactCheckPreamble;
    // Negation template derived through the same insertion used at runtime.
    RelationSpec probe = spec;
    probe.negation_template = tmpl;
    spec.negation_template = negate_text(tmpl, probe);
    return spec;
}

std::string draw_other(Rng& rng, const std::vector<std::string>& pool, const std::string& avoid) {
    std::string pick;
    do {
        pick = pool[rng.below(pool.size())];
    } while (pick == avoid);
    return pick;
}

}  // namespace

Corpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    if (spec.n_facts <= 0) throw validation_error("empty corpus requested (n_facts must be > 0)");
    if (spec.n_heldout < 0) throw validation_error("n_heldout must be >= 0");
    if (spec.reps < 1) throw validation_error("reps must be >= 1");
    const auto& catalog = relation_catalog();
    if (spec.n_relations < 1 || spec.n_relations > static_cast<int>(catalog.size())) {
        throw validation_error("relation pool exhausted: requested " +
                               std::to_string(spec.n_relations) + " relations, catalog has " +
                               std::to_string(catalog.size()));
    }

    const int total = spec.n_facts + spec.n_heldout;
    std::vector<std::string> subjects;
    for (const auto& f : first_names())
        for (const auto& l : last_names()) subjects.push_back(f + " " + l);
    if (total > static_cast<int>(subjects.size())) {
        throw validation_error("subject pool exhausted: need " + std::to_string(total) +
                               " subjects, pool has " + std::to_string(subjects.size()));
    }

    Rng rng(spec.seed);
    rng.shuffle(subjects);

    Corpus corpus;
    for (int r = 0; r < spec.n_relations; ++r) {
        const auto& def = catalog[r];
        if (def.objects.size() < 2) {
            throw validation_error("object pool exhausted for relation '" +
                                   std::string(def.id) + "': need at least 2 objects");
        }
        corpus.relations.push_back(make_relation_spec(def.id, def.tmpl));
    }

    std::vector<std::string> lines;
    auto make_record = [&](int i, bool heldout_flag) {
        const auto& def = catalog[i % spec.n_relations];
        FactRecord rec;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "fact_%04d", i);
        rec.id = buf;
        rec.subject = subjects[i];
        rec.relation_id = def.id;
        rec.template_text = def.tmpl;
        rec.target_true = def.objects[rng.below(def.objects.size())];
        rec.target_new = draw_other(rng, def.objects, rec.target_true);
        rec.paraphrases.push_back(render_template(def.paraphrase, rec.subject).text);

        const RelationSpec& rspec = corpus.relation(def.id);
        const std::string prompt = render_prompt(rec).text;
        const std::string neg = negate_text(prompt, rspec);
        for (int k = 0; k < spec.reps; ++k) lines.push_back(prompt + " " + rec.target_true);
        // Reworded and position-shifted restatements of the same fact, so the
        // association generalizes across surface form and token position.
        for (int k = 0; k < spec.reps / 2; ++k)
            lines.push_back(rec.paraphrases[0] + " " + rec.target_true);
        for (int k = 0; k < spec.reps / 2; ++k) {
            const auto& pre = context_prefixes()[rng.below(context_prefixes().size())];
            lines.push_back(pre + " " + prompt + " " + rec.target_true);
        }
        for (int k = 0; k < spec.neg_reps; ++k)
            lines.push_back(neg + " " + draw_other(rng, def.objects, rec.target_true));
        for (int k = 0; k < spec.fc_reps; ++k) {
            if (k % 2 == 0) {
                lines.push_back(build_fact_check_prompt(rec, rec.target_true, rspec) + " true");
            } else {
                const std::string wrong = draw_other(rng, def.objects, rec.target_true);
                lines.push_back(build_fact_check_prompt(rec, wrong, rspec) + " false");
            }
        }
        (heldout_flag ? corpus.heldout : corpus.records).push_back(std::move(rec));
    };

    for (int i = 0; i < spec.n_facts; ++i) make_record(i, false);
    for (int i = spec.n_facts; i < total; ++i) make_record(i, true);

    rng.shuffle(lines);
    corpus.train_text = join(lines, "\n");
    return corpus;
}

// ---- dataset loading ----

namespace {

const nlohmann::json& need_field(const nlohmann::json& j, const char* field, size_t index) {
    if (!j.contains(field)) {
        throw validation_error("record " + std::to_string(index) + ": missing field " + field);
    }
    return j.at(field);
}

std::string need_string(const nlohmann::json& j, const char* field, size_t index) {
    const auto& v = need_field(j, field, index);
    if (!v.is_string() || v.get<std::string>().empty()) {
        throw validation_error("record " + std::to_string(index) + ": field " + field +
                               " must be a non-empty string");
    }
    return v.get<std::string>();
}

std::string need_nested_string(const nlohmann::json& parent, const char* outer,
                               const char* inner, size_t index) {
    const auto& o = need_field(parent, outer, index);
    if (!o.is_object() || !o.contains(inner) || !o.at(inner).is_string() ||
        o.at(inner).get<std::string>().empty()) {
        throw validation_error("record " + std::to_string(index) + ": missing field " +
                               std::string(outer) + "." + inner);
    }
    return o.at(inner).get<std::string>();
}

std::string id_to_string(const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : std::to_string(v.get<long long>());
}

std::string replace_once(const std::string& text, const std::string& what,
                         const std::string& with, size_t index, const char* field) {
    const size_t pos = text.find(what);
    if (pos == std::string::npos) {
        throw validation_error("record " + std::to_string(index) + ": '" + what +
                               "' not found in " + field);
    }
    return text.substr(0, pos) + with + text.substr(pos + what.size());
}

}  // namespace

Corpus load_dataset(const std::string& path, DatasetFormat format) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error("dataset parse failure in " + path + ": " + e.what());
    }
    if (!root.is_array()) throw validation_error("dataset must be a JSON array: " + path);

    Corpus corpus;
    std::set<std::string> seen_ids;
    std::set<std::pair<std::string, std::string>> seen_pairs;
    std::map<std::string, std::string> template_to_relation;

    for (size_t i = 0; i < root.size(); ++i) {
        const auto& j = root[i];
        FactRecord rec;

        if (format == DatasetFormat::mcf) {
            rec.id = "case_" + id_to_string(need_field(j, "case_id", i));
            const auto& rw = need_field(j, "requested_rewrite", i);
            const std::string prompt = need_string(rw, "prompt", i);
            if (count_occurrences(prompt, "{}") != 1) {
                throw validation_error("record " + std::to_string(i) +
                                       ": prompt must contain exactly one {} placeholder");
            }
            rec.subject = need_string(rw, "subject", i);
            rec.template_text = replace_once(prompt, "{}", kPlaceholder, i, "prompt");
            rec.target_new = need_nested_string(rw, "target_new", "str", i);
            if (rw.contains("target_true")) {
                rec.target_true = need_nested_string(rw, "target_true", "str", i);
            } else {
                rec.has_target_true = false;
            }
            if (j.contains("paraphrase_prompts"))
                rec.paraphrases = j.at("paraphrase_prompts").get<std::vector<std::string>>();
        } else {
            rec.subject = need_string(j, "subject", i);
            const std::string src = need_string(j, "src", i);
            rec.template_text = replace_once(src, rec.subject, kPlaceholder, i, "src");
            rec.target_new = need_string(j, "alt", i);
            rec.interrogative = true;
            rec.has_target_true = false;
            rec.id = j.contains("id") ? "zsre_" + id_to_string(j.at("id"))
                                      : "zsre_" + std::to_string(i);
        }

        if (count_occurrences(rec.template_text, kPlaceholder) != 1) {
            throw validation_error("record " + std::to_string(i) +
                                   ": template must contain exactly one subject placeholder");
        }
        if (rec.has_target_true && rec.target_true == rec.target_new) {
            throw validation_error("record " + std::to_string(i) +
                                   ": target_true equals target_new ('" + rec.target_new + "')");
        }
        if (!seen_ids.insert(rec.id).second) {
            throw validation_error("record " + std::to_string(i) + ": duplicate id '" + rec.id +
                                   "'");
        }
        if (!seen_pairs.insert({rec.subject, rec.template_text}).second) {
            throw validation_error("record " + std::to_string(i) +
                                   ": duplicate (subject, relation) pair for '" + rec.subject +
                                   "'");
        }

        auto it = template_to_relation.find(rec.template_text);
        if (it == template_to_relation.end()) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "rel_%03d", static_cast<int>(corpus.relations.size()));
            corpus.relations.push_back(make_relation_spec(buf, rec.template_text));
            it = template_to_relation.emplace(rec.template_text, buf).first;
        }
        rec.relation_id = it->second;
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

std::string build_dataset_training_text(const Corpus& corpus, int reps, int neg_reps, int fc_reps,
                                        uint64_t seed) {
    if (reps < 1) throw validation_error("reps must be >= 1");
    // Object pool per relation: every true/new object its records mention.
    std::map<std::string, std::vector<std::string>> pools;
    for (const auto& rec : corpus.records) {
        auto& pool = pools[rec.relation_id];
        auto add = [&pool](const std::string& s) {
            if (std::find(pool.begin(), pool.end(), s) == pool.end()) pool.push_back(s);
        };
        if (rec.has_target_true) add(rec.target_true);
        add(rec.target_new);
    }

    Rng rng(seed);
    std::vector<std::string> lines;
    for (const auto& rec : corpus.records) {
        if (!rec.has_target_true) continue;
        const RelationSpec& rspec = corpus.relation(rec.relation_id);
        const std::string prompt = render_prompt(rec).text;
        const std::string neg = negate_text(prompt, rspec);
        const auto& pool = pools[rec.relation_id];
        const bool has_other =
            std::any_of(pool.begin(), pool.end(),
                        [&](const std::string& s) { return s != rec.target_true; });
        for (int k = 0; k < reps; ++k) lines.push_back(prompt + " " + rec.target_true);
        if (has_other) {
            for (int k = 0; k < neg_reps; ++k)
                lines.push_back(neg + " " + draw_other(rng, pool, rec.target_true));
            for (int k = 0; k < fc_reps; ++k) {
                if (k % 2 == 0) {
                    lines.push_back(build_fact_check_prompt(rec, rec.target_true, rspec) +
                                    " true");
                } else {
                    lines.push_back(build_fact_check_prompt(rec, draw_other(rng, pool,
                                                                            rec.target_true),
                                                            rspec) +
                                    " false");
                }
            }
        }
    }
    rng.shuffle(lines);
    return join(lines, "\n");
}

std::string save_records(const std::vector<FactRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(r.to_json());
    return arr.dump(2) + "\n";
}

std::vector<FactRecord> load_records(const std::string& json_text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error(std::string("record list parse failure: ") + e.what());
    }
    if (!arr.is_array()) throw validation_error("record list must be a JSON array");
    std::vector<FactRecord> out;
    for (size_t i = 0; i < arr.size(); ++i) {
        try {
            out.push_back(FactRecord::from_json(arr[i]));
        } catch (const nlohmann::json::exception& e) {
            throw validation_error("record " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace editlab
