#include "editlab/tokenizer.hpp"

#include <sstream>

#include "editlab/error.hpp"
#include "editlab/text.hpp"

namespace editlab {

namespace {
constexpr const char* kPunct = ".,?!:;";

bool is_punct_char(char c) {
    for (const char* p = kPunct; *p; ++p)
        if (*p == c) return true;
    return false;
}
}  // namespace

Tokenizer::Tokenizer() {
    add("<pad>");
    add("<eos>");
}

void Tokenizer::add(const std::string& tok) {
    if (index_.count(tok)) return;
    index_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.push_back(tok);
}

Tokenizer Tokenizer::build(const std::vector<std::string>& sources) {
    Tokenizer t;
    for (const auto& src : sources)
        for (const auto& tok : split(src)) t.add(tok);
    return t;
}

const std::string& Tokenizer::token(int id) const {
    if (id < 0 || id >= vocab_size())
        throw validation_error("token id out of range: " + std::to_string(id));
    return tokens_[id];
}

bool Tokenizer::is_punct(const std::string& tok) {
    return tok.size() == 1 && is_punct_char(tok[0]);
}

std::vector<std::string> Tokenizer::split(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& word : split_ws(text)) {
        size_t b = 0, e = word.size();
        // Leading punctuation, each char its own token.
        while (b < e && is_punct_char(word[b])) out.push_back(std::string(1, word[b++]));
        // Peel trailing punctuation but emit it after the core word.
        size_t te = e;
        while (te > b && is_punct_char(word[te - 1])) --te;
        if (te > b) out.push_back(word.substr(b, te - b));
        for (size_t i = te; i < e; ++i) out.push_back(std::string(1, word[i]));
    }
    return out;
}

std::string Tokenizer::join_tokens(const std::vector<std::string>& toks) {
    std::string out;
    for (const auto& tok : toks) {
        if (!out.empty() && !is_punct(tok)) out.push_back(' ');
        out += tok;
    }
    return out;
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& tok : split(text)) {
        auto it = index_.find(tok);
        if (it == index_.end()) throw validation_error("out-of-vocabulary token: '" + tok + "'");
        ids.push_back(it->second);
    }
    return ids;
}

std::optional<std::vector<int>> Tokenizer::try_encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& tok : split(text)) {
        auto it = index_.find(tok);
        if (it == index_.end()) return std::nullopt;
        ids.push_back(it->second);
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::vector<std::string> toks;
    for (int id : ids) {
        if (id == kPad || id == kEos) continue;
        toks.push_back(token(id));
    }
    return join_tokens(toks);
}

TokenSeq Tokenizer::seq(const std::string& text) const {
    TokenSeq s;
    s.ids = encode(text);
    s.text = decode(s.ids);
    return s;
}

nlohmann::json Tokenizer::to_json() const {
    return nlohmann::json{{"tokens", tokens_}};
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
    Tokenizer t;
    auto toks = j.at("tokens").get<std::vector<std::string>>();
    if (toks.size() < 2 || toks[0] != "<pad>" || toks[1] != "<eos>")
        throw validation_error("tokenizer json missing reserved tokens");
    for (const auto& tok : toks) t.add(tok);
    return t;
}

}  // namespace editlab
