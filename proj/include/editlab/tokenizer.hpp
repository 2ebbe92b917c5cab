#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace editlab {

// Token ids plus the text they round-trip to.
struct TokenSeq {
    std::vector<int> ids;
    std::string text;
};

// Closed-vocabulary word-level tokenizer. Splitting is whitespace-based with
// leading/trailing punctuation (. , ? ! : ;) peeled off into their own tokens;
// detokenization re-attaches punctuation without a preceding space, so
// single-space-normalized text over the vocabulary round-trips exactly.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kEos = 1;

    Tokenizer();

    // Collects tokens from the given texts in first-seen order (deterministic).
    static Tokenizer build(const std::vector<std::string>& sources);

    int vocab_size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const;
    bool has(const std::string& word) const { return index_.count(word) > 0; }

    static bool is_punct(const std::string& tok);
    static std::vector<std::string> split(const std::string& text);
    static std::string join_tokens(const std::vector<std::string>& toks);

    std::vector<int> encode(const std::string& text) const;  // throws on out-of-vocabulary
    std::optional<std::vector<int>> try_encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;  // skips pad/eos
    TokenSeq seq(const std::string& text) const;

    nlohmann::json to_json() const;
    static Tokenizer from_json(const nlohmann::json& j);

    bool operator==(const Tokenizer& o) const { return tokens_ == o.tokens_; }

private:
    void add(const std::string& tok);
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace editlab
