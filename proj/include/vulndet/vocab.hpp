#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "vulndet/errors.hpp"

namespace vulndet {

// Split camelCase / snake_case compounds into subtokens; anything that
// does not look like an identifier passes through whole.
inline std::vector<std::string> split_subtokens(const std::string& tok) {
    if (tok.empty()) return {};
    char c0 = tok[0];
    if (!(std::isalpha((unsigned char)c0) || c0 == '_')) return {tok};

    std::vector<std::string> parts;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) parts.push_back(cur);
        cur.clear();
    };
    for (std::size_t i = 0; i < tok.size(); ++i) {
        char c = tok[i];
        if (c == '_') {
            flush();
            continue;
        }
        if (!cur.empty() && std::isupper((unsigned char)c)) {
            char prev = cur.back();
            if (std::islower((unsigned char)prev) ||
                std::isdigit((unsigned char)prev))
                flush();
        }
        cur.push_back(c);
    }
    flush();
    if (parts.empty()) parts.push_back(tok); // "_" and friends
    return parts;
}

// Token -> index map with UNK/PAD specials. Built from the train split
// only: tokens with frequency >= min_freq, ordered by frequency
// descending then lexicographic, capped at `cap` entries.
class Vocabulary {
public:
    static constexpr int kUnk = 0;
    static constexpr int kPad = 1;

    Vocabulary() : tokens_{"<unk>", "<pad>"} { reindex(); }

    static Vocabulary build(const std::vector<std::vector<std::string>>& docs,
                            int min_freq = 3, int cap = 90000) {
        std::map<std::string, long> freq;
        for (const auto& doc : docs)
            for (const std::string& t : doc) ++freq[t];

        std::vector<std::pair<std::string, long>> kept;
        for (const auto& [tok, n] : freq)
            if (n >= min_freq) kept.push_back({tok, n});
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (cap > 2 && kept.size() > std::size_t(cap - 2))
            kept.resize(std::size_t(cap - 2));

        Vocabulary v;
        for (auto& [tok, n] : kept) v.tokens_.push_back(tok);
        v.reindex();
        return v;
    }

    // Rebuild from a serialized index-ordered token list (checkpoints).
    static Vocabulary from_tokens(std::vector<std::string> tokens) {
        if (tokens.size() < 2 || tokens[0] != "<unk>" || tokens[1] != "<pad>")
            throw Error("vocabulary must start with <unk>, <pad>");
        Vocabulary v;
        v.tokens_ = std::move(tokens);
        v.reindex();
        return v;
    }

    int lookup(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? kUnk : it->second;
    }

    int size() const { return int(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;

    void reindex() {
        index_.clear();
        for (std::size_t i = 0; i < tokens_.size(); ++i)
            index_[tokens_[i]] = int(i);
    }
};

} // namespace vulndet
