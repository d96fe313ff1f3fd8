// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdegen/core/errors.hpp"

namespace pdegen::cond {

// Whitespace + punctuation tokenizer with numeric canonicalization: every
// number becomes its two-decimal string ("850" -> "850.00"), which buckets
// near-equal values onto shared tokens. encode(decode(.)) is the identity on
// in-vocabulary canonical text modulo whitespace normalization.
class Vocabulary {
public:
    static constexpr int64_t pad_id = 0, unk_id = 1, bos_id = 2, eos_id = 3;

    static bool is_punct(char c) {
        return c == '.' || c == ',' || c == ':' || c == ';' || c == '!' || c == '?' || c == '(' ||
               c == ')' || c == '-';
    }

    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> out;
        size_t i = 0;
        while (i < text.size()) {
            const char c = text[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                size_t j = i;
                while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
                // a dot counts as a decimal point only when digits follow
                if (j + 1 < text.size() && text[j] == '.' &&
                    std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
                    ++j;
                    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
                }
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.2f", std::stod(text.substr(i, j - i)));
                out.emplace_back(buf);
                i = j;
                continue;
            }
            if (is_punct(c)) {
                out.emplace_back(1, c);
                ++i;
                continue;
            }
            size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
                   !is_punct(text[j]) && !std::isdigit(static_cast<unsigned char>(text[j])))
                ++j;
            out.push_back(text.substr(i, j - i));
            i = j;
        }
        return out;
    }

    static Vocabulary build(const std::vector<std::string>& corpus) {
        Vocabulary v;
        std::set<std::string> uniq;
        for (const auto& text : corpus)
            for (auto& tok : tokenize(text)) uniq.insert(tok);
        v.tokens_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
        for (const auto& t : uniq) {
            v.ids_[t] = static_cast<int64_t>(v.tokens_.size());
            v.tokens_.push_back(t);
        }
        return v;
    }

    int64_t size() const { return static_cast<int64_t>(tokens_.size()); }

    int64_t id_of(const std::string& tok) const {
        auto it = ids_.find(tok);
        return it == ids_.end() ? unk_id : it->second;
    }

    const std::string& token(int64_t id) const {
        if (id < 0 || id >= size()) throw UsageError("vocabulary: id out of range");
        return tokens_[static_cast<size_t>(id)];
    }

    // BOS + content + EOS; truncates over-long text with a warning.
    std::vector<int64_t> encode(const std::string& text, int64_t max_len) const {
        if (text.empty()) throw UsageError("vocabulary: cannot encode an empty caption");
        auto toks = tokenize(text);
        if (static_cast<int64_t>(toks.size()) + 2 > max_len) {
            std::cerr << "[warn] caption truncated from " << toks.size() + 2 << " to " << max_len
                      << " tokens\n";
            toks.resize(static_cast<size_t>(max_len - 2));
        }
        std::vector<int64_t> ids{bos_id};
        for (const auto& t : toks) ids.push_back(id_of(t));
        ids.push_back(eos_id);
        return ids;
    }

    std::string decode(const std::vector<int64_t>& ids) const {
        std::string out;
        for (int64_t id : ids) {
            if (id == pad_id || id == bos_id || id == eos_id) continue;
            if (!out.empty()) out += ' ';
            out += token(id);
        }
        return out;
    }

    // Canonical whitespace: single spaces, none before punctuation.
    static std::string normalize_ws(const std::string& text) {
        std::string out;
        for (char c : text) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!out.empty() && out.back() != ' ') out += ' ';
                continue;
            }
            if (is_punct(c) && !out.empty() && out.back() == ' ') out.back() = c;
            else out += c;
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out;
    }

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int64_t> ids_;
};

}  // namespace pdegen::cond
