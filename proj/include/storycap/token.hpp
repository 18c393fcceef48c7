#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace storycap {

// A token with its part-of-speech tag (Penn Treebank tag set).
struct TaggedToken {
    std::string text;
    std::string tag;

    bool operator==(const TaggedToken&) const = default;
};

using TaggedSentence = std::vector<TaggedToken>;

inline bool is_noun_tag(std::string_view tag) {
    return tag == "NN" || tag == "NNS" || tag == "NNP" || tag == "NNPS";
}

inline bool is_plural_noun_tag(std::string_view tag) {
    return tag == "NNS" || tag == "NNPS";
}

inline bool is_proper_noun_tag(std::string_view tag) {
    return tag == "NNP" || tag == "NNPS";
}

inline bool is_verb_tag(std::string_view tag) {
    return tag == "VB" || tag == "VBD" || tag == "VBG" || tag == "VBN" ||
           tag == "VBP" || tag == "VBZ" || tag == "MD";
}

// Punctuation tags in the Treebank convention are the punctuation itself.
inline bool is_punct_tag(std::string_view tag) {
    return !tag.empty() && std::isalnum(static_cast<unsigned char>(tag[0])) == 0;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool is_capitalized(std::string_view s) {
    return !s.empty() && std::isupper(static_cast<unsigned char>(s[0])) != 0;
}

// Splits text into word and punctuation tokens. Apostrophes and hyphens
// stay inside words; every other non-alphanumeric character is its own
// token.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    };
    for (char c : text) {
        const unsigned char uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            flush();
        } else if (std::isalnum(uc) || c == '\'' || c == '-') {
            cur += c;
        } else {
            flush();
            tokens.push_back(std::string(1, c));
        }
    }
    flush();
    return tokens;
}

// Joins tokens with single spaces, attaching one-character punctuation to
// the preceding token.
inline std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    for (const std::string& tok : tokens) {
        const bool punct =
            tok.size() == 1 && std::isalnum(static_cast<unsigned char>(tok[0])) == 0;
        if (!out.empty() && !punct) out += ' ';
        out += tok;
    }
    return out;
}

}  // namespace storycap
