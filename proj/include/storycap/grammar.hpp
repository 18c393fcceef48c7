#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "storycap/connective_bank.hpp"
#include "storycap/token.hpp"

namespace storycap::grammar {

// A probabilistic context-free grammar in Chomsky normal form.
//
// Rule file format, one rule per line (# starts a comment):
//   A -> B C 0.8      binary rule over nonterminals
//   A -> 'word' 0.5   lexical rule matching a token's text (case-insensitive)
//   A -> TAG 0.5      lexical rule matching a token's POS tag
// A symbol is a nonterminal iff it appears on some left-hand side; a
// single-symbol right-hand side that is a nonterminal is a unary rule and
// rejected as non-CNF. The start symbol is the first rule's left-hand side.
class Pcfg {
public:
    struct BinaryRule {
        std::string lhs, left, right;
        double prob = 0.0;
    };
    struct LexicalRule {
        std::string lhs;
        std::string terminal;  // lowercased word, or tag verbatim
        bool matches_word = false;
        double prob = 0.0;
    };

    const std::string& start_symbol() const { return start_; }
    const std::vector<BinaryRule>& binary_rules() const { return binary_; }
    const std::vector<LexicalRule>& lexical_rules() const { return lexical_; }
    const std::vector<std::string>& nonterminals() const { return nonterminals_; }

    std::optional<double> binary_prob(const std::string& lhs, const std::string& left,
                                      const std::string& right) const;
    // Highest probability among lexical rules of `lhs` matching the token.
    std::optional<double> best_lexical_prob(const std::string& lhs, const TaggedToken& t) const;

private:
    friend Pcfg load_grammar(const std::string&, bool, std::vector<std::string>*);
    std::string start_;
    std::vector<std::string> nonterminals_;
    std::vector<BinaryRule> binary_;    // canonically sorted
    std::vector<LexicalRule> lexical_;  // canonically sorted
};

// Parses and validates grammar text. Throws InputError (with line numbers)
// on unparsable lines, probabilities outside (0,1], non-CNF rules, duplicate
// rules, and binary rules referencing symbols that never appear as a
// left-hand side. Per-LHS probability sums above 1 + 1e-6 are an error when
// `strict_probability_sums` is set and a warning otherwise.
Pcfg load_grammar(const std::string& text, bool strict_probability_sums = false,
                  std::vector<std::string>* warnings = nullptr);

// Best parse tree. Internal nodes have exactly two children; preterminal
// nodes carry the covered token. log_prob is the subtree's total.
struct ParseTree {
    std::string label;
    double log_prob = 0.0;
    int begin = 0, end = 0;  // covered token span [begin, end)
    std::vector<ParseTree> children;
    std::string word, tag;  // preterminal only

    bool is_preterminal() const { return children.empty(); }
};

// Max-probability CKY parse; std::nullopt when the sentence has no parse
// (including any token no lexical rule covers). Ties break toward the
// lower split point, then the canonically smaller rule.
std::optional<ParseTree> cky_parse(const TaggedSentence& tokens, const Pcfg& grammar);

struct ConnectiveMatch {
    std::string connective;  // lowercased
    int remainder_begin = 0, remainder_end = 0;
};

// Matches trees whose first constituent is a one-token ADJP or ADVP over a
// JJ- or RB-tagged token, followed (allowing intervening punctuation) by an
// S whose children are NP and VP. Returns the connective and the S span.
std::optional<ConnectiveMatch> matches_connective_pattern(const ParseTree& tree);

// An adjacent-sentence pair from the tagged corpus.
struct TaggedPair {
    TaggedSentence first, second;
    std::string pair_id;
};

// Corpus format: one pair per line, token_TAG tokens separated by spaces,
// a TAB between the two sentences.
std::vector<TaggedPair> load_tagged_pairs(const std::string& text);

using SentenceEmbedder = std::function<std::vector<double>(const std::vector<std::string>&)>;

// Scans pairs in corpus order; for every pair whose second sentence parses
// and matches the connective pattern, embeds both sentences joined by a
// "</s>" boundary token with the connective removed, and records the
// instance. Stops at max_instances. Throws InputError when nothing matches.
std::vector<ConnectiveInstance> build_connective_bank(const std::vector<TaggedPair>& pairs,
                                                      const Pcfg& grammar,
                                                      const SentenceEmbedder& embed,
                                                      int max_instances = 500);

}  // namespace storycap::grammar
