#include "storycap/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "storycap/errors.hpp"

namespace storycap::grammar {

using nlohmann::json;

std::optional<double> Pcfg::binary_prob(const std::string& lhs, const std::string& left,
                                        const std::string& right) const {
    for (const auto& r : binary_)
        if (r.lhs == lhs && r.left == left && r.right == right) return r.prob;
    return std::nullopt;
}

std::optional<double> Pcfg::best_lexical_prob(const std::string& lhs,
                                              const TaggedToken& t) const {
    const std::string word = to_lower(t.text);
    std::optional<double> best;
    for (const auto& r : lexical_) {
        if (r.lhs != lhs) continue;
        const bool match = r.matches_word ? r.terminal == word : r.terminal == t.tag;
        if (match && (!best || r.prob > *best)) best = r.prob;
    }
    return best;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string rule_repr_binary(const Pcfg::BinaryRule& r) {
    return r.lhs + " -> " + r.left + " " + r.right;
}

std::string rule_repr_lexical(const Pcfg::LexicalRule& r) {
    return r.lhs + " -> " + (r.matches_word ? "'" + r.terminal + "'" : r.terminal);
}

}  // namespace

Pcfg load_grammar(const std::string& text, bool strict_probability_sums,
                  std::vector<std::string>* warnings) {
    struct RawRule {
        int line_no;
        std::string lhs;
        std::vector<std::string> rhs;
        double prob;
    };

    std::vector<RawRule> raw;
    std::set<std::string> lhs_symbols;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto fields = split_ws(line);
        if (fields.empty()) continue;
        const std::string where = "grammar line " + std::to_string(line_no);
        // A -> RHS... p
        if (fields.size() < 4 || fields[1] != "->")
            throw InputError(where + ": expected 'LHS -> RHS... PROB'");
        RawRule r;
        r.line_no = line_no;
        r.lhs = fields[0];
        try {
            size_t used = 0;
            r.prob = std::stod(fields.back(), &used);
            if (used != fields.back().size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw InputError(where + ": probability '" + fields.back() + "' is not a number");
        }
        if (!(r.prob > 0.0) || r.prob > 1.0)
            throw InputError(where + ": probability " + fields.back() +
                             " is outside (0, 1]");
        r.rhs.assign(fields.begin() + 2, fields.end() - 1);
        if (r.rhs.size() > 2)
            throw InputError(where + ": rule has " + std::to_string(r.rhs.size()) +
                             " right-hand symbols, not CNF");
        raw.push_back(std::move(r));
        lhs_symbols.insert(fields[0]);
    }
    if (raw.empty()) throw InputError("grammar: no rules");

    Pcfg g;
    g.start_ = raw.front().lhs;
    g.nonterminals_.assign(lhs_symbols.begin(), lhs_symbols.end());

    std::set<std::string> seen_rules;
    std::map<std::string, double> lhs_prob_sum;
    for (const auto& r : raw) {
        const std::string where = "grammar line " + std::to_string(r.line_no);
        lhs_prob_sum[r.lhs] += r.prob;
        if (r.rhs.size() == 2) {
            for (const std::string& sym : r.rhs) {
                if (sym.size() >= 2 && sym.front() == '\'')
                    throw InputError(where + ": quoted word in a binary rule, not CNF");
                if (!lhs_symbols.count(sym))
                    throw InputError(where + ": right-hand symbol '" + sym +
                                     "' never appears as a left-hand side");
            }
            Pcfg::BinaryRule b{r.lhs, r.rhs[0], r.rhs[1], r.prob};
            if (!seen_rules.insert(rule_repr_binary(b)).second)
                throw InputError(where + ": duplicate rule");
            g.binary_.push_back(std::move(b));
        } else {
            const std::string& sym = r.rhs[0];
            Pcfg::LexicalRule lex;
            lex.lhs = r.lhs;
            lex.prob = r.prob;
            if (sym.size() >= 2 && sym.front() == '\'' && sym.back() == '\'') {
                lex.matches_word = true;
                lex.terminal = to_lower(sym.substr(1, sym.size() - 2));
                if (lex.terminal.empty()) throw InputError(where + ": empty quoted word");
            } else {
                if (lhs_symbols.count(sym))
                    throw InputError(where + ": unary rule over nonterminal '" + sym +
                                     "', not CNF");
                lex.matches_word = false;
                lex.terminal = sym;
            }
            if (!seen_rules.insert(rule_repr_lexical(lex)).second)
                throw InputError(where + ": duplicate rule");
            g.lexical_.push_back(std::move(lex));
        }
    }

    for (const auto& [lhs, sum] : lhs_prob_sum) {
        if (sum > 1.0 + 1e-6) {
            const std::string msg =
                "grammar: probabilities for '" + lhs + "' sum to " + std::to_string(sum);
            if (strict_probability_sums) throw InputError(msg);
            if (warnings) warnings->push_back(msg);
        }
    }

    // Canonical rule order drives the CKY tie-break.
    std::sort(g.binary_.begin(), g.binary_.end(), [](const auto& a, const auto& b) {
        return rule_repr_binary(a) < rule_repr_binary(b);
    });
    std::sort(g.lexical_.begin(), g.lexical_.end(), [](const auto& a, const auto& b) {
        return rule_repr_lexical(a) < rule_repr_lexical(b);
    });
    return g;
}

namespace {

struct ChartCell {
    double log_prob = -std::numeric_limits<double>::infinity();
    int split = -1;       // binary backpointer
    int rule_index = -1;  // into binary or lexical rule list
    bool from_lexical = false;
};

struct SymbolIndex {
    std::vector<std::string> names;
    std::map<std::string, int> ids;

    int id(const std::string& name) {
        auto it = ids.find(name);
        if (it != ids.end()) return it->second;
        const int v = static_cast<int>(names.size());
        names.push_back(name);
        ids.emplace(name, v);
        return v;
    }
};

}  // namespace

std::optional<ParseTree> cky_parse(const TaggedSentence& tokens, const Pcfg& grammar) {
    const int n = static_cast<int>(tokens.size());
    if (n == 0) return std::nullopt;

    SymbolIndex symbols;
    for (const auto& nt : grammar.nonterminals()) symbols.id(nt);
    const int nsym = static_cast<int>(symbols.names.size());

    struct IndexedBinary {
        int lhs, left, right, rule_index;
        double logp;
    };
    std::vector<IndexedBinary> binary;
    binary.reserve(grammar.binary_rules().size());
    for (size_t i = 0; i < grammar.binary_rules().size(); ++i) {
        const auto& r = grammar.binary_rules()[i];
        binary.push_back({symbols.ids.at(r.lhs), symbols.ids.at(r.left), symbols.ids.at(r.right),
                          static_cast<int>(i), std::log(r.prob)});
    }

    // chart[(i * (n + 1) + j) * nsym + sym]
    std::vector<ChartCell> chart(static_cast<size_t>(n) * (n + 1) * nsym);
    auto cell = [&](int i, int j, int sym) -> ChartCell& {
        return chart[(static_cast<size_t>(i) * (n + 1) + j) * nsym + sym];
    };

    for (int i = 0; i < n; ++i) {
        bool covered = false;
        for (size_t ri = 0; ri < grammar.lexical_rules().size(); ++ri) {
            const auto& r = grammar.lexical_rules()[ri];
            const bool match = r.matches_word ? r.terminal == to_lower(tokens[i].text)
                                              : r.terminal == tokens[i].tag;
            if (!match) continue;
            covered = true;
            ChartCell& c = cell(i, i + 1, symbols.ids.at(r.lhs));
            const double lp = std::log(r.prob);
            if (lp > c.log_prob) {
                c.log_prob = lp;
                c.rule_index = static_cast<int>(ri);
                c.from_lexical = true;
                c.split = -1;
            }
        }
        if (!covered) return std::nullopt;
    }

    for (int span = 2; span <= n; ++span) {
        for (int i = 0; i + span <= n; ++i) {
            const int j = i + span;
            for (int k = i + 1; k < j; ++k) {
                for (const auto& r : binary) {
                    const ChartCell& lc = cell(i, k, r.left);
                    if (lc.rule_index < 0) continue;
                    const ChartCell& rc = cell(k, j, r.right);
                    if (rc.rule_index < 0) continue;
                    const double lp = lc.log_prob + rc.log_prob + r.logp;
                    ChartCell& c = cell(i, j, r.lhs);
                    // Strict improvement keeps the lower split and the
                    // canonically smaller rule on ties.
                    if (lp > c.log_prob) {
                        c.log_prob = lp;
                        c.split = k;
                        c.rule_index = r.rule_index;
                        c.from_lexical = false;
                    }
                }
            }
        }
    }

    auto start_it = symbols.ids.find(grammar.start_symbol());
    if (start_it == symbols.ids.end()) return std::nullopt;
    if (cell(0, n, start_it->second).rule_index < 0) return std::nullopt;

    std::function<ParseTree(int, int, int)> build = [&](int i, int j, int sym) {
        const ChartCell& c = cell(i, j, sym);
        ParseTree t;
        t.label = symbols.names[sym];
        t.log_prob = c.log_prob;
        t.begin = i;
        t.end = j;
        if (c.from_lexical) {
            t.word = tokens[i].text;
            t.tag = tokens[i].tag;
            return t;
        }
        const auto& r = grammar.binary_rules()[c.rule_index];
        t.children.push_back(build(i, c.split, symbols.ids.at(r.left)));
        t.children.push_back(build(c.split, j, symbols.ids.at(r.right)));
        return t;
    };
    return build(0, n, start_it->second);
}

std::optional<ConnectiveMatch> matches_connective_pattern(const ParseTree& tree) {
    if (tree.children.size() != 2) return std::nullopt;

    const ParseTree& first = tree.children[0];
    if (first.label != "ADJP" && first.label != "ADVP") return std::nullopt;
    if (first.end - first.begin != 1) return std::nullopt;

    // Locate the single covered token's preterminal.
    const ParseTree* leaf = &first;
    while (!leaf->is_preterminal()) leaf = &leaf->children.front();
    if (leaf->tag != "JJ" && leaf->tag != "RB") return std::nullopt;

    // Walk toward the following S, allowing punctuation in between.
    const ParseTree* node = &tree.children[1];
    while (true) {
        if (node->label == "S" && node->children.size() == 2 &&
            node->children[0].label == "NP" && node->children[1].label == "VP") {
            return ConnectiveMatch{to_lower(leaf->word), node->begin, node->end};
        }
        if (node->children.size() == 2 && node->children[0].end - node->children[0].begin == 1) {
            // Descend past a leading one-token punctuation constituent.
            const ParseTree* lead = &node->children[0];
            while (!lead->is_preterminal()) lead = &lead->children.front();
            if (is_punct_tag(lead->tag)) {
                node = &node->children[1];
                continue;
            }
        }
        return std::nullopt;
    }
}

std::vector<TaggedPair> load_tagged_pairs(const std::string& text) {
    std::vector<TaggedPair> pairs;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = "corpus line " + std::to_string(line_no);
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw InputError(where + ": expected a TAB between the two sentences");
        if (line.find('\t', tab + 1) != std::string::npos)
            throw InputError(where + ": more than two sentences");

        auto parse_side = [&](const std::string& side) {
            TaggedSentence sent;
            for (const std::string& tok : split_ws(side)) {
                const auto us = tok.rfind('_');
                if (us == std::string::npos || us == 0 || us + 1 == tok.size())
                    throw InputError(where + ": token '" + tok + "' is not token_TAG");
                sent.push_back({tok.substr(0, us), tok.substr(us + 1)});
            }
            if (sent.empty()) throw InputError(where + ": empty sentence");
            return sent;
        };
        TaggedPair p;
        p.first = parse_side(line.substr(0, tab));
        p.second = parse_side(line.substr(tab + 1));
        p.pair_id = "pair-" + std::to_string(line_no);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::vector<ConnectiveInstance> build_connective_bank(const std::vector<TaggedPair>& pairs,
                                                      const Pcfg& grammar,
                                                      const SentenceEmbedder& embed,
                                                      int max_instances) {
    if (max_instances <= 0) throw InputError("build_connective_bank: cap must be positive");
    std::vector<ConnectiveInstance> bank;
    for (const auto& pair : pairs) {
        if (static_cast<int>(bank.size()) >= max_instances) break;
        const auto tree = cky_parse(pair.second, grammar);
        if (!tree) continue;
        const auto match = matches_connective_pattern(*tree);
        if (!match) continue;

        std::vector<std::string> words;
        for (const auto& t : pair.first) words.push_back(to_lower(t.text));
        words.push_back("</s>");
        for (size_t i = 0; i < pair.second.size(); ++i) {
            // The matched connective is always the first constituent's token.
            if (static_cast<int>(i) == tree->children[0].begin) continue;
            words.push_back(to_lower(pair.second[i].text));
        }

        ConnectiveInstance inst;
        inst.connective = match->connective;
        inst.context_vector = embed(words);
        inst.source_pair_id = pair.pair_id;
        bank.push_back(std::move(inst));
    }
    if (bank.empty())
        throw InputError(
            "build_connective_bank: no pair matched the connective pattern; "
            "provide a larger corpus");
    return bank;
}

}  // namespace storycap::grammar
