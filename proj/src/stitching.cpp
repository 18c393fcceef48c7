#include "storycap/stitching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "storycap/errors.hpp"

namespace storycap::stitching {

using nlohmann::json;

// --- lexicons -----------------------------------------------------------

namespace {

std::vector<std::pair<std::string, std::string>> parse_tsv(const std::string& text,
                                                           const std::string& what) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw InputError(what + " line " + std::to_string(line_no) +
                             ": expected 'key<TAB>value'");
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

}  // namespace

GenderLexicon GenderLexicon::from_text(const std::string& text) {
    GenderLexicon lex;
    for (const auto& [token, attr] : parse_tsv(text, "gender lexicon"))
        lex.add(to_lower(token), attr);
    return lex;
}

void GenderLexicon::add(const std::string& token, const std::string& attr) {
    auto set_gender = [&](Gender g) {
        auto [it, inserted] = gender_.emplace(token, g);
        if (!inserted && it->second != g)
            throw InputError("gender lexicon: token '" + token + "' maps to two genders");
    };
    if (attr == "male") {
        set_gender(Gender::Male);
    } else if (attr == "female") {
        set_gender(Gender::Female);
    } else if (attr == "neutral") {
        set_gender(Gender::Neutral);
    } else if (attr == "plural") {
        plural_.insert(token);
    } else if (attr == "male_name") {
        set_gender(Gender::Male);
        names_.insert(token);
    } else if (attr == "female_name") {
        set_gender(Gender::Female);
        names_.insert(token);
    } else {
        throw InputError("gender lexicon: unknown attribute '" + attr + "' for token '" +
                         token + "'");
    }
}

std::optional<Gender> GenderLexicon::gender(const std::string& lemma) const {
    auto it = gender_.find(lemma);
    if (it == gender_.end()) return std::nullopt;
    return it->second;
}

bool GenderLexicon::is_plural_override(const std::string& token) const {
    return plural_.count(token) > 0;
}

bool GenderLexicon::is_name(const std::string& token) const {
    return names_.count(token) > 0;
}

Lemmatizer Lemmatizer::from_text(const std::string& text) {
    Lemmatizer lem;
    for (const auto& [form, lemma] : parse_tsv(text, "lemma exceptions"))
        lem.add_exception(form, lemma);
    return lem;
}

void Lemmatizer::add_exception(const std::string& form, const std::string& lemma) {
    exceptions_[to_lower(form)] = to_lower(lemma);
}

std::string Lemmatizer::lemma(const std::string& token, const std::string& tag) const {
    const std::string low = to_lower(token);
    auto it = exceptions_.find(low);
    if (it != exceptions_.end()) return it->second;
    if (!is_plural_noun_tag(tag)) return low;

    auto ends_with = [&](const char* suffix) {
        const size_t len = std::char_traits<char>::length(suffix);
        return low.size() >= len && low.compare(low.size() - len, len, suffix) == 0;
    };
    if (low.size() > 4 && ends_with("ies")) return low.substr(0, low.size() - 3) + "y";
    if (ends_with("sses") || ends_with("shes") || ends_with("ches") || ends_with("xes") ||
        ends_with("zes") || ends_with("oes"))
        return low.substr(0, low.size() - 2);
    if (low.size() > 1 && low.back() == 's' && !ends_with("ss") && !ends_with("us") &&
        !ends_with("is"))
        return low.substr(0, low.size() - 1);
    return low;
}

EmbeddingTable EmbeddingTable::from_text(const std::string& text) {
    EmbeddingTable table;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InputError("embedding table: empty file");
    std::istringstream header(line);
    long long count = 0, dim = 0;
    if (!(header >> count >> dim) || count < 0 || dim <= 0)
        throw InputError("embedding table: header must be 'count dim'");
    table.dim_ = static_cast<size_t>(dim);

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        std::string token;
        row >> token;
        std::vector<double> vec;
        vec.reserve(table.dim_);
        double v = 0.0;
        while (row >> v) vec.push_back(v);
        const std::string where = "embedding table line " + std::to_string(line_no);
        if (vec.size() != table.dim_)
            throw InputError(where + ": token '" + token + "' has " +
                             std::to_string(vec.size()) + " values, expected " +
                             std::to_string(table.dim_));
        for (double x : vec)
            if (!std::isfinite(x))
                throw InputError(where + ": token '" + token + "' has a non-finite value");
        table.vectors_.emplace(to_lower(token), std::move(vec));
    }
    if (table.vectors_.size() != static_cast<size_t>(count) && count != 0) {
        // Header counts duplicates collapsed by lowercasing; only complain
        // when the file clearly disagrees.
        if (table.vectors_.size() > static_cast<size_t>(count))
            throw InputError("embedding table: header count " + std::to_string(count) +
                             " is smaller than the number of rows");
    }
    return table;
}

const std::vector<double>* EmbeddingTable::lookup(const std::string& token) const {
    auto it = vectors_.find(to_lower(token));
    if (it == vectors_.end()) return nullptr;
    return &it->second;
}

// --- tokenizer and tagger ------------------------------------------------

namespace {

const std::unordered_map<std::string, std::string>& builtin_tags() {
    static const std::unordered_map<std::string, std::string> tags = {
        {"a", "DT"},      {"an", "DT"},    {"the", "DT"},    {"this", "DT"},
        {"that", "DT"},   {"these", "DT"}, {"those", "DT"},  {"and", "CC"},
        {"or", "CC"},     {"but", "CC"},   {"is", "VBZ"},    {"are", "VBP"},
        {"was", "VBD"},   {"were", "VBD"}, {"be", "VB"},     {"been", "VBN"},
        {"being", "VBG"}, {"has", "VBZ"},  {"have", "VBP"},  {"had", "VBD"},
        {"do", "VBP"},    {"does", "VBZ"}, {"did", "VBD"},   {"he", "PRP"},
        {"she", "PRP"},   {"it", "PRP"},   {"they", "PRP"},  {"him", "PRP"},
        {"her", "PRP"},   {"them", "PRP"}, {"his", "PRP$"},  {"its", "PRP$"},
        {"their", "PRP$"},{"in", "IN"},    {"on", "IN"},     {"at", "IN"},
        {"of", "IN"},     {"with", "IN"},  {"near", "IN"},   {"by", "IN"},
        {"for", "IN"},    {"from", "IN"},  {"into", "IN"},   {"under", "IN"},
        {"over", "IN"},   {"to", "TO"},    {"not", "RB"},    {"very", "RB"},
        {"one", "CD"},    {"two", "CD"},   {"three", "CD"},  {"four", "CD"},
        {"five", "CD"},   {"six", "CD"},   {"seven", "CD"},  {"eight", "CD"},
        {"nine", "CD"},   {"ten", "CD"},
    };
    return tags;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (std::isdigit(static_cast<unsigned char>(c)) == 0) return false;
    return true;
}

}  // namespace

TagLexicon TagLexicon::from_text(const std::string& text) {
    TagLexicon lex;
    for (const auto& [token, tag] : parse_tsv(text, "tag lexicon")) lex.add(token, tag);
    return lex;
}

void TagLexicon::add(const std::string& token, const std::string& tag) {
    tags_[to_lower(token)] = tag;
}

std::string TagLexicon::tag_token(const std::string& token, bool sentence_initial) const {
    if (token.size() == 1 && std::isalnum(static_cast<unsigned char>(token[0])) == 0)
        return token;  // punctuation tags itself
    const std::string low = to_lower(token);
    if (auto it = tags_.find(low); it != tags_.end()) return it->second;
    if (auto it = builtin_tags().find(low); it != builtin_tags().end()) return it->second;
    if (all_digits(token)) return "CD";
    if (low.size() > 4 && low.compare(low.size() - 3, 3, "ing") == 0) return "VBG";
    if (!sentence_initial && is_capitalized(token)) return "NNP";
    return "NN";
}

TaggedSentence tokenize_and_tag(const std::string& text, const TagLexicon& lex) {
    TaggedSentence out;
    const auto tokens = tokenize(text);
    for (size_t i = 0; i < tokens.size(); ++i)
        out.push_back({tokens[i], lex.tag_token(tokens[i], i == 0)});
    return out;
}

std::string detokenize(const TaggedSentence& tokens) {
    std::vector<std::string> words;
    words.reserve(tokens.size());
    for (const auto& t : tokens) words.push_back(t.text);
    return storycap::detokenize(words);
}

// --- backward coreference -------------------------------------------------

namespace {

// A detected noun phrase: token span [begin, end) with the head noun last.
struct NounPhrase {
    int sentence = 0;
    int begin = 0, end = 0;
    int head = 0;
    bool subject = false;
};

// Shallow chunker: (DT|PDT)? CD* JJ* noun+. The optional CD admits counted
// plurals ("two dogs").
std::vector<NounPhrase> chunk_noun_phrases(const TaggedSentence& sent, int sentence_index) {
    std::vector<NounPhrase> out;
    int first_verb = static_cast<int>(sent.size());
    for (size_t i = 0; i < sent.size(); ++i) {
        if (is_verb_tag(sent[i].tag)) {
            first_verb = static_cast<int>(i);
            break;
        }
    }

    const int n = static_cast<int>(sent.size());
    int i = 0;
    while (i < n) {
        int j = i;
        if (j < n && (sent[j].tag == "DT" || sent[j].tag == "PDT")) ++j;
        while (j < n && sent[j].tag == "CD") ++j;
        while (j < n && sent[j].tag == "JJ") ++j;
        int nouns_begin = j;
        while (j < n && is_noun_tag(sent[j].tag)) ++j;
        if (j > nouns_begin) {
            NounPhrase np;
            np.sentence = sentence_index;
            np.begin = i;
            np.end = j;
            np.head = j - 1;
            np.subject = i < first_verb;
            out.push_back(np);
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

struct Mention {
    NounPhrase np;
};

struct Chain {
    std::string head_lemma;
    bool plural = false;
    Gender gender = Gender::Neutral;
    std::vector<Mention> mentions;
};

std::string pronoun_for(const Chain& chain, bool subject) {
    if (chain.plural) return subject ? "they" : "them";
    switch (chain.gender) {
        case Gender::Male: return subject ? "he" : "him";
        case Gender::Female: return subject ? "she" : "her";
        case Gender::Neutral: break;
    }
    return "it";
}

// Pronoun family used for the one-pronoun-per-sentence ambiguity guard.
std::string pronoun_family(const Chain& chain) {
    if (chain.plural) return "they";
    switch (chain.gender) {
        case Gender::Male: return "he";
        case Gender::Female: return "she";
        case Gender::Neutral: break;
    }
    return "it";
}

}  // namespace

CaptionDoc resolve_backward_coreference(const CaptionDoc& doc, const GenderLexicon& lex,
                                        const Lemmatizer& lemmatizer) {
    // Collect chains keyed by (head lemma, number).
    std::vector<Chain> chains;
    std::map<std::pair<std::string, bool>, size_t> chain_index;
    for (size_t s = 0; s < doc.sentences.size(); ++s) {
        for (const NounPhrase& np : chunk_noun_phrases(doc.sentences[s], static_cast<int>(s))) {
            const TaggedToken& head = doc.sentences[s][np.head];
            const std::string lemma = lemmatizer.lemma(head.text, head.tag);
            const bool plural =
                is_plural_noun_tag(head.tag) || lex.is_plural_override(to_lower(head.text));
            const auto key = std::make_pair(lemma, plural);
            auto it = chain_index.find(key);
            if (it == chain_index.end()) {
                Chain chain;
                chain.head_lemma = lemma;
                chain.plural = plural;
                chain.gender = lex.gender(lemma).value_or(Gender::Neutral);
                chain.mentions.push_back({np});
                chain_index.emplace(key, chains.size());
                chains.push_back(std::move(chain));
            } else {
                Chain& chain = chains[it->second];
                // At most one mention per sentence keeps chains unambiguous.
                if (chain.mentions.back().np.sentence == static_cast<int>(s)) continue;
                chain.mentions.push_back({np});
            }
        }
    }

    // Decide replacements: every mention after a chain's first, unless the
    // pronoun family is already taken in that sentence by another chain.
    struct Replacement {
        int begin, end;
        std::string pronoun;
    };
    std::map<int, std::vector<Replacement>> per_sentence;
    std::map<int, std::set<std::string>> families_used;
    for (const Chain& chain : chains) {
        if (chain.mentions.size() < 2) continue;
        const std::string family = pronoun_family(chain);
        for (size_t m = 1; m < chain.mentions.size(); ++m) {
            const NounPhrase& np = chain.mentions[m].np;
            auto& used = families_used[np.sentence];
            if (used.count(family)) continue;
            used.insert(family);
            per_sentence[np.sentence].push_back(
                {np.begin, np.end, pronoun_for(chain, np.subject)});
        }
    }

    CaptionDoc out = doc;
    for (auto& [sentence_index, repls] : per_sentence) {
        std::sort(repls.begin(), repls.end(),
                  [](const Replacement& a, const Replacement& b) { return a.begin < b.begin; });
        const TaggedSentence& src = doc.sentences[sentence_index];
        TaggedSentence rebuilt;
        size_t r = 0;
        for (int i = 0; i < static_cast<int>(src.size());) {
            if (r < repls.size() && repls[r].begin == i) {
                std::string word = repls[r].pronoun;
                if (i == 0) word[0] = static_cast<char>(std::toupper(
                    static_cast<unsigned char>(word[0])));
                rebuilt.push_back({word, "PRP"});
                i = repls[r].end;
                ++r;
            } else {
                rebuilt.push_back(src[i]);
                ++i;
            }
        }
        out.sentences[sentence_index] = std::move(rebuilt);
    }
    return out;
}

// --- connective insertion -------------------------------------------------

std::vector<double> embed_sentence(const std::vector<std::string>& tokens,
                                   const EmbeddingTable& table) {
    if (tokens.empty()) throw InputError("embed_sentence: no tokens");
    std::vector<double> sum(table.dim(), 0.0);
    size_t hits = 0;
    for (const std::string& tok : tokens) {
        if (const std::vector<double>* vec = table.lookup(tok)) {
            for (size_t i = 0; i < sum.size(); ++i) sum[i] += (*vec)[i];
            ++hits;
        }
    }
    if (hits > 0)
        for (double& v : sum) v /= static_cast<double>(hits);
    return sum;
}

std::string find_connective(const std::vector<double>& prev_sentence_vec,
                            const std::vector<double>& next_sentence_vec,
                            const std::vector<ConnectiveInstance>& bank) {
    if (bank.empty()) throw InputError("find_connective: empty bank");
    if (prev_sentence_vec.size() != next_sentence_vec.size())
        throw InputError("find_connective: sentence vectors have different dimensions");
    if (prev_sentence_vec.size() != bank[0].context_vector.size())
        throw InputError("find_connective: query dimension " +
                         std::to_string(prev_sentence_vec.size()) +
                         " does not match bank dimension " +
                         std::to_string(bank[0].context_vector.size()));

    std::vector<double> query(prev_sentence_vec.size());
    for (size_t i = 0; i < query.size(); ++i)
        query[i] = 0.5 * (prev_sentence_vec[i] + next_sentence_vec[i]);

    size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < bank.size(); ++i) {
        double d2 = 0.0;
        for (size_t j = 0; j < query.size(); ++j) {
            const double dev = query[j] - bank[i].context_vector[j];
            d2 += dev * dev;
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return bank[best].connective;
}

CaptionDoc insert_connective(const CaptionDoc& doc, const std::vector<std::string>& choices,
                             const GenderLexicon* names) {
    if (doc.sentences.empty()) throw InputError("insert_connective: empty document");
    if (choices.size() + 1 != doc.sentences.size())
        throw InputError("insert_connective: got " + std::to_string(choices.size()) +
                         " connectives for " + std::to_string(doc.sentences.size() - 1) +
                         " gaps");
    CaptionDoc out = doc;
    for (size_t s = 1; s < out.sentences.size(); ++s) {
        const std::string& choice = choices[s - 1];
        if (choice.empty()) continue;
        TaggedSentence& sent = out.sentences[s];
        if (sent.empty()) continue;
        if (to_lower(sent[0].text) == to_lower(choice)) continue;  // already there

        TaggedToken& first = sent[0];
        const bool keep_capital = is_proper_noun_tag(first.tag) || first.text == "I" ||
                                  (names && names->is_name(to_lower(first.text)));
        if (!keep_capital) first.text = to_lower(first.text);

        std::string connective = to_lower(choice);
        connective[0] =
            static_cast<char>(std::toupper(static_cast<unsigned char>(connective[0])));
        sent.insert(sent.begin(), {{connective, "RB"}, {",", ","}});
    }
    return out;
}

CaptionDoc stitch(const CaptionDoc& doc, const GenderLexicon& lex, const EmbeddingTable& table,
                  const std::vector<ConnectiveInstance>& bank, const Lemmatizer& lemmatizer) {
    if (doc.sentences.empty()) throw InputError("stitch: document has no sentences");
    for (const auto& sent : doc.sentences)
        if (sent.empty()) throw InputError("stitch: document has an empty sentence");

    CaptionDoc resolved = resolve_backward_coreference(doc, lex, lemmatizer);

    std::vector<std::string> choices;
    if (resolved.sentences.size() > 1) {
        std::vector<std::vector<double>> vecs;
        vecs.reserve(resolved.sentences.size());
        for (const auto& sent : resolved.sentences) {
            std::vector<std::string> words;
            words.reserve(sent.size());
            for (const auto& t : sent) words.push_back(to_lower(t.text));
            vecs.push_back(embed_sentence(words, table));
        }
        for (size_t s = 1; s < resolved.sentences.size(); ++s)
            choices.push_back(find_connective(vecs[s - 1], vecs[s], bank));
    }

    CaptionDoc out = insert_connective(resolved, choices, &lex);
    std::vector<std::string> all_tokens;
    for (const auto& sent : out.sentences)
        for (const auto& t : sent) all_tokens.push_back(t.text);
    out.stitched = storycap::detokenize(all_tokens);
    return out;
}

// --- caption files ---------------------------------------------------------

CaptionFile captions_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError("captions file: invalid JSON");
    if (!j.contains("video_id") || !j["video_id"].is_string())
        throw InputError("captions file: missing string field 'video_id'");
    if (!j.contains("captions") || !j["captions"].is_array())
        throw InputError("captions file: missing array field 'captions'");
    CaptionFile file;
    file.video_id = j["video_id"].get<std::string>();
    for (const auto& c : j["captions"]) {
        if (!c.contains("segment_index") || !c["segment_index"].is_number_integer())
            throw InputError("captions file " + file.video_id +
                             ": caption missing integer field 'segment_index'");
        if (!c.contains("text") || !c["text"].is_string())
            throw InputError("captions file " + file.video_id +
                             ": caption missing string field 'text'");
        file.captions.emplace_back(c["segment_index"].get<int>(), c["text"].get<std::string>());
    }
    std::sort(file.captions.begin(), file.captions.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 1; i < file.captions.size(); ++i)
        if (file.captions[i].first == file.captions[i - 1].first)
            throw InputError("captions file " + file.video_id + ": duplicate segment_index " +
                             std::to_string(file.captions[i].first));
    return file;
}

CaptionDoc make_caption_doc(const CaptionFile& file, const TagLexicon& tags) {
    CaptionDoc doc;
    doc.video_id = file.video_id;
    for (const auto& [index, text] : file.captions) {
        TaggedSentence sent = tokenize_and_tag(text, tags);
        if (sent.empty())
            throw InputError("captions file " + file.video_id + ": caption for segment " +
                             std::to_string(index) + " is empty");
        doc.sentences.push_back(std::move(sent));
    }
    if (doc.sentences.empty())
        throw InputError("captions file " + file.video_id + ": no captions");
    return doc;
}

}  // namespace storycap::stitching
