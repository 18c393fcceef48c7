#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "storycap/connective_bank.hpp"
#include "storycap/token.hpp"

namespace storycap::stitching {

// Ordered per-segment sentences of one video, plus the stitched output once
// computed. Every document has at least one non-empty sentence.
struct CaptionDoc {
    std::string video_id;
    std::vector<TaggedSentence> sentences;
    std::string stitched;
};

enum class Gender { Male, Female, Neutral };

// Token attribute lexicon. File format: one "token<TAB>attr" per line where
// attr is male, female, neutral, plural, male_name or female_name. The
// *_name forms also mark the token as a proper name so connective insertion
// keeps its capitalization. A token may not carry two genders.
class GenderLexicon {
public:
    static GenderLexicon from_text(const std::string& text);

    void add(const std::string& token, const std::string& attr);
    std::optional<Gender> gender(const std::string& lemma) const;
    bool is_plural_override(const std::string& token) const;
    bool is_name(const std::string& token) const;

private:
    std::unordered_map<std::string, Gender> gender_;
    std::unordered_set<std::string> plural_;
    std::unordered_set<std::string> names_;
};

// Noun lemmatizer: an exception table (one "form<TAB>lemma" per line) plus
// ordered suffix-stripping rules for regular plurals. Tokens that are not
// plural nouns pass through lowercased.
class Lemmatizer {
public:
    Lemmatizer() = default;
    static Lemmatizer from_text(const std::string& text);

    void add_exception(const std::string& form, const std::string& lemma);
    std::string lemma(const std::string& token, const std::string& tag) const;

private:
    std::unordered_map<std::string, std::string> exceptions_;
};

// Word-embedding table. Text format: a "count dim" header line, then one
// "token v1 ... vD" line per word. Tokens are lowercased on load; the first
// occurrence wins. Values must be finite.
class EmbeddingTable {
public:
    static EmbeddingTable from_text(const std::string& text);

    size_t dim() const { return dim_; }
    size_t size() const { return vectors_.size(); }
    const std::vector<double>* lookup(const std::string& token) const;

private:
    size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Token -> POS-tag map used when loading raw caption text. Unknown tokens
// fall back to built-in closed-class words and light heuristics (digits to
// CD, -ing to VBG, capitalized non-initial tokens to NNP, otherwise NN).
// File format: one "token<TAB>TAG" per line.
class TagLexicon {
public:
    TagLexicon() = default;
    static TagLexicon from_text(const std::string& text);

    void add(const std::string& token, const std::string& tag);
    std::string tag_token(const std::string& token, bool sentence_initial) const;

private:
    std::unordered_map<std::string, std::string> tags_;
};

TaggedSentence tokenize_and_tag(const std::string& text, const TagLexicon& lex);

std::string detokenize(const TaggedSentence& tokens);

// Replaces repeated noun-phrase mentions with pronouns, linking backwards:
// noun phrases sharing a lemmatized head noun and number form a chain, and
// every mention after the first becomes he/she/it/they (subject slot) or
// him/her/it/them (object slot). First mentions are never touched, pronouns
// are never re-resolved, and when two chains would map to the same pronoun
// inside one sentence the later chain's mention stays as written.
CaptionDoc resolve_backward_coreference(const CaptionDoc& doc, const GenderLexicon& lex,
                                        const Lemmatizer& lemmatizer = {});

// Unweighted mean of in-vocabulary token vectors; an all-OOV sentence
// embeds to the zero vector.
std::vector<double> embed_sentence(const std::vector<std::string>& tokens,
                                   const EmbeddingTable& table);

// Connective of the bank instance nearest (L2) to the mean of the two
// sentence vectors; ties go to the lowest bank index.
std::string find_connective(const std::vector<double>& prev_sentence_vec,
                            const std::vector<double>& next_sentence_vec,
                            const std::vector<ConnectiveInstance>& bank);

// Prefixes each sentence after the first with "Connective," and lowercases
// the original first word unless it is a proper noun. An empty choice skips
// the gap; a sentence already starting with the chosen connective is left
// alone. `names` may add name lookups for the capitalization rule.
CaptionDoc insert_connective(const CaptionDoc& doc, const std::vector<std::string>& choices,
                             const GenderLexicon* names = nullptr);

// Full pipeline for one document: backward coreference, then per-gap
// connective lookup and insertion, then the stitched string.
CaptionDoc stitch(const CaptionDoc& doc, const GenderLexicon& lex, const EmbeddingTable& table,
                  const std::vector<ConnectiveInstance>& bank,
                  const Lemmatizer& lemmatizer = {});

// Caption file: {"video_id": ..., "captions": [{"segment_index": int,
// "text": str}, ...]}; captions sorted by segment_index on load.
struct CaptionFile {
    std::string video_id;
    std::vector<std::pair<int, std::string>> captions;
};

CaptionFile captions_from_json(const std::string& text);

CaptionDoc make_caption_doc(const CaptionFile& file, const TagLexicon& tags);

}  // namespace storycap::stitching
