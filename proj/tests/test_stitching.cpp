#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "storycap/errors.hpp"
#include "storycap/stitching.hpp"

using namespace storycap;
using namespace storycap::stitching;

namespace {

TagLexicon test_tags() {
    TagLexicon lex;
    lex.add("man", "NN");
    lex.add("woman", "NN");
    lex.add("boy", "NN");
    lex.add("plate", "NN");
    lex.add("table", "NN");
    lex.add("dog", "NN");
    lex.add("dogs", "NNS");
    lex.add("cup", "NN");
    lex.add("yard", "NN");
    lex.add("sits", "VBZ");
    lex.add("eats", "VBZ");
    lex.add("stands", "VBZ");
    lex.add("holds", "VBZ");
    lex.add("run", "VBP");
    lex.add("jump", "VBP");
    return lex;
}

GenderLexicon test_gender() {
    GenderLexicon lex;
    lex.add("man", "male");
    lex.add("woman", "female");
    lex.add("boy", "male");
    lex.add("mary", "female_name");
    return lex;
}

CaptionDoc doc_of(const std::vector<std::string>& sentences) {
    static const TagLexicon tags = test_tags();
    CaptionDoc doc;
    doc.video_id = "test";
    for (const auto& s : sentences) doc.sentences.push_back(tokenize_and_tag(s, tags));
    return doc;
}

std::vector<std::string> texts_of(const CaptionDoc& doc) {
    std::vector<std::string> out;
    for (const auto& s : doc.sentences) out.push_back(detokenize(s));
    return out;
}

}  // namespace

TEST_CASE("backward coreference resolves the worked plate example") {
    const CaptionDoc doc =
        doc_of({"A man is with a plate.", "A man is sitting with a plate."});
    const CaptionDoc out = resolve_backward_coreference(doc, test_gender());
    const auto texts = texts_of(out);
    REQUIRE(texts.size() == 2);
    CHECK(texts[0] == "A man is with a plate.");
    CHECK(texts[1] == "He is sitting with it.");
}

TEST_CASE("backward coreference leaves single sentences alone") {
    const CaptionDoc doc = doc_of({"A man is with a plate."});
    const CaptionDoc out = resolve_backward_coreference(doc, test_gender());
    CHECK(texts_of(out)[0] == "A man is with a plate.");
}

TEST_CASE("backward coreference handles plurals") {
    const CaptionDoc doc = doc_of({"Two dogs run.", "Two dogs jump."});
    const CaptionDoc out = resolve_backward_coreference(doc, test_gender());
    CHECK(texts_of(out)[1] == "They jump.");
}

TEST_CASE("backward coreference pronoun table") {
    const GenderLexicon lex = test_gender();
    SUBCASE("female subject and object") {
        const CaptionDoc doc = doc_of({"A woman holds a cup.", "A man sits with a woman."});
        const auto texts = texts_of(resolve_backward_coreference(doc, lex));
        CHECK(texts[1] == "A man sits with her.");
    }
    SUBCASE("male object") {
        const CaptionDoc doc = doc_of({"A boy sits.", "A woman stands with a boy."});
        const auto texts = texts_of(resolve_backward_coreference(doc, lex));
        CHECK(texts[1] == "A woman stands with him.");
    }
    SUBCASE("plural object") {
        const CaptionDoc doc = doc_of({"Two dogs run.", "A man sits with two dogs."});
        const auto texts = texts_of(resolve_backward_coreference(doc, lex));
        CHECK(texts[1] == "A man sits with them.");
    }
}

TEST_CASE("backward coreference is idempotent and keeps first mentions") {
    const CaptionDoc doc = doc_of(
        {"A man is with a plate.", "A man is sitting with a plate.", "A man eats."});
    const CaptionDoc once = resolve_backward_coreference(doc, test_gender());
    const CaptionDoc twice = resolve_backward_coreference(once, test_gender());
    CHECK(texts_of(once) == texts_of(twice));
    CHECK(texts_of(once)[0] == "A man is with a plate.");
    CHECK(texts_of(once)[2] == "He eats.");
}

TEST_CASE("coreference replacement shrinks sentences by span length minus one") {
    const CaptionDoc doc = doc_of({"A man is with a plate.", "A man eats."});
    const CaptionDoc out = resolve_backward_coreference(doc, test_gender());
    // "A man eats ." (4 tokens) -> "He eats ." (3 tokens): one 2-token NP
    // replaced by one pronoun.
    CHECK(doc.sentences[1].size() == 4);
    CHECK(out.sentences[1].size() == 3);
    CHECK(out.sentences[0] == doc.sentences[0]);
}

TEST_CASE("two chains mapping to the same pronoun keep the second mention") {
    // plate and cup are both neutral; replacing both with "it" in one
    // sentence would be ambiguous.
    const CaptionDoc doc =
        doc_of({"A plate is near a cup.", "A man sits with a plate near a cup."});
    const auto texts = texts_of(resolve_backward_coreference(doc, test_gender()));
    CHECK(texts[1] == "A man sits with it near a cup.");
}

TEST_CASE("embed_sentence averages in-vocabulary vectors") {
    const EmbeddingTable table = EmbeddingTable::from_text(
        "3 2\nalpha 1.0 0.0\nbeta 0.0 1.0\ngamma 4.0 4.0\n");
    SUBCASE("identical vectors average to themselves") {
        const auto v = embed_sentence({"alpha", "alpha", "alpha"}, table);
        CHECK(v == std::vector<double>{1.0, 0.0});
    }
    SUBCASE("two basis vectors") {
        const auto v = embed_sentence({"alpha", "beta"}, table);
        CHECK(v == std::vector<double>{0.5, 0.5});
    }
    SUBCASE("OOV tokens are skipped") {
        std::mt19937 rng(8);
        std::uniform_int_distribution<int> pick(0, 5);
        const std::vector<std::string> vocab{"alpha", "beta", "gamma", "zz", "qq", "rr"};
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<std::string> words;
            const int n = pick(rng) + 1;
            for (int i = 0; i < n; ++i) words.push_back(vocab[pick(rng)]);
            const auto got = embed_sentence(words, table);
            // Scalar oracle.
            double sum0 = 0.0, sum1 = 0.0;
            int hits = 0;
            for (const auto& w : words) {
                if (w == "alpha") { sum0 += 1.0; ++hits; }
                if (w == "beta") { sum1 += 1.0; ++hits; }
                if (w == "gamma") { sum0 += 4.0; sum1 += 4.0; ++hits; }
            }
            std::vector<double> expected{0.0, 0.0};
            if (hits > 0) expected = {sum0 / hits, sum1 / hits};
            CHECK(got[0] == doctest::Approx(expected[0]).epsilon(1e-12));
            CHECK(got[1] == doctest::Approx(expected[1]).epsilon(1e-12));
        }
    }
    SUBCASE("all-OOV sentences embed to zero") {
        const auto v = embed_sentence({"zz", "qq"}, table);
        CHECK(v == std::vector<double>{0.0, 0.0});
    }
}

TEST_CASE("find_connective nearest neighbour") {
    const std::vector<ConnectiveInstance> singleton{{"then", {5.0, 5.0}, ""}};
    CHECK(find_connective({0.0, 0.0}, {0.0, 0.0}, singleton) == "then");

    std::vector<ConnectiveInstance> bank;
    std::mt19937 rng(91);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> v(4);
        for (double& x : v) x = gauss(rng);
        bank.push_back({"c" + std::to_string(i), v, ""});
    }

    SUBCASE("zero distance returns the instance itself") {
        const auto& target = bank[7].context_vector;
        CHECK(find_connective(target, target, bank) == "c7");
    }
    SUBCASE("matches the linear-scan oracle on random queries") {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> prev(4), next(4);
            for (double& x : prev) x = gauss(rng);
            for (double& x : next) x = gauss(rng);
            const std::string got = find_connective(prev, next, bank);

            std::vector<double> query(4);
            for (int j = 0; j < 4; ++j) query[j] = (prev[j] + next[j]) / 2.0;
            int best = -1;
            double best_d = 1e300;
            for (int i = 0; i < 20; ++i) {
                double d = 0.0;
                for (int j = 0; j < 4; ++j) {
                    const double dev = query[j] - bank[i].context_vector[j];
                    d += dev * dev;
                }
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            CHECK(got == bank[best].connective);
        }
    }
    SUBCASE("ties go to the lowest bank index") {
        std::vector<ConnectiveInstance> tie{{"first", {1.0, 0.0}, ""},
                                            {"second", {-1.0, 0.0}, ""}};
        CHECK(find_connective({0.0, 0.0}, {0.0, 0.0}, tie) == "first");
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(find_connective({1.0}, {1.0}, bank), InputError);
        CHECK_THROWS_AS(find_connective({1.0, 2.0, 3.0, 4.0}, {1.0}, bank), InputError);
        CHECK_THROWS_AS(find_connective({}, {}, {}), InputError);
    }
}

TEST_CASE("insert_connective formats the transition") {
    const CaptionDoc doc = doc_of({"A man sits.", "He eats."});
    const CaptionDoc out = insert_connective(doc, {"then"});
    const auto texts = texts_of(out);
    CHECK(texts[0] == "A man sits.");
    CHECK(texts[1] == "Then, he eats.");
}

TEST_CASE("insert_connective skips empty choices and present connectives") {
    const CaptionDoc doc = doc_of({"A man sits.", "Then he eats.", "A woman stands."});
    const CaptionDoc out = insert_connective(doc, {"then", ""});
    const auto texts = texts_of(out);
    CHECK(texts[1] == "Then he eats.");  // already starts with it
    CHECK(texts[2] == "A woman stands.");
}

TEST_CASE("insert_connective keeps proper nouns and names capitalized") {
    static const TagLexicon tags = test_tags();
    CaptionDoc doc;
    doc.sentences.push_back(tokenize_and_tag("A man sits.", tags));
    doc.sentences.push_back(tokenize_and_tag("Mary eats.", tags));
    const GenderLexicon lex = test_gender();
    const CaptionDoc out = insert_connective(doc, {"then"}, &lex);
    CHECK(detokenize(out.sentences[1]) == "Then, Mary eats.");
}

TEST_CASE("insert_connective validates the choice count") {
    const CaptionDoc doc = doc_of({"A man sits.", "He eats."});
    CHECK_THROWS_AS(insert_connective(doc, {}), InputError);
    CHECK_THROWS_AS(insert_connective(doc, {"then", "later"}), InputError);
}

TEST_CASE("stitch composes coreference and connectives") {
    const EmbeddingTable table = EmbeddingTable::from_text("1 2\nunused 9.0 9.0\n");
    const std::vector<ConnectiveInstance> bank{{"then", {0.0, 0.0}, ""}};
    const GenderLexicon lex = test_gender();

    SUBCASE("single sentence passes through") {
        const CaptionDoc doc = doc_of({"A woman stands."});
        const CaptionDoc out = stitch(doc, lex, table, bank);
        CHECK(out.stitched == "A woman stands.");
    }
    SUBCASE("worked example with a single-instance bank") {
        const CaptionDoc doc =
            doc_of({"A man is with a plate.", "A man is sitting with a plate."});
        const CaptionDoc out = stitch(doc, lex, table, bank);
        CHECK(out.stitched == "A man is with a plate. Then, he is sitting with it.");
    }
    SUBCASE("deterministic across runs") {
        const CaptionDoc doc =
            doc_of({"A man is with a plate.", "A man is sitting with a plate."});
        const CaptionDoc a = stitch(doc, lex, table, bank);
        const CaptionDoc b = stitch(doc, lex, table, bank);
        CHECK(a.stitched == b.stitched);
    }
    SUBCASE("sentence count is preserved") {
        const CaptionDoc doc = doc_of({"A man sits.", "A man eats.", "A woman stands."});
        const CaptionDoc out = stitch(doc, lex, table, bank);
        CHECK(out.sentences.size() == 3);
    }
}

TEST_CASE("gender lexicon rejects conflicting genders") {
    GenderLexicon lex;
    lex.add("doctor", "male");
    CHECK_THROWS_AS(lex.add("doctor", "female"), InputError);
    CHECK_THROWS_AS(GenderLexicon::from_text("x\tmale\nx\tfemale\n"), InputError);
    CHECK_THROWS_AS(GenderLexicon::from_text("x\tgreen\n"), InputError);
    const GenderLexicon ok = GenderLexicon::from_text("man\tmale\npeople\tplural\n");
    CHECK(ok.gender("man") == Gender::Male);
    CHECK(ok.is_plural_override("people"));
    CHECK_FALSE(ok.gender("nothing").has_value());
}

TEST_CASE("lemmatizer applies suffix rules and exceptions") {
    Lemmatizer lem;
    CHECK(lem.lemma("dogs", "NNS") == "dog");
    CHECK(lem.lemma("plates", "NNS") == "plate");
    CHECK(lem.lemma("ladies", "NNS") == "lady");
    CHECK(lem.lemma("boxes", "NNS") == "box");
    CHECK(lem.lemma("dishes", "NNS") == "dish");
    CHECK(lem.lemma("glasses", "NNS") == "glass");
    CHECK(lem.lemma("potatoes", "NNS") == "potato");
    CHECK(lem.lemma("bus", "NN") == "bus");
    // Non-plural tags pass through: "watches" as a verb stays put.
    CHECK(lem.lemma("watches", "VBZ") == "watches");
    CHECK(lem.lemma("watches", "NNS") == "watch");

    const Lemmatizer with_exceptions =
        Lemmatizer::from_text("men\tman\nshoes\tshoe\nchildren\tchild\n");
    CHECK(with_exceptions.lemma("men", "NNS") == "man");
    CHECK(with_exceptions.lemma("shoes", "NNS") == "shoe");
    CHECK(with_exceptions.lemma("children", "NNPS") == "child");
    CHECK(with_exceptions.lemma("dogs", "NNS") == "dog");
}

TEST_CASE("embedding table loader validates its format") {
    CHECK_THROWS_AS(EmbeddingTable::from_text(""), InputError);
    CHECK_THROWS_AS(EmbeddingTable::from_text("nonsense header\n"), InputError);
    CHECK_THROWS_AS(EmbeddingTable::from_text("1 2\nword 1.0\n"), InputError);
    CHECK_THROWS_AS(EmbeddingTable::from_text("1 2\nword 1.0 nan\n"), InputError);
    const EmbeddingTable table = EmbeddingTable::from_text("2 3\nCat 1 2 3\ndog 4 5 6\n");
    CHECK(table.dim() == 3);
    REQUIRE(table.lookup("cat") != nullptr);  // lowercased on load
    CHECK((*table.lookup("CAT"))[2] == 3.0);
    CHECK(table.lookup("bird") == nullptr);
}

TEST_CASE("tokenizer and tag heuristics") {
    const auto tokens = tokenize("A man, with 3 dogs.");
    const std::vector<std::string> expected{"A", "man", ",", "with", "3", "dogs", "."};
    CHECK(tokens == expected);
    CHECK(detokenize(expected) == "A man, with 3 dogs.");

    const TagLexicon lex = test_tags();
    CHECK(lex.tag_token("man", false) == "NN");
    CHECK(lex.tag_token("3", false) == "CD");
    CHECK(lex.tag_token("two", false) == "CD");
    CHECK(lex.tag_token("running", false) == "VBG");
    CHECK(lex.tag_token("Paris", false) == "NNP");
    CHECK(lex.tag_token("Paris", true) == "NN");  // sentence-initial: no signal
    CHECK(lex.tag_token(".", false) == ".");
    CHECK(lex.tag_token("with", false) == "IN");
    CHECK(lex.tag_token("unknownword", false) == "NN");
}

TEST_CASE("caption files parse and validate") {
    const std::string text = R"({"video_id": "vid1", "captions": [
        {"segment_index": 1, "text": "A man eats."},
        {"segment_index": 0, "text": "A man sits."}]})";
    const CaptionFile file = captions_from_json(text);
    CHECK(file.video_id == "vid1");
    REQUIRE(file.captions.size() == 2);
    CHECK(file.captions[0].first == 0);  // sorted by segment index

    const CaptionDoc doc = make_caption_doc(file, test_tags());
    CHECK(doc.sentences.size() == 2);
    CHECK(detokenize(doc.sentences[0]) == "A man sits.");

    CHECK_THROWS_AS(captions_from_json("{}"), InputError);
    CHECK_THROWS_AS(captions_from_json(
                        R"({"video_id": "v", "captions": [{"segment_index": 0, "text": "a"},
                            {"segment_index": 0, "text": "b"}]})"),
                    InputError);
    const CaptionFile empty = captions_from_json(R"({"video_id": "v", "captions": []})");
    CHECK_THROWS_AS(make_caption_doc(empty, test_tags()), InputError);
}
