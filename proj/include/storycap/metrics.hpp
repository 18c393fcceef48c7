#pragma once

#include <map>
#include <string>
#include <vector>

namespace storycap::metrics {

using Tokens = std::vector<std::string>;

// Corpus-level BLEU-4: geometric mean of clipped n-gram precisions for
// n = 1..4 with the brevity penalty, no smoothing — any zero precision
// zeroes the score. Inputs are lowercased here so casing cannot matter.
// Throws InputError when the hypothesis set is empty or a hypothesis has
// no references.
double bleu4(const std::vector<Tokens>& hypotheses,
             const std::vector<std::vector<Tokens>>& references);

// Plain CIDEr (no length penalty): per video, the mean over n = 1..4 of the
// average cosine similarity between TF-IDF n-gram vectors of hypothesis and
// references, scaled by 10; corpus score is the mean over videos. Document
// frequencies come from the reference sets of this evaluation run, so a
// single-video corpus degenerates to IDF 0 and score 0.
double cider(const std::vector<Tokens>& hypotheses,
             const std::vector<std::vector<Tokens>>& references);

// Simplified METEOR: greedy position-monotone unigram alignment by exact
// match then Porter-stem match; F-mean 10PR/(R+9P); chunk penalty
// 0.5*(chunks/matches)^3; best score over the references.
double meteor_lite(const Tokens& hypothesis, const std::vector<Tokens>& references);

// Porter's suffix-stripping stemmer (the 1980 algorithm).
std::string porter_stem(const std::string& word);

struct EvaluationReport {
    struct Row {
        std::string video_id;
        double bleu4 = 0.0;
        double cider = 0.0;
        double meteor_lite = 0.0;
    };
    std::vector<Row> per_video;  // sorted by video id
    double bleu4 = 0.0;          // corpus-level
    double cider = 0.0;          // mean over videos
    double meteor_lite = 0.0;    // mean over videos
};

// Scores every video and the corpus. Hypotheses and references must cover
// exactly the same video ids; a mismatch names the missing id. Per-video
// BLEU rows are single-pair corpus scores; CIDEr rows share the corpus
// document frequencies.
EvaluationReport evaluate_corpus(const std::map<std::string, std::string>& hypotheses,
                                 const std::map<std::string, std::vector<std::string>>& references);

std::string report_to_json(const EvaluationReport& ours, const EvaluationReport* baseline);
// Aligned text table, columns BLEU-4, CIDEr, METEOR; one row per model.
std::string report_to_table(const EvaluationReport& ours, const EvaluationReport* baseline);

// References file: {"video-id": ["ref one", "ref two"], ...}
std::map<std::string, std::vector<std::string>> references_from_json(const std::string& text);

}  // namespace storycap::metrics
