#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "storycap/localization.hpp"

namespace storycap::pipeline {

inline constexpr const char* kToolName = "storycap";
inline constexpr const char* kToolVersion = "0.1.0";

// Dataset profiles select the score-threshold default: montreal -0.5,
// mpii -1.0, longform -0.1. The custom profile requires an explicit
// threshold.
std::optional<double> profile_default_threshold(const std::string& profile);

struct PipelineConfig {
    std::string profile = "custom";
    std::optional<double> score_threshold;
    localization::SlidingWindowConfig windows;  // score_threshold resolved separately

    // segment / sweep inputs: exactly one of the two sources
    std::string window_scores_csv;
    std::string descriptors_dir;
    std::string video_lengths_json;  // optional {id: frames} for the CSV path
    std::string pca_model, gmm_model, ovr_model;
    bool pca_whiten = false;

    // bank building
    std::string corpus_path, grammar_path;
    int bank_cap = 500;
    bool strict_grammar = false;

    // stitching
    std::string segments_dir, captions_dir, bank_path;
    std::string embeddings_path, gender_lexicon_path, lemma_exceptions_path, tag_lexicon_path;
    bool pass_through_missing = false;

    // evaluation
    std::string references_path, baseline_dir;

    std::vector<double> sweep_list;  // empty -> -1.0 .. -0.1 step 0.1

    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 1;

    double resolved_threshold() const;
};

std::uint64_t fnv1a(const void* data, size_t size);
std::uint64_t fnv1a_file(const std::string& path);

// Run record written next to every command's outputs. Identical manifests
// (up to the timestamp) imply identical outputs.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::map<std::string, std::string> input_digests;
    std::map<std::string, std::string> resolved;  // profile, threshold, seed, ...
    std::string created_utc;

    std::string to_json() const;
};

RunManifest build_manifest(const std::string& command, const PipelineConfig& cfg,
                           const std::vector<std::string>& input_paths);

// Subcommands. Each writes its outputs plus manifest.json under
// cfg.out_dir, logs one summary line to `log`, and throws InputError on
// bad input.
void cmd_segment(const PipelineConfig& cfg, std::ostream& log);
void cmd_build_bank(const PipelineConfig& cfg, std::ostream& log);
void cmd_stitch(const PipelineConfig& cfg, std::ostream& log);
void cmd_evaluate(const PipelineConfig& cfg, std::ostream& log);
void cmd_sweep(const PipelineConfig& cfg, std::ostream& log);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace storycap::pipeline
