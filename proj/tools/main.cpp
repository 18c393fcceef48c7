#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "storycap/errors.hpp"
#include "storycap/pipeline.hpp"

namespace {

using storycap::pipeline::PipelineConfig;

void print_error_json(const std::string& message, int code) {
    nlohmann::json j{{"error", message}, {"code", code}};
    std::cerr << j.dump() << "\n";
}

void add_window_options(CLI::App* cmd, PipelineConfig& cfg) {
    cmd->add_option("--scores", cfg.window_scores_csv,
                    "Window-score CSV (video_id,start,end,class,score)");
    cmd->add_option("--descriptors", cfg.descriptors_dir,
                    "Directory of per-video descriptor JSONL files");
    cmd->add_option("--video-lengths", cfg.video_lengths_json,
                    "Optional JSON {video_id: frames} for the CSV path");
    cmd->add_option("--pca", cfg.pca_model, "PCA model JSON");
    cmd->add_option("--gmm", cfg.gmm_model, "GMM model JSON");
    cmd->add_option("--ovr", cfg.ovr_model, "One-vs-rest classifier JSON");
    cmd->add_option("--lengths", cfg.windows.lengths, "Window lengths in frames");
    cmd->add_option("--stride", cfg.windows.stride, "Window stride in frames");
    cmd->add_option("--nms-iou", cfg.windows.nms_iou, "NMS IoU threshold");
    cmd->add_flag("--cross-class-nms", cfg.windows.cross_class_nms,
                  "Suppress across classes instead of per class");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Story-like video captions: temporal segmentation, caption "
                 "stitching and evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file; flags override");

    PipelineConfig cfg;
    double threshold = 0.0;

    app.add_option("--profile", cfg.profile,
                   "Dataset profile: montreal, mpii, longform or custom")
        ->default_str("custom");
    auto* threshold_opt =
        app.add_option("--threshold", threshold, "Score threshold override");
    app.add_option("--seed", cfg.seed, "Random seed");
    app.add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* segment = app.add_subcommand("segment", "Localize actions and emit segments");
    add_window_options(segment, cfg);
    segment->add_option("--out", cfg.out_dir, "Output directory")->required();

    auto* bank = app.add_subcommand("build-bank", "Mine connective instances from a corpus");
    bank->add_option("--corpus", cfg.corpus_path, "Tagged sentence-pair corpus")->required();
    bank->add_option("--grammar", cfg.grammar_path, "CNF grammar file")->required();
    bank->add_option("--embeddings", cfg.embeddings_path, "Word embedding table")->required();
    bank->add_option("--cap", cfg.bank_cap, "Maximum instances to keep");
    bank->add_flag("--strict-grammar", cfg.strict_grammar,
                   "Reject grammars whose per-LHS probabilities sum above 1");
    bank->add_option("--out", cfg.out_dir, "Output directory")->required();

    auto* stitch = app.add_subcommand("stitch", "Stitch per-segment captions per video");
    stitch->add_option("--segments", cfg.segments_dir, "Directory of segment JSON files")
        ->required();
    stitch->add_option("--captions", cfg.captions_dir, "Directory of caption JSON files")
        ->required();
    stitch->add_option("--bank", cfg.bank_path, "Connective bank JSON")->required();
    stitch->add_option("--embeddings", cfg.embeddings_path, "Word embedding table")->required();
    stitch->add_option("--gender", cfg.gender_lexicon_path, "Gender lexicon TSV")->required();
    stitch->add_option("--lemma-exceptions", cfg.lemma_exceptions_path,
                       "Lemma exception table TSV");
    stitch->add_option("--tags", cfg.tag_lexicon_path, "POS tag lexicon TSV");
    stitch->add_flag("--pass-through", cfg.pass_through_missing,
                     "Stitch the available captions when some segments lack one");
    stitch->add_option("--out", cfg.out_dir, "Output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score stitched captions against references");
    evaluate->add_option("--captions", cfg.captions_dir, "Directory of stitched caption JSON")
        ->required();
    evaluate->add_option("--references", cfg.references_path, "References JSON")->required();
    evaluate->add_option("--baseline", cfg.baseline_dir,
                         "Optional directory of baseline captions for a comparison row");
    evaluate->add_option("--out", cfg.out_dir, "Output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Average segments per video across thresholds");
    add_window_options(sweep, cfg);
    sweep->add_option("--thresholds", cfg.sweep_list,
                      "Thresholds to sweep (default -1.0 .. -0.1 step 0.1)");
    sweep->add_option("--out", cfg.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error_json(e.what(), 2);
        return 2;
    }

    if (threshold_opt->count() > 0) cfg.score_threshold = threshold;

    try {
        if (segment->parsed()) storycap::pipeline::cmd_segment(cfg, std::cout);
        else if (bank->parsed()) storycap::pipeline::cmd_build_bank(cfg, std::cout);
        else if (stitch->parsed()) storycap::pipeline::cmd_stitch(cfg, std::cout);
        else if (evaluate->parsed()) storycap::pipeline::cmd_evaluate(cfg, std::cout);
        else if (sweep->parsed()) storycap::pipeline::cmd_sweep(cfg, std::cout);
    } catch (const storycap::InputError& e) {
        print_error_json(e.what(), 2);
        return 2;
    } catch (const std::exception& e) {
        print_error_json(e.what(), 1);
        return 1;
    }
    return 0;
}
