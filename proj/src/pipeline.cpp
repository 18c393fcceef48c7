#include "storycap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "storycap/encoding.hpp"
#include "storycap/errors.hpp"
#include "storycap/grammar.hpp"
#include "storycap/metrics.hpp"
#include "storycap/stitching.hpp"

namespace storycap::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<double> profile_default_threshold(const std::string& profile) {
    if (profile == "montreal") return -0.5;
    if (profile == "mpii") return -1.0;
    if (profile == "longform") return -0.1;
    if (profile == "custom") return std::nullopt;
    throw InputError("unknown profile '" + profile +
                     "' (expected montreal, mpii, longform or custom)");
}

double PipelineConfig::resolved_threshold() const {
    if (score_threshold) return *score_threshold;
    const auto def = profile_default_threshold(profile);
    if (!def)
        throw InputError("profile 'custom' needs an explicit score threshold");
    return *def;
}

std::uint64_t fnv1a(const void* data, size_t size) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 14695981039346656037ULL;
    for (size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

std::uint64_t fnv1a_file(const std::string& path) {
    const std::string data = read_file(path);
    return fnv1a(data.data(), data.size());
}

namespace {

std::string hex64(std::uint64_t value) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf);
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

// Regular files of a directory, sorted by filename for determinism.
std::vector<fs::path> list_files(const std::string& dir, const std::string& what) {
    if (!fs::is_directory(dir)) throw InputError(what + ": not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError(what + ": directory is empty: " + dir);
    return files;
}

// Runs fn(0..count-1) on a bounded pool. Workers only compute; callers
// write results from slot-indexed storage afterwards, so output never
// depends on the thread count.
void parallel_for(size_t count, int threads, const std::function<void(size_t)>& fn) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (workers == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::map<std::string, std::string> resolved_settings(const std::string& command,
                                                     const PipelineConfig& cfg) {
    std::map<std::string, std::string> r;
    r["profile"] = cfg.profile;
    r["seed"] = std::to_string(cfg.seed);
    r["threads"] = std::to_string(cfg.threads);
    if (command == "segment" || command == "sweep") {
        r["score_threshold"] = format_double(cfg.resolved_threshold());
        r["nms_iou"] = format_double(cfg.windows.nms_iou);
        r["stride"] = std::to_string(cfg.windows.stride);
        std::string lengths;
        for (int len : cfg.windows.lengths) {
            if (!lengths.empty()) lengths += ",";
            lengths += std::to_string(len);
        }
        r["window_lengths"] = lengths;
        r["cross_class_nms"] = cfg.windows.cross_class_nms ? "true" : "false";
    }
    if (command == "build-bank") r["bank_cap"] = std::to_string(cfg.bank_cap);
    if (command == "stitch")
        r["on_missing_caption"] = cfg.pass_through_missing ? "pass-through" : "skip";
    return r;
}

}  // namespace

std::string RunManifest::to_json() const {
    json j;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["resolved"] = resolved;
    j["inputs"] = input_digests;
    j["created_utc"] = created_utc;
    return j.dump(2) + "\n";
}

RunManifest build_manifest(const std::string& command, const PipelineConfig& cfg,
                           const std::vector<std::string>& input_paths) {
    RunManifest m;
    m.command = command;
    m.resolved = resolved_settings(command, cfg);
    m.created_utc = utc_now();

    std::string canonical = "command=" + command + "\n";
    for (const auto& [key, value] : m.resolved) canonical += key + "=" + value + "\n";
    m.config_hash = hex64(fnv1a(canonical.data(), canonical.size()));

    for (const std::string& path : input_paths) {
        if (path.empty()) continue;
        if (fs::is_directory(path)) {
            for (const auto& file : list_files(path, "manifest"))
                m.input_digests[file.string()] = hex64(fnv1a_file(file.string()));
        } else {
            m.input_digests[path] = hex64(fnv1a_file(path));
        }
    }
    return m;
}

// --- segment / sweep -------------------------------------------------------

namespace {

struct VideoWindows {
    std::string video_id;
    std::vector<localization::ActionWindow> windows;  // NMS already applied
    int video_length = 0;
};

// Loads windows either from the score CSV (bypass) or by running the full
// encoding stack over descriptor files, then applies NMS once. The score
// threshold is applied later so sweeps can reuse this work.
std::vector<VideoWindows> gather_windows(const PipelineConfig& cfg) {
    cfg.windows.validate();
    const bool have_csv = !cfg.window_scores_csv.empty();
    const bool have_desc = !cfg.descriptors_dir.empty();
    if (have_csv == have_desc)
        throw InputError("segment: provide exactly one of window scores CSV or descriptors dir");

    std::vector<VideoWindows> videos;

    if (have_csv) {
        auto by_video = localization::load_window_scores_csv(read_file(cfg.window_scores_csv));
        if (by_video.empty())
            throw InputError("segment: no windows in " + cfg.window_scores_csv);

        std::map<std::string, int> lengths;
        if (!cfg.video_lengths_json.empty()) {
            json j = json::parse(read_file(cfg.video_lengths_json), nullptr, false);
            if (j.is_discarded() || !j.is_object())
                throw InputError("video lengths file: expected a JSON object");
            for (const auto& [id, len] : j.items()) lengths[id] = len.get<int>();
        }
        for (auto& [id, windows] : by_video) {
            VideoWindows v;
            v.video_id = id;
            int max_end = 0;
            for (const auto& w : windows) max_end = std::max(max_end, w.end_frame);
            // Without an explicit length the windows' extent stands in.
            v.video_length = lengths.count(id) ? lengths.at(id) : max_end;
            if (v.video_length < max_end)
                throw InputError("segment: video '" + id + "' has windows past its length");
            v.windows = localization::temporal_nms(windows, cfg.windows.nms_iou,
                                                   !cfg.windows.cross_class_nms);
            videos.push_back(std::move(v));
        }
        return videos;
    }

    const auto files = list_files(cfg.descriptors_dir, "segment");
    if (cfg.pca_model.empty() || cfg.gmm_model.empty() || cfg.ovr_model.empty())
        throw InputError("segment: descriptor input needs --pca, --gmm and --ovr model files");
    const auto pca = encoding::pca_from_json(read_file(cfg.pca_model));
    const auto gmm = encoding::gmm_from_json(read_file(cfg.gmm_model));
    const auto ovr = encoding::ovr_from_json(read_file(cfg.ovr_model));
    if (gmm.dim() != pca.d_pca())
        throw InputError("segment: gmm dimension " + std::to_string(gmm.dim()) +
                         " does not match pca output dimension " + std::to_string(pca.d_pca()));
    if (ovr.dim() != 2 * gmm.component_count() * gmm.dim())
        throw InputError("segment: ovr model dimension " + std::to_string(ovr.dim()) +
                         " does not match fisher vector dimension " +
                         std::to_string(2 * gmm.component_count() * gmm.dim()));

    videos.resize(files.size());
    parallel_for(files.size(), cfg.threads, [&](size_t i) {
        const std::string video_id = files[i].stem().string();
        const auto seq = encoding::load_descriptor_jsonl(read_file(files[i].string()), video_id);
        if (seq.frames.empty())
            throw InputError("segment: descriptor file has no frames: " + files[i].string());
        if (seq.dim() != pca.d_raw())
            throw InputError("segment: " + video_id + " descriptors have dimension " +
                             std::to_string(seq.dim()) + ", pca expects " +
                             std::to_string(pca.d_raw()));

        std::vector<std::vector<double>> reduced(seq.frames.size());
        for (size_t f = 0; f < seq.frames.size(); ++f)
            reduced[f] = pca.transform(seq.frames[f].descriptor);

        VideoWindows v;
        v.video_id = video_id;
        v.video_length = seq.length();
        std::vector<localization::ActionWindow> scored;
        for (const auto& [start, end] : localization::generate_windows(v.video_length,
                                                                       cfg.windows)) {
            std::vector<std::vector<double>> inside;
            for (size_t f = 0; f < seq.frames.size(); ++f) {
                const int frame = seq.frames[f].frame_index;
                if (frame >= start && frame < end) inside.push_back(reduced[f]);
            }
            if (inside.empty()) continue;
            const auto fv = encoding::power_l2_normalize(encoding::fisher_encode(inside, gmm));
            const auto scores = encoding::score_ovr(ovr, fv);
            size_t best = 0;
            for (size_t c = 1; c < scores.size(); ++c)
                if (scores[c].second > scores[best].second) best = c;
            scored.push_back({start, end, scores[best].first, scores[best].second});
        }
        v.windows =
            localization::temporal_nms(scored, cfg.windows.nms_iou, !cfg.windows.cross_class_nms);
        videos[i] = std::move(v);
    });
    return videos;
}

}  // namespace

void cmd_segment(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.out_dir.empty()) throw InputError("segment: no output directory");
    const auto videos = gather_windows(cfg);

    localization::SlidingWindowConfig swc = cfg.windows;
    swc.score_threshold = cfg.resolved_threshold();

    std::vector<localization::SegmentationResult> results(videos.size());
    parallel_for(videos.size(), cfg.threads, [&](size_t i) {
        results[i] = localization::segment_video(videos[i].windows, swc,
                                                 videos[i].video_length, videos[i].video_id);
    });

    double total_segments = 0.0, total_zero_convention = 0.0;
    for (size_t i = 0; i < results.size(); ++i) {
        write_file((fs::path(cfg.out_dir) / (results[i].video_id + ".segments.json")).string(),
                   localization::segmentation_to_json(results[i]));
        total_segments += static_cast<double>(results[i].segments.size());
        if (!results[i].fallback_used)
            total_zero_convention += static_cast<double>(results[i].segments.size());
    }

    json summary{{"videos", results.size()},
                 {"avg_segments", total_segments / static_cast<double>(results.size())},
                 {"avg_segments_zero_on_fallback",
                  total_zero_convention / static_cast<double>(results.size())},
                 {"score_threshold", swc.score_threshold}};
    write_file((fs::path(cfg.out_dir) / "summary.json").string(), summary.dump(2) + "\n");

    const auto manifest = build_manifest(
        "segment", cfg,
        {cfg.window_scores_csv, cfg.descriptors_dir, cfg.video_lengths_json, cfg.pca_model,
         cfg.gmm_model, cfg.ovr_model});
    write_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest.to_json());

    log << "segment: " << results.size() << " videos, avg "
        << summary["avg_segments"].get<double>() << " segments/video (threshold "
        << swc.score_threshold << ")\n";
}

void cmd_sweep(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.out_dir.empty()) throw InputError("sweep: no output directory");
    const auto videos = gather_windows(cfg);

    std::vector<double> thresholds = cfg.sweep_list;
    if (thresholds.empty())
        for (int i = 10; i >= 1; --i) thresholds.push_back(-(i / 10.0));

    std::map<double, std::vector<localization::SegmentationResult>> per_threshold;
    for (double threshold : thresholds) {
        localization::SlidingWindowConfig swc = cfg.windows;
        swc.score_threshold = threshold;
        std::vector<localization::SegmentationResult> results(videos.size());
        parallel_for(videos.size(), cfg.threads, [&](size_t i) {
            results[i] = localization::segment_video(videos[i].windows, swc,
                                                     videos[i].video_length,
                                                     videos[i].video_id);
        });
        per_threshold[threshold] = std::move(results);
    }

    const auto report = localization::sweep_thresholds(per_threshold);
    write_file((fs::path(cfg.out_dir) / "sweep.csv").string(), localization::sweep_to_csv(report));
    write_file((fs::path(cfg.out_dir) / "sweep.svg").string(), localization::sweep_to_svg(report));

    const auto manifest = build_manifest(
        "sweep", cfg, {cfg.window_scores_csv, cfg.descriptors_dir, cfg.video_lengths_json,
                       cfg.pca_model, cfg.gmm_model, cfg.ovr_model});
    write_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest.to_json());

    log << "sweep: " << videos.size() << " videos over " << report.points.size()
        << " thresholds\n";
}

// --- build-bank --------------------------------------------------------------

void cmd_build_bank(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.out_dir.empty()) throw InputError("build-bank: no output directory");
    if (cfg.corpus_path.empty() || cfg.grammar_path.empty() || cfg.embeddings_path.empty())
        throw InputError("build-bank: needs --corpus, --grammar and --embeddings");

    const auto pairs = grammar::load_tagged_pairs(read_file(cfg.corpus_path));
    std::vector<std::string> warnings;
    const auto pcfg =
        grammar::load_grammar(read_file(cfg.grammar_path), cfg.strict_grammar, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << "\n";
    const auto table = stitching::EmbeddingTable::from_text(read_file(cfg.embeddings_path));

    const auto bank = grammar::build_connective_bank(
        pairs, pcfg,
        [&](const std::vector<std::string>& words) {
            return stitching::embed_sentence(words, table);
        },
        cfg.bank_cap);

    write_file((fs::path(cfg.out_dir) / "bank.json").string(), bank_to_json(bank));
    const auto manifest = build_manifest(
        "build-bank", cfg, {cfg.corpus_path, cfg.grammar_path, cfg.embeddings_path});
    write_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest.to_json());

    log << "build-bank: " << bank.size() << " instances from " << pairs.size()
        << " pairs (cap " << cfg.bank_cap << ")\n";
}

// --- stitch --------------------------------------------------------------------

void cmd_stitch(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.out_dir.empty()) throw InputError("stitch: no output directory");
    if (cfg.segments_dir.empty() || cfg.captions_dir.empty() || cfg.bank_path.empty() ||
        cfg.embeddings_path.empty() || cfg.gender_lexicon_path.empty())
        throw InputError(
            "stitch: needs --segments, --captions, --bank, --embeddings and --gender");

    const auto bank = bank_from_json(read_file(cfg.bank_path));
    if (bank.empty()) throw InputError("stitch: bank is empty: " + cfg.bank_path);
    const auto table = stitching::EmbeddingTable::from_text(read_file(cfg.embeddings_path));
    const auto gender = stitching::GenderLexicon::from_text(read_file(cfg.gender_lexicon_path));
    stitching::Lemmatizer lemmatizer;
    if (!cfg.lemma_exceptions_path.empty())
        lemmatizer = stitching::Lemmatizer::from_text(read_file(cfg.lemma_exceptions_path));
    stitching::TagLexicon tags;
    if (!cfg.tag_lexicon_path.empty())
        tags = stitching::TagLexicon::from_text(read_file(cfg.tag_lexicon_path));

    std::map<std::string, size_t> segment_counts;
    for (const auto& file : list_files(cfg.segments_dir, "stitch")) {
        if (file.filename().string() == "manifest.json" ||
            file.filename().string() == "summary.json")
            continue;
        const auto seg = localization::segmentation_from_json(read_file(file.string()));
        segment_counts[seg.video_id] = seg.segments.size();
    }
    if (segment_counts.empty()) throw InputError("stitch: no segment files found");

    std::map<std::string, stitching::CaptionFile> caption_files;
    for (const auto& file : list_files(cfg.captions_dir, "stitch")) {
        auto parsed = stitching::captions_from_json(read_file(file.string()));
        if (caption_files.count(parsed.video_id))
            throw InputError("stitch: duplicate captions for video '" + parsed.video_id + "'");
        caption_files.emplace(parsed.video_id, std::move(parsed));
    }

    struct Item {
        std::string video_id;
        stitching::CaptionDoc doc;
        bool skipped = false;
        std::string warning;
    };
    std::vector<Item> items;
    for (const auto& [video_id, count] : segment_counts) {
        Item item;
        item.video_id = video_id;
        auto it = caption_files.find(video_id);
        if (it == caption_files.end()) {
            item.skipped = true;
            item.warning = "no captions file";
            items.push_back(std::move(item));
            continue;
        }
        bool mismatch = it->second.captions.size() != count;
        for (const auto& [index, text] : it->second.captions)
            if (index < 0 || static_cast<size_t>(index) >= count) mismatch = true;
        if (mismatch && !cfg.pass_through_missing) {
            item.skipped = true;
            item.warning = "captions cover " + std::to_string(it->second.captions.size()) +
                           " of " + std::to_string(count) + " segments";
            items.push_back(std::move(item));
            continue;
        }
        item.doc = stitching::make_caption_doc(it->second, tags);
        items.push_back(std::move(item));
    }

    parallel_for(items.size(), cfg.threads, [&](size_t i) {
        if (items[i].skipped) return;
        items[i].doc = stitching::stitch(items[i].doc, gender, table, bank, lemmatizer);
    });

    size_t stitched_count = 0;
    double total_tokens = 0.0;
    for (const auto& item : items) {
        if (item.skipped) {
            log << "warning: skipping video '" << item.video_id << "': " << item.warning
                << "\n";
            continue;
        }
        json j{{"video_id", item.video_id}, {"stitched", item.doc.stitched}};
        write_file((fs::path(cfg.out_dir) / (item.video_id + ".stitched.json")).string(),
                   j.dump(2) + "\n");
        total_tokens += static_cast<double>(tokenize(item.doc.stitched).size());
        ++stitched_count;
    }
    if (stitched_count == 0) throw InputError("stitch: nothing stitched");

    json summary{{"videos", stitched_count},
                 {"avg_caption_length", total_tokens / static_cast<double>(stitched_count)}};
    write_file((fs::path(cfg.out_dir) / "summary.json").string(), summary.dump(2) + "\n");

    const auto manifest = build_manifest(
        "stitch", cfg,
        {cfg.segments_dir, cfg.captions_dir, cfg.bank_path, cfg.embeddings_path,
         cfg.gender_lexicon_path, cfg.lemma_exceptions_path, cfg.tag_lexicon_path});
    write_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest.to_json());

    log << "stitch: " << stitched_count << " videos, avg caption length "
        << summary["avg_caption_length"].get<double>() << " tokens\n";
}

// --- evaluate ---------------------------------------------------------------------

namespace {

std::map<std::string, std::string> load_stitched_dir(const std::string& dir,
                                                     const std::string& what) {
    std::map<std::string, std::string> out;
    for (const auto& file : list_files(dir, what)) {
        const std::string name = file.filename().string();
        if (name == "manifest.json" || name == "summary.json") continue;
        json j = json::parse(read_file(file.string()), nullptr, false);
        if (j.is_discarded())
            throw InputError(what + ": invalid JSON: " + file.string());
        if (!j.contains("video_id") || !j.contains("stitched"))
            throw InputError(what + ": " + file.string() +
                             " needs 'video_id' and 'stitched' fields");
        out[j["video_id"].get<std::string>()] = j["stitched"].get<std::string>();
    }
    if (out.empty()) throw InputError(what + ": no stitched captions in " + dir);
    return out;
}

}  // namespace

void cmd_evaluate(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.out_dir.empty()) throw InputError("evaluate: no output directory");
    if (cfg.captions_dir.empty() || cfg.references_path.empty())
        throw InputError("evaluate: needs --captions and --references");

    const auto hypotheses = load_stitched_dir(cfg.captions_dir, "evaluate");
    const auto references = metrics::references_from_json(read_file(cfg.references_path));
    const auto report = metrics::evaluate_corpus(hypotheses, references);

    std::optional<metrics::EvaluationReport> baseline;
    if (!cfg.baseline_dir.empty()) {
        const auto base_hyps = load_stitched_dir(cfg.baseline_dir, "evaluate baseline");
        baseline = metrics::evaluate_corpus(base_hyps, references);
    }

    write_file((fs::path(cfg.out_dir) / "report.json").string(),
               metrics::report_to_json(report, baseline ? &*baseline : nullptr));
    write_file((fs::path(cfg.out_dir) / "report.txt").string(),
               metrics::report_to_table(report, baseline ? &*baseline : nullptr));

    const auto manifest = build_manifest(
        "evaluate", cfg, {cfg.captions_dir, cfg.references_path, cfg.baseline_dir});
    write_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest.to_json());

    log << "evaluate: " << report.per_video.size() << " videos, BLEU-4 " << report.bleu4
        << ", CIDEr " << report.cider << ", METEOR " << report.meteor_lite << "\n";
}

}  // namespace storycap::pipeline
