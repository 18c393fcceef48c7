#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "storycap/connective_bank.hpp"
#include "storycap/errors.hpp"
#include "storycap/pipeline.hpp"
#include "test_util.hpp"

using namespace storycap;
using namespace storycap::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("storycap_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

json read_json(const std::string& path) { return json::parse(read_file(path)); }

PipelineConfig segment_config(const std::string& out) {
    PipelineConfig cfg;
    cfg.profile = "montreal";
    cfg.window_scores_csv = testutil::fixture_path("windows.csv");
    cfg.out_dir = out;
    return cfg;
}

PipelineConfig stitch_config(const std::string& segments, const std::string& out) {
    PipelineConfig cfg;
    cfg.segments_dir = segments;
    cfg.captions_dir = testutil::fixture_path("captions");
    cfg.bank_path = testutil::fixture_path("bank.json");
    cfg.embeddings_path = testutil::fixture_path("embeddings.txt");
    cfg.gender_lexicon_path = testutil::fixture_path("gender.tsv");
    cfg.lemma_exceptions_path = testutil::fixture_path("lemma_exceptions.tsv");
    cfg.tag_lexicon_path = testutil::fixture_path("tags.tsv");
    cfg.out_dir = out;
    return cfg;
}

int run_cli(const std::string& args, std::string* err_out = nullptr) {
    const TempDir tmp("cli_err");
    const std::string err_file = tmp.sub("stderr.txt");
    const std::string command =
        std::string(testutil::cli_path()) + " " + args + " 2>" + err_file + " >/dev/null";
    const int status = std::system(command.c_str());
    if (err_out) {
        std::ifstream in(err_file);
        std::stringstream buf;
        buf << in.rdbuf();
        *err_out = buf.str();
    }
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("profile thresholds resolve to the documented defaults") {
    CHECK(profile_default_threshold("montreal") == -0.5);
    CHECK(profile_default_threshold("mpii") == -1.0);
    CHECK(profile_default_threshold("longform") == -0.1);
    CHECK_FALSE(profile_default_threshold("custom").has_value());
    CHECK_THROWS_AS(profile_default_threshold("bogus"), InputError);

    PipelineConfig cfg;
    cfg.profile = "mpii";
    CHECK(cfg.resolved_threshold() == -1.0);
    cfg.score_threshold = -0.25;
    CHECK(cfg.resolved_threshold() == -0.25);
    cfg.score_threshold.reset();
    cfg.profile = "custom";
    CHECK_THROWS_AS(cfg.resolved_threshold(), InputError);
}

TEST_CASE("fnv1a reference values") {
    // Published FNV-1a 64-bit test vectors.
    CHECK(fnv1a("", 0) == 14695981039346656037ULL);
    CHECK(fnv1a("a", 1) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar", 6) == 0x85944171f73967e8ULL);
}

TEST_CASE("cmd_segment on the CSV fixture matches the hand-derived segments") {
    TempDir out("segment");
    std::ostringstream log;
    cmd_segment(segment_config(out.str()), log);

    // vidA: NMS drops walk [30,90) (IoU 1/3 with the 2.0-scoring [0,60)),
    // the -2.0 window falls below -0.5, leaving walk [0,60) and jump
    // [60,120) as two segments.
    const json a = read_json(out.sub("vidA.segments.json"));
    CHECK(a["video_id"] == "vidA");
    CHECK(a["fallback"] == false);
    REQUIRE(a["segments"].size() == 2);
    CHECK(a["segments"][0]["start"] == 0);
    CHECK(a["segments"][0]["end"] == 60);
    CHECK(a["segments"][0]["class"] == "walk");
    CHECK(a["segments"][0]["keyframe"] == 30);
    CHECK(a["segments"][1]["start"] == 60);
    CHECK(a["segments"][1]["end"] == 120);
    CHECK(a["segments"][1]["class"] == "jump");
    CHECK(a["segments"][1]["keyframe"] == 90);

    // vidB: both windows score below -0.5, so the whole-video fallback
    // fires with the middle keyframe.
    const json b = read_json(out.sub("vidB.segments.json"));
    CHECK(b["fallback"] == true);
    REQUIRE(b["segments"].size() == 1);
    CHECK(b["segments"][0]["start"] == 0);
    CHECK(b["segments"][0]["end"] == 100);
    CHECK(b["segments"][0]["keyframe"] == 50);

    // vidC: same-class windows [0,60) and [60,90) abut and merge.
    const json c = read_json(out.sub("vidC.segments.json"));
    CHECK(c["fallback"] == false);
    REQUIRE(c["segments"].size() == 1);
    CHECK(c["segments"][0]["start"] == 0);
    CHECK(c["segments"][0]["end"] == 90);
    CHECK(c["segments"][0]["class"] == "cook");
    CHECK(c["segments"][0]["keyframe"] == 45);

    const json summary = read_json(out.sub("summary.json"));
    CHECK(summary["videos"] == 3);
    CHECK(summary["avg_segments"].get<double>() == doctest::Approx(4.0 / 3.0));
    CHECK(summary["avg_segments_zero_on_fallback"].get<double>() == doctest::Approx(1.0));

    const json manifest = read_json(out.sub("manifest.json"));
    CHECK(manifest["command"] == "segment");
    CHECK(manifest["resolved"]["profile"] == "montreal");
    CHECK(manifest["resolved"]["score_threshold"] == "-0.5");
    CHECK(manifest["inputs"].size() == 1);

    // Golden byte comparison keeps the output format pinned.
    for (const std::string name :
         {"vidA.segments.json", "vidB.segments.json", "vidC.segments.json"}) {
        CHECK(read_file(out.sub(name)) == testutil::read_fixture("golden/" + name));
    }
}

TEST_CASE("cmd_segment over descriptors runs the encoding stack") {
    TempDir out("segment_desc");
    PipelineConfig cfg;
    cfg.profile = "custom";
    cfg.score_threshold = 0.0;
    cfg.descriptors_dir = testutil::fixture_path("descriptors");
    cfg.pca_model = testutil::fixture_path("models/pca.json");
    cfg.gmm_model = testutil::fixture_path("models/gmm.json");
    cfg.ovr_model = testutil::fixture_path("models/ovr.json");
    cfg.out_dir = out.str();
    std::ostringstream log;
    cmd_segment(cfg, log);

    // Constant descriptors at (5,0,0,0) project to (5,0), score positive for
    // every window, and all surviving windows merge into one video-spanning
    // "pos" segment.
    const json d = read_json(out.sub("vidD.segments.json"));
    CHECK(d["fallback"] == false);
    REQUIRE(d["segments"].size() == 1);
    CHECK(d["segments"][0]["start"] == 0);
    CHECK(d["segments"][0]["end"] == 120);
    CHECK(d["segments"][0]["class"] == "pos");
    CHECK(d["segments"][0]["keyframe"] == 60);
}

TEST_CASE("cmd_segment input validation") {
    TempDir out("segment_bad");
    PipelineConfig cfg;
    cfg.out_dir = out.str();
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_segment(cfg, log), InputError);  // no source

    cfg.window_scores_csv = testutil::fixture_path("windows.csv");
    cfg.descriptors_dir = testutil::fixture_path("descriptors");
    CHECK_THROWS_AS(cmd_segment(cfg, log), InputError);  // both sources

    TempDir empty("segment_empty");
    cfg.window_scores_csv.clear();
    cfg.descriptors_dir = empty.str();
    cfg.profile = "montreal";
    CHECK_THROWS_AS(cmd_segment(cfg, log), InputError);  // empty dir
}

TEST_CASE("cmd_build_bank mines the fixture corpus") {
    TempDir out("bank");
    PipelineConfig cfg;
    cfg.corpus_path = testutil::fixture_path("corpus.tsv");
    cfg.grammar_path = testutil::fixture_path("grammar.txt");
    cfg.embeddings_path = testutil::fixture_path("embeddings.txt");
    cfg.out_dir = out.str();
    std::ostringstream log;
    cmd_build_bank(cfg, log);

    const auto bank = bank_from_json(read_file(out.sub("bank.json")));
    REQUIRE(bank.size() == 4);
    CHECK(bank[0].connective == "then");
    CHECK(bank[1].connective == "later");
    CHECK(bank[2].connective == "next");
    CHECK(bank[3].connective == "happy");
    // Pair 1 embedding: cat appears twice (1,0,0,0), sleeps twice
    // (0.5,0,0,0), 4 in-vocabulary tokens in total.
    CHECK(bank[0].context_vector ==
          std::vector<double>{(2.0 * 1.0 + 2.0 * 0.5) / 4.0, 0.0, 0.0, 0.0});

    cfg.bank_cap = 2;
    TempDir capped("bank_capped");
    cfg.out_dir = capped.str();
    cmd_build_bank(cfg, log);
    const auto small = bank_from_json(read_file(capped.sub("bank.json")));
    REQUIRE(small.size() == 2);
    CHECK(small[0].connective == "then");
    CHECK(small[1].connective == "later");
}

TEST_CASE("cmd_stitch produces the golden stitched captions") {
    TempDir seg("stitch_seg");
    std::ostringstream log;
    cmd_segment(segment_config(seg.str()), log);

    TempDir out("stitch_out");
    cmd_stitch(stitch_config(seg.str(), out.str()), log);

    const json a = read_json(out.sub("vidA.stitched.json"));
    CHECK(a["video_id"] == "vidA");
    CHECK(a["stitched"] == "A man is with a plate. Then, he is sitting with it.");
    const json b = read_json(out.sub("vidB.stitched.json"));
    CHECK(b["stitched"] == "A woman stands near a table.");
    const json c = read_json(out.sub("vidC.stitched.json"));
    CHECK(c["stitched"] == "Two dogs run in a yard.");

    // Average caption length: (15 + 7 + 7) / 3 tokens.
    const json summary = read_json(out.sub("summary.json"));
    CHECK(summary["videos"] == 3);
    CHECK(summary["avg_caption_length"].get<double>() ==
          doctest::Approx(29.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("cmd_stitch skips or passes through caption mismatches") {
    TempDir seg("stitch_seg2");
    std::ostringstream log;
    cmd_segment(segment_config(seg.str()), log);

    // Remove vidA's second caption: counts no longer match its 2 segments.
    TempDir captions("stitch_captions");
    for (const std::string name : {"vidB.json", "vidC.json"})
        write_file((fs::path(captions.str()) / name).string(),
                   testutil::read_fixture("captions/" + name));
    write_file(captions.sub("vidA.json"),
               R"({"video_id": "vidA", "captions": [{"segment_index": 0, )"
               R"("text": "A man is with a plate."}]})");

    PipelineConfig cfg = stitch_config(seg.str(), "");
    cfg.captions_dir = captions.str();

    SUBCASE("default skips the mismatched video with a warning") {
        TempDir out("stitch_skip");
        cfg.out_dir = out.str();
        std::ostringstream warn_log;
        cmd_stitch(cfg, warn_log);
        CHECK_FALSE(fs::exists(out.sub("vidA.stitched.json")));
        CHECK(fs::exists(out.sub("vidB.stitched.json")));
        CHECK(warn_log.str().find("vidA") != std::string::npos);
    }
    SUBCASE("pass-through stitches what is there") {
        TempDir out("stitch_pass");
        cfg.out_dir = out.str();
        cfg.pass_through_missing = true;
        std::ostringstream pass_log;
        cmd_stitch(cfg, pass_log);
        const json a = read_json(out.sub("vidA.stitched.json"));
        CHECK(a["stitched"] == "A man is with a plate.");
    }
}

TEST_CASE("cmd_evaluate scores the golden fixture perfectly") {
    TempDir seg("eval_seg");
    TempDir st("eval_stitch");
    TempDir out("eval_out");
    std::ostringstream log;
    cmd_segment(segment_config(seg.str()), log);
    cmd_stitch(stitch_config(seg.str(), st.str()), log);

    PipelineConfig cfg;
    cfg.captions_dir = st.str();
    cfg.references_path = testutil::fixture_path("references.json");
    cfg.baseline_dir = testutil::fixture_path("baseline");
    cfg.out_dir = out.str();
    cmd_evaluate(cfg, log);

    const json report = read_json(out.sub("report.json"));
    CHECK(report["ours"]["corpus"]["bleu4"].get<double>() ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report["ours"]["corpus"]["cider"].get<double>() ==
          doctest::Approx(10.0).epsilon(1e-9));
    // Identical pairs: mean of 1 - 0.5/m^3 over m = 15, 7, 7.
    const double meteor = ((1.0 - 0.5 / 3375.0) + 2.0 * (1.0 - 0.5 / 343.0)) / 3.0;
    CHECK(report["ours"]["corpus"]["meteor"].get<double>() ==
          doctest::Approx(meteor).epsilon(1e-12));
    CHECK(report.contains("baseline"));
    CHECK(report["baseline"]["corpus"]["bleu4"].get<double>() < 1.0);

    const std::string table = read_file(out.sub("report.txt"));
    CHECK(table.find("Mid-frame") != std::string::npos);
    CHECK(table.find("Ours") != std::string::npos);

    // Mismatched ids are named.
    PipelineConfig bad = cfg;
    TempDir bad_out("eval_bad");
    bad.out_dir = bad_out.str();
    TempDir partial("eval_partial");
    write_file((fs::path(partial.str()) / "vidA.stitched.json").string(),
               read_file(st.sub("vidA.stitched.json")));
    bad.captions_dir = partial.str();
    bad.baseline_dir.clear();
    try {
        cmd_evaluate(bad, log);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string what = e.what();
        CHECK((what.find("vidB") != std::string::npos ||
               what.find("vidC") != std::string::npos));
    }
}

TEST_CASE("cmd_sweep reproduces the hand-derived averages") {
    TempDir out("sweep");
    PipelineConfig cfg = segment_config(out.str());
    std::ostringstream log;
    cmd_sweep(cfg, log);

    // vidA contributes 2 segments at every threshold, vidC one. vidB has
    // windows at -0.9 and -0.8: two segments at -1.0 and -0.9, one at -0.8,
    // fallback (counted 0) above that.
    const std::string csv = read_file(out.sub("sweep.csv"));
    std::map<std::string, double> expected{
        {"-1", 5.0 / 3.0}, {"-0.9", 5.0 / 3.0}, {"-0.8", 4.0 / 3.0}, {"-0.7", 1.0},
        {"-0.6", 1.0},     {"-0.5", 1.0},       {"-0.4", 1.0},       {"-0.3", 1.0},
        {"-0.2", 1.0},     {"-0.1", 1.0}};
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "threshold,avg_segments");
    int rows = 0;
    double prev = 1e9;
    while (std::getline(lines, line)) {
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        const std::string key = line.substr(0, comma);
        const double value = std::stod(line.substr(comma + 1));
        REQUIRE(expected.count(key));
        CHECK(value == doctest::Approx(expected.at(key)).epsilon(1e-12));
        CHECK(value <= prev);  // non-increasing as the threshold rises
        prev = value;
        ++rows;
    }
    CHECK(rows == 10);

    const std::string svg = read_file(out.sub("sweep.svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("manifest records inputs and resolves profiles") {
    TempDir out("manifest");
    PipelineConfig cfg = segment_config(out.str());
    cfg.profile = "longform";
    std::ostringstream log;
    cmd_segment(cfg, log);
    const json manifest = read_json(out.sub("manifest.json"));
    CHECK(manifest["resolved"]["score_threshold"] == "-0.1");
    CHECK(manifest["tool"]["name"] == "storycap");
    const std::string windows_path = testutil::fixture_path("windows.csv");
    REQUIRE(manifest["inputs"].contains(windows_path));
    const std::string digest = manifest["inputs"][windows_path].get<std::string>();
    const std::string data = read_file(windows_path);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(data.data(), data.size())));
    CHECK(digest == buf);
}

TEST_CASE("cli exit codes and error json") {
    std::string err;
    SUBCASE("unknown flag is a usage error") {
        CHECK(run_cli("segment --nope", &err) == 2);
        CHECK(err.find("\"error\"") != std::string::npos);
        CHECK(err.find("\"code\":2") != std::string::npos);
    }
    SUBCASE("empty input directory is a data error") {
        TempDir empty("cli_empty");
        TempDir out("cli_out_err");
        CHECK(run_cli("segment --descriptors " + empty.str() + " --profile montreal --out " +
                          out.str(),
                      &err) == 2);
        CHECK(err.find("\"error\"") != std::string::npos);
    }
    SUBCASE("successful run returns zero") {
        TempDir out("cli_ok");
        CHECK(run_cli("--profile montreal segment --scores " +
                          testutil::fixture_path("windows.csv") + " --out " + out.str(),
                      &err) == 0);
        CHECK(fs::exists(out.sub("vidA.segments.json")));
    }
    SUBCASE("config file supplies defaults, flags override") {
        TempDir out("cli_config");
        const std::string config = out.sub("run.ini");
        write_file(config, "profile=mpii\n");
        CHECK(run_cli("--config " + config + " segment --scores " +
                          testutil::fixture_path("windows.csv") + " --out " + out.str(),
                      &err) == 0);
        const json manifest = read_json(out.sub("manifest.json"));
        CHECK(manifest["resolved"]["profile"] == "mpii");
        CHECK(manifest["resolved"]["score_threshold"] == "-1");

        TempDir out2("cli_config2");
        CHECK(run_cli("--config " + config + " --profile longform segment --scores " +
                          testutil::fixture_path("windows.csv") + " --out " + out2.str(),
                      &err) == 0);
        const json manifest2 = read_json(out2.sub("manifest.json"));
        CHECK(manifest2["resolved"]["profile"] == "longform");
    }
}
