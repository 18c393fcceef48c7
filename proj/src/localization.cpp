#include "storycap/localization.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "storycap/errors.hpp"

namespace storycap::localization {

using nlohmann::json;

void SlidingWindowConfig::validate() const {
    if (stride <= 0) throw InputError("window config: stride must be positive");
    if (lengths.empty()) throw InputError("window config: no window lengths");
    for (int len : lengths) {
        if (len <= 0) throw InputError("window config: window length must be positive");
        if (len % stride != 0)
            throw InputError("window config: length " + std::to_string(len) +
                             " is not a multiple of stride " + std::to_string(stride));
    }
    if (nms_iou < 0.0 || nms_iou > 1.0)
        throw InputError("window config: nms_iou must lie in [0,1]");
}

double temporal_iou(int start_a, int end_a, int start_b, int end_b) {
    const int inter = std::max(0, std::min(end_a, end_b) - std::max(start_a, start_b));
    const int len_a = std::max(0, end_a - start_a);
    const int len_b = std::max(0, end_b - start_b);
    const int uni = len_a + len_b - inter;
    if (uni <= 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::pair<int, int>> generate_windows(int video_length,
                                                  const SlidingWindowConfig& cfg) {
    cfg.validate();
    if (video_length < 1) throw InputError("generate_windows: video length must be >= 1");
    std::set<std::pair<int, int>> seen;
    for (int len : cfg.lengths)
        for (int start = 0; start + len <= video_length; start += cfg.stride)
            seen.insert({start, start + len});
    // Set order is by start, then end, i.e. shorter windows first.
    return {seen.begin(), seen.end()};
}

namespace {

// Keep-order for greedy NMS: best score first, then the deterministic
// tie-break (earlier start, shorter window, lower class name).
bool nms_priority(const ActionWindow& a, const ActionWindow& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start_frame != b.start_frame) return a.start_frame < b.start_frame;
    const int len_a = a.end_frame - a.start_frame;
    const int len_b = b.end_frame - b.start_frame;
    if (len_a != len_b) return len_a < len_b;
    return a.class_id < b.class_id;
}

bool start_order(const ActionWindow& a, const ActionWindow& b) {
    if (a.start_frame != b.start_frame) return a.start_frame < b.start_frame;
    const int len_a = a.end_frame - a.start_frame;
    const int len_b = b.end_frame - b.start_frame;
    if (len_a != len_b) return len_a < len_b;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return a.score > b.score;
}

}  // namespace

std::vector<ActionWindow> temporal_nms(const std::vector<ActionWindow>& windows,
                                       double iou_threshold, bool per_class) {
    for (const auto& w : windows)
        if (w.start_frame >= w.end_frame)
            throw InputError("temporal_nms: window with start >= end");

    std::vector<ActionWindow> sorted = windows;
    std::sort(sorted.begin(), sorted.end(), nms_priority);

    std::vector<bool> removed(sorted.size(), false);
    std::vector<ActionWindow> kept;
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (removed[i]) continue;
        kept.push_back(sorted[i]);
        for (size_t j = i + 1; j < sorted.size(); ++j) {
            if (removed[j]) continue;
            if (per_class && sorted[j].class_id != sorted[i].class_id) continue;
            const double iou = temporal_iou(sorted[i].start_frame, sorted[i].end_frame,
                                            sorted[j].start_frame, sorted[j].end_frame);
            if (iou > iou_threshold) removed[j] = true;
        }
    }
    std::sort(kept.begin(), kept.end(), start_order);
    return kept;
}

SegmentationResult segment_video(const std::vector<ActionWindow>& windows,
                                 const SlidingWindowConfig& cfg, int video_length,
                                 const std::string& video_id) {
    if (video_length < 1) throw InputError("segment_video: video length must be >= 1");

    SegmentationResult result;
    result.video_id = video_id;

    std::vector<ActionWindow> surviving;
    for (const auto& w : windows)
        if (!(w.score < cfg.score_threshold)) surviving.push_back(w);
    std::sort(surviving.begin(), surviving.end(), start_order);

    if (surviving.empty()) {
        Segment seg;
        seg.start_frame = 0;
        seg.end_frame = video_length;
        seg.keyframe = video_length / 2;
        result.segments.push_back(std::move(seg));
        result.fallback_used = true;
        return result;
    }

    for (const auto& w : surviving) {
        if (!result.segments.empty()) {
            Segment& prev = result.segments.back();
            if (prev.class_id == w.class_id && w.start_frame <= prev.end_frame) {
                prev.end_frame = std::max(prev.end_frame, w.end_frame);
                prev.source_windows.push_back(w);
                continue;
            }
        }
        Segment seg;
        seg.start_frame = w.start_frame;
        seg.end_frame = w.end_frame;
        seg.class_id = w.class_id;
        seg.source_windows.push_back(w);
        result.segments.push_back(std::move(seg));
    }

    // Different-class runs may still overlap; clip each segment's start to
    // the previous end so the output is pairwise disjoint. A segment fully
    // inside the previous one is dropped.
    std::vector<Segment> disjoint;
    for (Segment& seg : result.segments) {
        if (!disjoint.empty() && seg.start_frame < disjoint.back().end_frame)
            seg.start_frame = disjoint.back().end_frame;
        if (seg.start_frame < seg.end_frame) disjoint.push_back(std::move(seg));
    }
    result.segments = std::move(disjoint);
    for (Segment& seg : result.segments)
        seg.keyframe = (seg.start_frame + seg.end_frame) / 2;
    return result;
}

SweepReport sweep_thresholds(
    const std::map<double, std::vector<SegmentationResult>>& results_per_threshold) {
    SweepReport report;
    std::vector<std::string> reference_ids;
    bool first = true;
    for (const auto& [threshold, results] : results_per_threshold) {
        if (results.empty()) throw InputError("sweep: no videos at threshold " +
                                              std::to_string(threshold));
        std::vector<std::string> ids;
        ids.reserve(results.size());
        for (const auto& r : results) ids.push_back(r.video_id);
        std::sort(ids.begin(), ids.end());
        if (first) {
            reference_ids = ids;
            first = false;
        } else if (ids != reference_ids) {
            throw InputError("sweep: video sets differ across thresholds");
        }

        double total = 0.0;
        for (const auto& r : results)
            total += r.fallback_used ? 0.0 : static_cast<double>(r.segments.size());
        report.points.push_back({threshold, total / static_cast<double>(results.size())});
    }
    return report;
}

namespace {

// Shortest decimal form that round-trips to the same double.
std::string double_repr(double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, result.ptr);
}

}  // namespace

std::string sweep_to_csv(const SweepReport& report) {
    std::string out = "threshold,avg_segments\n";
    for (const auto& p : report.points)
        out += double_repr(p.threshold) + "," + double_repr(p.avg_segments) + "\n";
    return out;
}

std::string sweep_to_svg(const SweepReport& report) {
    const int width = 640, height = 400;
    const int ml = 70, mr = 20, mt = 20, mb = 50;
    const int pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 0, xmax = 1, ymax = 1;
    if (!report.points.empty()) {
        xmin = report.points.front().threshold;
        xmax = report.points.back().threshold;
        ymax = 0.0;
        for (const auto& p : report.points) ymax = std::max(ymax, p.avg_segments);
        if (ymax <= 0.0) ymax = 1.0;
        if (xmax == xmin) xmax = xmin + 1.0;
    }

    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + ph - y / ymax * ph; };

    std::ostringstream out;
    out.precision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "  <line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    out << "  <text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"14\">score threshold</text>\n";
    out << "  <text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 "
        << mt + ph / 2 << ")\">avg segments / video</text>\n";

    if (!report.points.empty()) {
        out << "  <polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\" points=\"";
        for (const auto& p : report.points)
            out << sx(p.threshold) << "," << sy(p.avg_segments) << " ";
        out << "\"/>\n";
        for (const auto& p : report.points) {
            out << "  <circle cx=\"" << sx(p.threshold) << "\" cy=\"" << sy(p.avg_segments)
                << "\" r=\"3\" fill=\"#1f4e9c\"/>\n";
            out << "  <text x=\"" << sx(p.threshold) << "\" y=\"" << mt + ph + 18
                << "\" text-anchor=\"middle\" font-size=\"11\">" << p.threshold << "</text>\n";
        }
        out << "  <text x=\"" << ml - 8 << "\" y=\"" << sy(ymax) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << ymax << "</text>\n";
        out << "  <text x=\"" << ml - 8 << "\" y=\"" << sy(0) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">0</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

// --- file formats ------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

std::map<std::string, std::vector<ActionWindow>> load_window_scores_csv(const std::string& text) {
    std::map<std::string, std::vector<ActionWindow>> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (line_no == 1 && line.rfind("video_id,", 0) == 0) continue;  // header
        const auto fields = split_csv_line(line);
        if (fields.size() != 5)
            throw InputError("window csv line " + std::to_string(line_no) + ": expected 5 fields" +
                             " (video_id,start,end,class,score), got " +
                             std::to_string(fields.size()));
        ActionWindow w;
        try {
            w.start_frame = std::stoi(fields[1]);
            w.end_frame = std::stoi(fields[2]);
            w.score = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw InputError("window csv line " + std::to_string(line_no) + ": bad number");
        }
        w.class_id = fields[3];
        if (fields[0].empty())
            throw InputError("window csv line " + std::to_string(line_no) + ": empty video_id");
        if (w.start_frame < 0 || w.start_frame >= w.end_frame)
            throw InputError("window csv line " + std::to_string(line_no) +
                             ": invalid interval [" + fields[1] + "," + fields[2] + ")");
        out[fields[0]].push_back(std::move(w));
    }
    return out;
}

std::string window_scores_to_csv(const std::map<std::string, std::vector<ActionWindow>>& windows) {
    std::string out = "video_id,start,end,class,score\n";
    for (const auto& [video_id, list] : windows)
        for (const auto& w : list)
            out += video_id + "," + std::to_string(w.start_frame) + "," +
                   std::to_string(w.end_frame) + "," + w.class_id + "," + double_repr(w.score) +
                   "\n";
    return out;
}

std::string segmentation_to_json(const SegmentationResult& result) {
    json segs = json::array();
    for (const auto& s : result.segments)
        segs.push_back({{"start", s.start_frame},
                        {"end", s.end_frame},
                        {"class", s.class_id},
                        {"keyframe", s.keyframe}});
    json j{{"video_id", result.video_id},
           {"fallback", result.fallback_used},
           {"segments", segs}};
    return j.dump(2) + "\n";
}

SegmentationResult segmentation_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError("segment file: invalid JSON");
    SegmentationResult r;
    if (!j.contains("video_id") || !j["video_id"].is_string())
        throw InputError("segment file: missing string field 'video_id'");
    r.video_id = j["video_id"].get<std::string>();
    r.fallback_used = j.value("fallback", false);
    if (!j.contains("segments") || !j["segments"].is_array())
        throw InputError("segment file: missing array field 'segments'");
    for (const auto& s : j["segments"]) {
        Segment seg;
        if (!s.contains("start") || !s.contains("end") || !s.contains("keyframe"))
            throw InputError("segment file: segment needs 'start', 'end' and 'keyframe'");
        seg.start_frame = s["start"].get<int>();
        seg.end_frame = s["end"].get<int>();
        seg.keyframe = s["keyframe"].get<int>();
        seg.class_id = s.value("class", std::string{});
        r.segments.push_back(std::move(seg));
    }
    return r;
}

}  // namespace storycap::localization
