#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace storycap::localization {

// Sliding-window generation and segmentation settings. Window lengths must
// be positive multiples of the stride.
struct SlidingWindowConfig {
    std::vector<int> lengths{30, 60, 90, 120};
    int stride = 30;
    double nms_iou = 0.2;
    double score_threshold = -0.5;
    // When true, NMS suppresses across classes instead of per class.
    bool cross_class_nms = false;

    void validate() const;
};

// A scored temporal interval [start_frame, end_frame) carrying one class.
struct ActionWindow {
    int start_frame = 0;
    int end_frame = 0;
    std::string class_id;
    double score = 0.0;

    bool operator==(const ActionWindow&) const = default;
};

// A merged run of same-class windows. keyframe = floor((start+end)/2).
struct Segment {
    int start_frame = 0;
    int end_frame = 0;
    std::string class_id;
    int keyframe = 0;
    std::vector<ActionWindow> source_windows;
};

struct SegmentationResult {
    std::string video_id;
    std::vector<Segment> segments;
    // True when nothing survived the threshold and a single whole-video
    // segment with the middle keyframe was emitted instead.
    bool fallback_used = false;
};

struct SweepPoint {
    double threshold = 0.0;
    double avg_segments = 0.0;
};

struct SweepReport {
    std::vector<SweepPoint> points;  // ascending threshold
};

// Overlap of two half-open frame intervals as intersection/union; 0 when
// either interval is empty.
double temporal_iou(int start_a, int end_a, int start_b, int end_b);

// All windows [k*stride, k*stride + L) that fit inside the video, for every
// configured length L, ordered by start then length, deduplicated. A video
// shorter than every length yields no windows.
std::vector<std::pair<int, int>> generate_windows(int video_length,
                                                  const SlidingWindowConfig& cfg);

// Greedy non-maximum suppression per class: repeatedly keep the best-scoring
// remaining window and drop same-class windows whose IoU with it exceeds the
// threshold. Ties break by earlier start, then shorter window, then class
// name. Output is sorted by start frame.
std::vector<ActionWindow> temporal_nms(const std::vector<ActionWindow>& windows,
                                       double iou_threshold, bool per_class = true);

// Threshold filtering (score < threshold drops) followed by merging of
// maximal same-class runs of overlapping or abutting windows. When nothing
// survives, a single whole-video segment with the middle keyframe is
// produced and fallback_used is set.
SegmentationResult segment_video(const std::vector<ActionWindow>& windows,
                                 const SlidingWindowConfig& cfg, int video_length,
                                 const std::string& video_id = "");

// Average segment count per video for every threshold, counting fallback
// results as zero segments. All thresholds must cover the same video set.
SweepReport sweep_thresholds(
    const std::map<double, std::vector<SegmentationResult>>& results_per_threshold);

std::string sweep_to_csv(const SweepReport& report);
std::string sweep_to_svg(const SweepReport& report);

// --- file formats ------------------------------------------------------
// Window-score CSV: header "video_id,start,end,class,score", one window per
// line, multiple videos per file.
// Segment JSON: {"video_id": ..., "fallback": ..., "segments":
//   [{"start":..,"end":..,"class":..,"keyframe":..}]}

std::map<std::string, std::vector<ActionWindow>> load_window_scores_csv(const std::string& text);
std::string window_scores_to_csv(const std::map<std::string, std::vector<ActionWindow>>& windows);

std::string segmentation_to_json(const SegmentationResult& result);
SegmentationResult segmentation_from_json(const std::string& text);

}  // namespace storycap::localization
