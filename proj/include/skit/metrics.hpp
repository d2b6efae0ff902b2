#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace skit::metrics {

struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
    int class_id = 0;
    std::optional<double> score; // empty for ground truth

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
};

// Throws std::invalid_argument for degenerate (non-positive extent) boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

enum class SizeBucket { small, medium, large };

// small: area < 32^2, medium: 32^2 <= area <= 96^2, large: area > 96^2 (pixels^2)
SizeBucket size_bucket(double area);
const char* size_bucket_name(SizeBucket b);

struct MatchResult {
    struct Pair {
        int gt_index;
        int dt_index;
        double iou;
    };
    std::vector<Pair> pairs;
    int n_tp = 0;
    int n_fp = 0;
    int n_fn = 0;
};

// Greedy score-descending matching. A detection is matched to the unmatched
// ground truth of the same class with the highest IoU >= tau; leftover
// detections are false positives (duplicates included), leftover ground
// truths are false negatives. Score ties break by ascending detection index.
MatchResult match_detections(std::span<const BoundingBox> gts,
                             std::span<const BoundingBox> dts, double tau);

// (precision, recall); 0 when the respective denominator is 0.
std::pair<double, double> precision_recall(const MatchResult& m);

struct EvalImage {
    std::vector<BoundingBox> gts;
    std::vector<BoundingBox> dts;
};

using Dataset = std::vector<EvalImage>;

// Size-bucket evaluation filters ground truths to the bucket and drops
// unmatched detections whose own area falls outside it (neither TP nor FP).
struct EvalOptions {
    std::optional<SizeBucket> bucket;
    int max_det = 100; // highest-score detections kept per image
};

// COCO-style 101-point interpolated AP at one IoU threshold.
// Matching is per image, the precision-recall curve is pooled over the
// dataset. Throws std::invalid_argument when the dataset has no ground truth.
double average_precision(const Dataset& data, double tau, const EvalOptions& opt = {});
double average_precision(std::span<const BoundingBox> gts,
                         std::span<const BoundingBox> dts, double tau);

// AP averaged over IoU 0.5:0.05:0.95.
double average_precision_coco(const Dataset& data, const EvalOptions& opt = {});

// Twice the area under the recall-IoU curve, evaluated as the mean recall
// over the 10 IoU thresholds 0.5:0.05:0.95.
double average_recall(const Dataset& data, const EvalOptions& opt = {});
double average_recall(std::span<const BoundingBox> gts,
                      std::span<const BoundingBox> dts, int max_det);

struct LrpResult {
    double lrp = 0.0;
    double lrp_iou = 0.0; // mean (1 - IoU) over TPs, 0 when no TP
    double lrp_fp = 0.0;  // N_FP / |Y_s|, 0 when Y_s empty
    double lrp_fn = 0.0;  // N_FN / |X|
    int n_tp = 0;
    int n_fp = 0;
    int n_fn = 0;
};

// LRP error of the detections with score strictly above s, matched at tau.
// Throws std::invalid_argument when both X and Y_s are empty (Z = 0).
LrpResult lrp_error(const Dataset& data, double s, double tau);
LrpResult lrp_error(std::span<const BoundingBox> gts,
                    std::span<const BoundingBox> dts, double s, double tau);

struct OlrpResult {
    double olrp = 0.0;
    double s_opt = 0.0;
    LrpResult components;
    // Set when the optimum sits at the lowest candidate threshold, i.e. the
    // whole available score range is kept and the true optimum may lie below
    // the detector's score cutoff.
    bool unreliable = false;
};

// Exhaustive minimisation over the candidate thresholds {0} + distinct
// detection scores (LRP is piecewise constant between scores). Ties take the
// smallest threshold.
OlrpResult olrp(const Dataset& data, double tau = 0.5);
OlrpResult olrp(std::span<const BoundingBox> gts,
                std::span<const BoundingBox> dts, double tau = 0.5);

// ---- file formats -------------------------------------------------------

// Record format, one box per line:
//   image_id class_id x_min y_min x_max y_max [score]
// Lines with a score populate detections, lines without populate ground
// truth. Loading enforces box validity and reports offending line numbers.
Dataset load_dataset(const std::string& gt_path, const std::string& det_path);

struct ReportRow {
    std::string metric;
    std::string iou;
    std::string bucket;
    int max_det = 100;
    double value = 0.0;
    std::string note;
};

// Full metric sweep: AP@0.5/0.75/[.5:.95], AR@[.5:.95] for max_det 1/10/100,
// per-size-bucket AP/AR, oLRP and its components.
std::vector<ReportRow> evaluate_all(const Dataset& data);

std::string report_csv(const std::vector<ReportRow>& rows);

} // namespace skit::metrics
