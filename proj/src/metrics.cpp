#include "skit/metrics.hpp"

#include "skit/textio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace skit::metrics {

namespace {

constexpr double kIouThresholds[] = {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};

void check_box(const BoundingBox& b) {
    if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max))
        throw std::invalid_argument("degenerate bounding box");
    if (b.score && (*b.score < 0.0 || *b.score > 1.0))
        throw std::invalid_argument("detection score outside [0,1]");
}

// Detection order used everywhere: score descending, index ascending on ties.
std::vector<int> score_order(std::span<const BoundingBox> dts) {
    std::vector<int> order(dts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dts[a].score.value_or(0.0) > dts[b].score.value_or(0.0);
    });
    return order;
}

bool in_bucket(const BoundingBox& b, std::optional<SizeBucket> bucket) {
    return !bucket || size_bucket(b.area()) == *bucket;
}

struct LabeledDet {
    double score;
    int image;
    int rank; // position in the per-image score order, for deterministic pooling
    bool tp;
    double iou;
};

struct LabeledImage {
    int n_gt = 0;
    std::vector<LabeledDet> dets; // ignored detections already dropped
};

// Per-image matching with COCO-style ignore handling: ground truths outside
// the requested bucket are filtered out up front; detections left unmatched
// whose own area is outside the bucket count neither as TP nor FP.
LabeledImage label_image(const EvalImage& img, double tau, const EvalOptions& opt, int image_index) {
    std::vector<BoundingBox> gts;
    for (const auto& g : img.gts)
        if (in_bucket(g, opt.bucket)) gts.push_back(g);

    auto order = score_order(img.dts);
    if (static_cast<int>(order.size()) > opt.max_det) order.resize(opt.max_det);
    std::vector<BoundingBox> dts;
    dts.reserve(order.size());
    for (int i : order) dts.push_back(img.dts[i]);

    MatchResult m = match_detections(gts, dts, tau);
    std::vector<double> matched_iou(dts.size(), -1.0);
    for (const auto& p : m.pairs) matched_iou[p.dt_index] = p.iou;

    LabeledImage out;
    out.n_gt = static_cast<int>(gts.size());
    for (size_t i = 0; i < dts.size(); ++i) {
        if (matched_iou[i] >= 0.0) {
            out.dets.push_back({dts[i].score.value_or(0.0), image_index, static_cast<int>(i), true, matched_iou[i]});
        } else if (in_bucket(dts[i], opt.bucket)) {
            out.dets.push_back({dts[i].score.value_or(0.0), image_index, static_cast<int>(i), false, 0.0});
        }
    }
    return out;
}

struct PooledCurve {
    int n_gt = 0;
    std::vector<LabeledDet> dets; // globally ranked
};

// Images are independent; label them in parallel and reduce in image order
// so the outcome does not depend on the schedule.
std::vector<LabeledImage> label_images(const Dataset& data, double tau, const EvalOptions& opt) {
    std::vector<LabeledImage> labeled(data.size());
    const long long n = static_cast<long long>(data.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long long i = 0; i < n; ++i)
        labeled[i] = label_image(data[i], tau, opt, static_cast<int>(i));
    return labeled;
}

PooledCurve pooled_curve(const Dataset& data, double tau, const EvalOptions& opt) {
    PooledCurve curve;
    for (LabeledImage& li : label_images(data, tau, opt)) {
        curve.n_gt += li.n_gt;
        curve.dets.insert(curve.dets.end(), li.dets.begin(), li.dets.end());
    }
    std::sort(curve.dets.begin(), curve.dets.end(), [](const LabeledDet& a, const LabeledDet& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.image != b.image) return a.image < b.image;
        return a.rank < b.rank;
    });
    return curve;
}

double ap_from_curve(const PooledCurve& curve) {
    if (curve.n_gt == 0) throw std::invalid_argument("average precision undefined without ground truth");
    const size_t n = curve.dets.size();
    std::vector<double> precision(n), recall(n);
    int tp = 0, fp = 0;
    for (size_t i = 0; i < n; ++i) {
        curve.dets[i].tp ? ++tp : ++fp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
        recall[i] = static_cast<double>(tp) / curve.n_gt;
    }
    // Precision envelope: max precision among points with recall >= r.
    for (size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        double r = k / 100.0;
        auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) sum += precision[it - recall.begin()];
    }
    return sum / 101.0;
}

double recall_at(const Dataset& data, double tau, const EvalOptions& opt) {
    int n_gt = 0, n_tp = 0;
    for (const LabeledImage& li : label_images(data, tau, opt)) {
        n_gt += li.n_gt;
        for (const auto& d : li.dets) n_tp += d.tp ? 1 : 0;
    }
    if (n_gt == 0) throw std::invalid_argument("recall undefined without ground truth");
    return static_cast<double>(n_tp) / n_gt;
}

} // namespace

double iou(const BoundingBox& a, const BoundingBox& b) {
    check_box(a);
    check_box(b);
    double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

SizeBucket size_bucket(double area) {
    if (area < 32.0 * 32.0) return SizeBucket::small;
    if (area <= 96.0 * 96.0) return SizeBucket::medium;
    return SizeBucket::large;
}

const char* size_bucket_name(SizeBucket b) {
    switch (b) {
        case SizeBucket::small: return "small";
        case SizeBucket::medium: return "medium";
        case SizeBucket::large: return "large";
    }
    return "?";
}

MatchResult match_detections(std::span<const BoundingBox> gts,
                             std::span<const BoundingBox> dts, double tau) {
    if (tau < 0.0 || tau >= 1.0) throw std::invalid_argument("IoU threshold must be in [0,1)");
    MatchResult result;
    std::vector<bool> gt_used(gts.size(), false);
    for (int dt_index : score_order(dts)) {
        const BoundingBox& dt = dts[dt_index];
        int best = -1;
        double best_iou = -1.0;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (gt_used[g] || gts[g].class_id != dt.class_id) continue;
            double v = iou(gts[g], dt);
            if (v >= tau && v > best_iou) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best >= 0) {
            gt_used[best] = true;
            result.pairs.push_back({best, dt_index, best_iou});
        }
    }
    result.n_tp = static_cast<int>(result.pairs.size());
    result.n_fp = static_cast<int>(dts.size()) - result.n_tp;
    result.n_fn = static_cast<int>(gts.size()) - result.n_tp;
    return result;
}

std::pair<double, double> precision_recall(const MatchResult& m) {
    double p = (m.n_tp + m.n_fp) > 0 ? static_cast<double>(m.n_tp) / (m.n_tp + m.n_fp) : 0.0;
    double r = (m.n_tp + m.n_fn) > 0 ? static_cast<double>(m.n_tp) / (m.n_tp + m.n_fn) : 0.0;
    return {p, r};
}

double average_precision(const Dataset& data, double tau, const EvalOptions& opt) {
    return ap_from_curve(pooled_curve(data, tau, opt));
}

double average_precision(std::span<const BoundingBox> gts,
                         std::span<const BoundingBox> dts, double tau) {
    Dataset data(1);
    data[0].gts.assign(gts.begin(), gts.end());
    data[0].dts.assign(dts.begin(), dts.end());
    return average_precision(data, tau);
}

double average_precision_coco(const Dataset& data, const EvalOptions& opt) {
    double sum = 0.0;
    for (double tau : kIouThresholds) sum += average_precision(data, tau, opt);
    return sum / std::size(kIouThresholds);
}

double average_recall(const Dataset& data, const EvalOptions& opt) {
    double sum = 0.0;
    for (double tau : kIouThresholds) sum += recall_at(data, tau, opt);
    return sum / std::size(kIouThresholds);
}

double average_recall(std::span<const BoundingBox> gts,
                      std::span<const BoundingBox> dts, int max_det) {
    Dataset data(1);
    data[0].gts.assign(gts.begin(), gts.end());
    data[0].dts.assign(dts.begin(), dts.end());
    EvalOptions opt;
    opt.max_det = max_det;
    return average_recall(data, opt);
}

LrpResult lrp_error(const Dataset& data, double s, double tau) {
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("score threshold must be in [0,1]");
    if (tau < 0.0 || tau >= 1.0) throw std::invalid_argument("IoU threshold must be in [0,1)");
    LrpResult r;
    double sum_one_minus_iou = 0.0;
    for (const auto& img : data) {
        std::vector<BoundingBox> kept;
        for (const auto& d : img.dts)
            if (d.score.value_or(0.0) > s) kept.push_back(d);
        MatchResult m = match_detections(img.gts, kept, tau);
        r.n_tp += m.n_tp;
        r.n_fp += m.n_fp;
        r.n_fn += m.n_fn;
        for (const auto& p : m.pairs) sum_one_minus_iou += 1.0 - p.iou;
    }
    int z = r.n_tp + r.n_fp + r.n_fn;
    if (z == 0) throw std::invalid_argument("LRP undefined: no ground truth and no detections above s");
    int n_ys = r.n_tp + r.n_fp;
    int n_x = r.n_tp + r.n_fn;
    r.lrp = (sum_one_minus_iou / (1.0 - tau) + r.n_fp + r.n_fn) / z;
    r.lrp_iou = r.n_tp > 0 ? sum_one_minus_iou / r.n_tp : 0.0;
    r.lrp_fp = n_ys > 0 ? static_cast<double>(r.n_fp) / n_ys : 0.0;
    r.lrp_fn = n_x > 0 ? static_cast<double>(r.n_fn) / n_x : 0.0;
    return r;
}

LrpResult lrp_error(std::span<const BoundingBox> gts,
                    std::span<const BoundingBox> dts, double s, double tau) {
    Dataset data(1);
    data[0].gts.assign(gts.begin(), gts.end());
    data[0].dts.assign(dts.begin(), dts.end());
    return lrp_error(data, s, tau);
}

OlrpResult olrp(const Dataset& data, double tau) {
    std::set<double> grid{0.0};
    for (const auto& img : data)
        for (const auto& d : img.dts) grid.insert(d.score.value_or(0.0));

    OlrpResult best;
    bool have = false;
    for (double s : grid) {
        LrpResult r = lrp_error(data, s, tau);
        if (!have || r.lrp < best.olrp) {
            best.olrp = r.lrp;
            best.s_opt = s;
            best.components = r;
            have = true;
        }
    }
    best.unreliable = (best.s_opt == *grid.begin());
    return best;
}

OlrpResult olrp(std::span<const BoundingBox> gts,
                std::span<const BoundingBox> dts, double tau) {
    Dataset data(1);
    data[0].gts.assign(gts.begin(), gts.end());
    data[0].dts.assign(dts.begin(), dts.end());
    return olrp(data, tau);
}

Dataset load_dataset(const std::string& gt_path, const std::string& det_path) {
    std::map<long long, EvalImage> images;

    auto load = [&images](const std::string& path, bool expect_score) {
        for (const auto& ln : read_sectioned_file(path)) {
            auto toks = split_ws(ln.text);
            size_t expected = expect_score ? 7 : 6;
            if (toks.size() != expected)
                throw ParseError(path, ln.number,
                                 "expected " + std::to_string(expected) + " fields, got " +
                                     std::to_string(toks.size()));
            BoundingBox b;
            long long image_id = parse_int(toks[0], ln, path);
            b.class_id = static_cast<int>(parse_int(toks[1], ln, path));
            b.x_min = parse_double(toks[2], ln, path);
            b.y_min = parse_double(toks[3], ln, path);
            b.x_max = parse_double(toks[4], ln, path);
            b.y_max = parse_double(toks[5], ln, path);
            if (expect_score) b.score = parse_double(toks[6], ln, path);
            try {
                check_box(b);
            } catch (const std::invalid_argument& e) {
                throw ParseError(path, ln.number, e.what());
            }
            auto& img = images[image_id];
            (expect_score ? img.dts : img.gts).push_back(b);
        }
    };
    load(gt_path, false);
    load(det_path, true);

    Dataset data;
    data.reserve(images.size());
    for (auto& [id, img] : images) data.push_back(std::move(img));
    return data;
}

std::vector<ReportRow> evaluate_all(const Dataset& data) {
    std::vector<ReportRow> rows;
    auto add = [&rows](std::string metric, std::string iou_s, std::string bucket, int max_det,
                       auto fn) {
        ReportRow row{std::move(metric), std::move(iou_s), std::move(bucket), max_det, 0.0, ""};
        try {
            row.value = fn();
        } catch (const std::invalid_argument& e) {
            row.value = -1.0; // COCO convention for undefined slices
            row.note = e.what();
        }
        rows.push_back(std::move(row));
    };

    add("AP", "0.50", "all", 100, [&] { return average_precision(data, 0.5); });
    add("AP", "0.75", "all", 100, [&] { return average_precision(data, 0.75); });
    add("AP", "0.50:0.95", "all", 100, [&] { return average_precision_coco(data); });
    for (auto b : {SizeBucket::small, SizeBucket::medium, SizeBucket::large}) {
        EvalOptions opt;
        opt.bucket = b;
        add("AP", "0.50:0.95", size_bucket_name(b), 100,
            [&, opt] { return average_precision_coco(data, opt); });
    }
    for (int md : {1, 10, 100}) {
        EvalOptions opt;
        opt.max_det = md;
        add("AR", "0.50:0.95", "all", md, [&, opt] { return average_recall(data, opt); });
    }
    for (auto b : {SizeBucket::small, SizeBucket::medium, SizeBucket::large}) {
        EvalOptions opt;
        opt.bucket = b;
        add("AR", "0.50:0.95", size_bucket_name(b), 100,
            [&, opt] { return average_recall(data, opt); });
    }
    try {
        OlrpResult o = olrp(data);
        ReportRow row{"oLRP", "0.50", "all", 100, o.olrp, ""};
        row.note = std::string("s_opt=") + fmt_double(o.s_opt);
        if (o.unreliable) row.note += " unreliable";
        rows.push_back(row);
        rows.push_back({"oLRP_IoU", "0.50", "all", 100, o.components.lrp_iou, ""});
        rows.push_back({"oLRP_FP", "0.50", "all", 100, o.components.lrp_fp, ""});
        rows.push_back({"oLRP_FN", "0.50", "all", 100, o.components.lrp_fn, ""});
    } catch (const std::invalid_argument& e) {
        rows.push_back({"oLRP", "0.50", "all", 100, -1.0, e.what()});
    }
    return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "metric,iou,bucket,max_det,value,note\n";
    for (const auto& r : rows) {
        out << r.metric << ',' << r.iou << ',' << r.bucket << ',' << r.max_det << ','
            << fmt_double(r.value) << ',' << r.note << '\n';
    }
    return out.str();
}

} // namespace skit::metrics
