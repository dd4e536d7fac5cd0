#include "edgestereo/eval.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace edgestereo::eval {

RegionMask all_pixels(int height, int width) { return {Mask(height, width, true), "all"}; }

namespace {

void check_inputs(const DisparityMap& d, const DisparityMap& gt, const RegionMask* region) {
    if (!d.values.same_shape(gt.values)) throw ShapeError("prediction and ground truth differ in shape");
    if (region != nullptr && !region->mask.same_resolution(gt.values)) {
        throw ShapeError("region mask '" + region->label + "' does not match the evaluated maps");
    }
}

bool evaluated(const DisparityMap& gt, const RegionMask* region, int y, int x) {
    return gt.valid(y, x) && (region == nullptr || region->mask(y, x));
}

} // namespace

double epe(const DisparityMap& d, const DisparityMap& gt, const RegionMask* region) {
    check_inputs(d, gt, region);
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!evaluated(gt, region, y, x)) continue;
            sum += std::abs(d(y, x) - gt(y, x));
            ++n;
        }
    }
    if (n == 0) throw std::domain_error("epe: no evaluated pixels");
    return sum / static_cast<double>(n);
}

double t_px_error(const DisparityMap& d, const DisparityMap& gt, double t, const RegionMask* region,
                  TpxOptions options) {
    check_inputs(d, gt, region);
    std::size_t bad = 0;
    std::size_t n = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!evaluated(gt, region, y, x)) continue;
            ++n;
            const double err = std::abs(d(y, x) - gt(y, x));
            const bool wrong = err > t && (!options.kitti_relative || err > 0.05 * gt(y, x));
            if (!d.valid(y, x) || wrong) ++bad;
        }
    }
    if (n == 0) throw std::domain_error("t_px_error: no evaluated pixels");
    return 100.0 * static_cast<double>(bad) / static_cast<double>(n);
}

RegionMask near_boundary_mask(const EdgeMap& edges, double threshold, int radius) {
    if (radius < 0) throw std::invalid_argument("near_boundary_mask radius must be >= 0");
    const int h = edges.height();
    const int w = edges.width();
    // Separable dilation: horizontal pass, then vertical.
    Mask horizontal(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (edges(y, x) < threshold) continue;
            for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) horizontal.set(y, xx, true);
        }
    }
    Mask out(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!horizontal(y, x)) continue;
            for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) out.set(yy, x, true);
        }
    }
    return {std::move(out), "near-boundary"};
}

double default_tolerance(int height, int width) {
    return 0.0075 * std::hypot(static_cast<double>(height), static_cast<double>(width));
}

EdgePR pr_from_counts(std::size_t matched, std::size_t predicted, std::size_t ground_truth) {
    EdgePR r;
    r.matched = matched;
    r.predicted = predicted;
    r.ground_truth = ground_truth;
    r.precision = predicted > 0 ? static_cast<double>(matched) / static_cast<double>(predicted) : 0.0;
    r.recall = ground_truth > 0 ? static_cast<double>(matched) / static_cast<double>(ground_truth) : 0.0;
    const double s = r.precision + r.recall;
    r.f = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
    return r;
}

EdgePR edge_pr(const EdgeMap& pred, const EdgeMap& gt, double threshold, double tolerance) {
    if (!pred.probabilities.same_shape(gt.probabilities)) throw ShapeError("edge maps differ in shape");
    if (!gt.is_binary()) throw std::invalid_argument("ground-truth edge map must be binary");
    const int h = gt.height();
    const int w = gt.width();
    if (tolerance < 0.0) tolerance = default_tolerance(h, w);

    std::vector<std::size_t> gt_index(static_cast<std::size_t>(h) * w, SIZE_MAX);
    std::size_t n_gt = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (gt(y, x) > 0.5) gt_index[static_cast<std::size_t>(y) * w + x] = n_gt++;
        }
    }
    struct Pair {
        double dist2;
        std::size_t pred;
        std::size_t gt;
    };
    std::vector<Pair> pairs;
    std::size_t n_pred = 0;
    const int r = static_cast<int>(std::floor(tolerance));
    const double tol2 = tolerance * tolerance;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (pred(y, x) < threshold) continue;
            const std::size_t p = n_pred++;
            for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
                for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
                    const std::size_t g = gt_index[static_cast<std::size_t>(yy) * w + xx];
                    if (g == SIZE_MAX) continue;
                    const double d2 = static_cast<double>((yy - y) * (yy - y) + (xx - x) * (xx - x));
                    if (d2 <= tol2) pairs.push_back({d2, p, g});
                }
            }
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.dist2, a.pred, a.gt) < std::tie(b.dist2, b.pred, b.gt);
    });
    std::vector<bool> pred_used(n_pred, false);
    std::vector<bool> gt_used(n_gt, false);
    std::size_t matched = 0;
    for (const Pair& pr : pairs) {
        if (pred_used[pr.pred] || gt_used[pr.gt]) continue;
        pred_used[pr.pred] = true;
        gt_used[pr.gt] = true;
        ++matched;
    }
    return pr_from_counts(matched, n_pred, n_gt);
}

std::vector<double> sweep_thresholds() {
    std::vector<double> t;
    for (int k = 1; k <= 99; ++k) t.push_back(k / 100.0);
    return t;
}

OdsOis ods_ois(std::span<const EdgeMap> preds, std::span<const EdgeMap> gts, double tolerance) {
    if (preds.size() != gts.size()) throw std::invalid_argument("ods_ois: prediction and ground-truth counts differ");
    if (preds.empty()) throw std::domain_error("ods_ois: no images");
    const auto thresholds = sweep_thresholds();
    std::vector<std::size_t> matched(thresholds.size(), 0);
    std::vector<std::size_t> predicted(thresholds.size(), 0);
    std::vector<std::size_t> truth(thresholds.size(), 0);
    double ois_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        double best = -1.0;
        for (std::size_t k = 0; k < thresholds.size(); ++k) {
            const EdgePR r = edge_pr(preds[i], gts[i], thresholds[k], tolerance);
            matched[k] += r.matched;
            predicted[k] += r.predicted;
            truth[k] += r.ground_truth;
            best = std::max(best, r.f);
        }
        ois_sum += best;
    }
    OdsOis out;
    out.ods = -1.0;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        const double f = pr_from_counts(matched[k], predicted[k], truth[k]).f;
        if (f > out.ods) {
            out.ods = f;
            out.ods_threshold = thresholds[k];
        }
    }
    out.ois = ois_sum / static_cast<double>(preds.size());
    return out;
}

void write_text_report(std::ostream& out, const Report& report) {
    std::size_t width = 0;
    for (const auto& [name, _] : report) width = std::max(width, name.size());
    for (const auto& [name, value] : report) {
        out << std::left << std::setw(static_cast<int>(width)) << name << " : " << std::fixed
            << std::setprecision(6) << value << '\n';
    }
    out << std::defaultfloat;
}

void write_kv_report(std::ostream& out, const Report& report) {
    for (const auto& [name, value] : report) out << name << '=' << std::setprecision(17) << value << '\n';
}

Report read_kv_report(std::istream& in) {
    Report report;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(FormatErrorKind::CorruptData, "report line without '='");
        report[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
    }
    return report;
}

} // namespace edgestereo::eval
