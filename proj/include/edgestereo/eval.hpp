#pragma once

#include "edgestereo/grid.hpp"

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace edgestereo::eval {

struct RegionMask {
    Mask mask;
    std::string label;
};

RegionMask all_pixels(int height, int width);

/// Mean |d - gt| over pixels valid in gt and inside `region` (when given). The prediction's own
/// mask is ignored. Throws std::domain_error when no pixel is evaluated.
double epe(const DisparityMap& d, const DisparityMap& gt, const RegionMask* region = nullptr);

struct TpxOptions {
    /// Additionally require |d - gt| > 0.05 gt, as in the KITTI D1 metric.
    bool kitti_relative = false;
};

/// 100 x fraction of evaluated pixels (as for epe) with |d - gt| > t. A pixel the prediction
/// marks invalid always counts as an error.
double t_px_error(const DisparityMap& d, const DisparityMap& gt, double t, const RegionMask* region = nullptr,
                  TpxOptions options = {});

/// Pixels within Chebyshev distance `radius` of an edge pixel (probability >= threshold).
RegionMask near_boundary_mask(const EdgeMap& edges, double threshold = 0.5, int radius = 4);

struct EdgePR {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
    std::size_t matched = 0;
    std::size_t predicted = 0;
    std::size_t ground_truth = 0;
};

/// Default matching tolerance: 0.0075 x image diagonal.
double default_tolerance(int height, int width);

/// F from matched/predicted/ground-truth counts; P (R) is 0 when nothing is predicted (no ground
/// truth) and F is 0 when P + R = 0.
EdgePR pr_from_counts(std::size_t matched, std::size_t predicted, std::size_t ground_truth);

/// Binarizes pred at >= threshold and matches predicted to ground-truth edge pixels one-to-one:
/// all pairs within Euclidean `tolerance` (negative = default_tolerance) are visited in order of
/// increasing distance (ties by predicted, then ground-truth raster index) and matched when both
/// are still free.
EdgePR edge_pr(const EdgeMap& pred, const EdgeMap& gt, double threshold, double tolerance = -1.0);

/// Threshold sweep used by ods_ois: 0.01, 0.02, ..., 0.99.
std::vector<double> sweep_thresholds();

struct OdsOis {
    double ods = 0.0;
    double ods_threshold = 0.0;
    double ois = 0.0;
};

/// ODS: best F over the sweep from counts summed across images at one shared threshold.
/// OIS: mean over images of each image's best F. Ties pick the lowest threshold.
OdsOis ods_ois(std::span<const EdgeMap> preds, std::span<const EdgeMap> gts, double tolerance = -1.0);

/// Ordered metric name -> value pairs.
using Report = std::map<std::string, double>;

/// "name: value" lines, one metric per line, sorted by name.
void write_text_report(std::ostream& out, const Report& report);
/// "name=value" lines with full round-trip precision.
void write_kv_report(std::ostream& out, const Report& report);
Report read_kv_report(std::istream& in);

} // namespace edgestereo::eval
