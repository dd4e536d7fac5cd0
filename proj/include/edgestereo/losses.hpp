#pragma once

#include "edgestereo/grid.hpp"

#include <span>
#include <vector>

namespace edgestereo::losses {

/// Per-scale weights of the deep-supervision objective; index 0 is the finest scale.
struct LossWeights {
    double beta = 2.0;
    std::vector<double> lambda_r{1.0, 0.8, 0.6};
    std::vector<double> lambda_sm{0.1, 0.08, 0.06};

    /// Throws ConfigError unless both lists have num_scales entries and all weights are >= 0.
    void validate(int num_scales) const;
};

struct ScaleLoss {
    double regression = 0.0;
    double smoothness = 0.0;
};

/// Edge-aware smoothness:
///   (1/N) sum |dx d| exp(-beta |dx E|) + |dy d| exp(-beta |dy E|)
/// over forward differences whose two endpoints are valid; N is the valid-pixel count.
double edge_aware_smoothness(const DisparityMap& d, const Grid& edges, double beta);
double edge_aware_smoothness(const DisparityMap& d, const EdgeMap& e, double beta);

struct EdgeAwareGradients {
    Grid disparity;
    Grid edges;
};
EdgeAwareGradients edge_aware_smoothness_backward(const DisparityMap& d, const Grid& edges,
                                                  double beta, double grad_out);

/// Mean |d - gt| over pixels valid in both maps.
double l1_regression(const DisparityMap& d, const DisparityMap& gt);
Grid l1_regression_backward(const DisparityMap& d, const DisparityMap& gt, double grad_out);

/// (1/N) sum rho(d[i,j] - d[i+1,j]) + rho(d[i,j] - d[i,j+1]), rho(x) = (x^2 + eps^2)^alpha.
/// At the last row/column the difference is zero; a term whose neighbor is invalid is dropped.
double charbonnier_smoothness(const DisparityMap& d, double alpha = 0.45, double eps = 1e-3);
Grid charbonnier_smoothness_backward(const DisparityMap& d, double alpha, double eps,
                                     double grad_out);

/// (1/N) sum |dxx d| exp(-|dxx I|) + |dyy d| exp(-|dyy I|) with central second differences;
/// multi-channel images use the channel mean of |dxx I|. A direction shorter than three
/// pixels contributes nothing; both directions shorter than three is an error.
double second_order_smoothness(const DisparityMap& d, const Grid& image);

struct SecondOrderGradients {
    Grid disparity;
    Grid image;
};
SecondOrderGradients second_order_smoothness_backward(const DisparityMap& d, const Grid& image,
                                                      double grad_out);

inline constexpr double kBceEpsilon = 1e-7;
inline constexpr double kBceBalance = 1.1;

/// Class-balanced binary cross-entropy (a sum, not a mean):
///   -sum [ w+ y log p + w- (1 - y) log(1 - p) ],  w+ = |Y-|/|Y|,  w- = balance |Y+|/|Y|
/// with p clamped into [eps, 1 - eps]. gt must be binary.
double class_balanced_bce(const Grid& pred, const EdgeMap& gt, double balance = kBceBalance);
double class_balanced_bce(const EdgeMap& pred, const EdgeMap& gt, double balance = kBceBalance);
Grid class_balanced_bce_backward(const Grid& pred, const EdgeMap& gt, double grad_out,
                                 double balance = kBceBalance);

/// C = sum_s lambda_r[s] L_r[s] + lambda_sm[s] L_sm[s].
double multiscale_total(std::span<const ScaleLoss> per_scale, const LossWeights& w);

} // namespace edgestereo::losses
