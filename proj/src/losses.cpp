#include "edgestereo/losses.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace edgestereo::losses {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double valid_count(const DisparityMap& d) {
    const std::size_t n = d.valid.count();
    if (n == 0) throw std::domain_error("loss over a disparity map with no valid pixels");
    return static_cast<double>(n);
}

double charbonnier(double x, double alpha, double eps) {
    return std::pow(x * x + eps * eps, alpha);
}

double charbonnier_derivative(double x, double alpha, double eps) {
    if (x == 0.0) return 0.0;
    return 2.0 * alpha * x * std::pow(x * x + eps * eps, alpha - 1.0);
}

// Channel-mean absolute second difference of the image around (y, x) along one axis.
double image_curvature(const Grid& img, int y0, int x0, int y1, int x1, int y2, int x2) {
    double sum = 0.0;
    for (int c = 0; c < img.channels(); ++c) {
        sum += std::abs(img(c, y0, x0) - 2.0 * img(c, y1, x1) + img(c, y2, x2));
    }
    return sum / img.channels();
}

void check_second_order(const DisparityMap& d, const Grid& image) {
    if (!image.same_resolution(d.values)) {
        throw ShapeError("second_order_smoothness: image resolution differs from disparity");
    }
    if (d.width() < 3 && d.height() < 3) {
        throw ShapeError("second_order_smoothness needs a dimension of at least 3");
    }
}

} // namespace

void LossWeights::validate(int num_scales) const {
    if (static_cast<int>(lambda_r.size()) != num_scales ||
        static_cast<int>(lambda_sm.size()) != num_scales) {
        throw ConfigError("loss weight lists must have one entry per scale (" +
                          std::to_string(num_scales) + ")");
    }
    if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
    for (double v : lambda_r) {
        if (!(v >= 0.0)) throw ConfigError("lambda_r weights must be nonnegative");
    }
    for (double v : lambda_sm) {
        if (!(v >= 0.0)) throw ConfigError("lambda_sm weights must be nonnegative");
    }
}

double edge_aware_smoothness(const DisparityMap& d, const Grid& edges, double beta) {
    if (!edges.same_shape(d.values)) throw ShapeError("edge_aware_smoothness: shape mismatch");
    const double n = valid_count(d);
    double sum = 0.0;
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x)) continue;
            double term = 0.0;
            if (x + 1 < d.width() && d.valid(y, x + 1)) {
                term += std::abs(d(y, x + 1) - d(y, x)) *
                        std::exp(-beta * std::abs(edges(0, y, x + 1) - edges(0, y, x)));
            }
            if (y + 1 < d.height() && d.valid(y + 1, x)) {
                term += std::abs(d(y + 1, x) - d(y, x)) *
                        std::exp(-beta * std::abs(edges(0, y + 1, x) - edges(0, y, x)));
            }
            sum += term;
        }
    }
    return sum / n;
}

double edge_aware_smoothness(const DisparityMap& d, const EdgeMap& e, double beta) {
    return edge_aware_smoothness(d, e.probabilities, beta);
}

EdgeAwareGradients edge_aware_smoothness_backward(const DisparityMap& d, const Grid& edges,
                                                  double beta, double grad_out) {
    if (!edges.same_shape(d.values)) throw ShapeError("edge_aware_smoothness: shape mismatch");
    const double scale = grad_out / valid_count(d);
    EdgeAwareGradients g{Grid(1, d.height(), d.width()), Grid(1, d.height(), d.width())};
    auto pair_term = [&](int y0, int x0, int y1, int x1) {
        const double dd = d(y1, x1) - d(y0, x0);
        const double de = edges(0, y1, x1) - edges(0, y0, x0);
        const double w = std::exp(-beta * std::abs(de));
        const double gd = scale * sign(dd) * w;
        g.disparity(0, y1, x1) += gd;
        g.disparity(0, y0, x0) -= gd;
        const double ge = -scale * std::abs(dd) * w * beta * sign(de);
        g.edges(0, y1, x1) += ge;
        g.edges(0, y0, x0) -= ge;
    };
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x)) continue;
            if (x + 1 < d.width() && d.valid(y, x + 1)) pair_term(y, x, y, x + 1);
            if (y + 1 < d.height() && d.valid(y + 1, x)) pair_term(y, x, y + 1, x);
        }
    }
    return g;
}

double l1_regression(const DisparityMap& d, const DisparityMap& gt) {
    if (!d.values.same_shape(gt.values)) throw ShapeError("l1_regression: shape mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x) || !gt.valid(y, x)) continue;
            sum += std::abs(d(y, x) - gt(y, x));
            ++n;
        }
    }
    if (n == 0) throw std::domain_error("l1_regression: no jointly valid pixels");
    return sum / static_cast<double>(n);
}

Grid l1_regression_backward(const DisparityMap& d, const DisparityMap& gt, double grad_out) {
    if (!d.values.same_shape(gt.values)) throw ShapeError("l1_regression: shape mismatch");
    const Mask joint = d.valid & gt.valid;
    const std::size_t n = joint.count();
    if (n == 0) throw std::domain_error("l1_regression: no jointly valid pixels");
    const double scale = grad_out / static_cast<double>(n);
    Grid g(1, d.height(), d.width());
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (joint(y, x)) g(0, y, x) = scale * sign(d(y, x) - gt(y, x));
        }
    }
    return g;
}

double charbonnier_smoothness(const DisparityMap& d, double alpha, double eps) {
    const double n = valid_count(d);
    const double at_zero = charbonnier(0.0, alpha, eps);
    double sum = 0.0;
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x)) continue;
            double term = 0.0;
            if (y + 1 == d.height()) {
                term += at_zero;
            } else if (d.valid(y + 1, x)) {
                term += charbonnier(d(y, x) - d(y + 1, x), alpha, eps);
            }
            if (x + 1 == d.width()) {
                term += at_zero;
            } else if (d.valid(y, x + 1)) {
                term += charbonnier(d(y, x) - d(y, x + 1), alpha, eps);
            }
            sum += term;
        }
    }
    return sum / n;
}

Grid charbonnier_smoothness_backward(const DisparityMap& d, double alpha, double eps,
                                     double grad_out) {
    const double scale = grad_out / valid_count(d);
    Grid g(1, d.height(), d.width());
    auto pair_term = [&](int y0, int x0, int y1, int x1) {
        const double k = scale * charbonnier_derivative(d(y0, x0) - d(y1, x1), alpha, eps);
        g(0, y0, x0) += k;
        g(0, y1, x1) -= k;
    };
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x)) continue;
            if (y + 1 < d.height() && d.valid(y + 1, x)) pair_term(y, x, y + 1, x);
            if (x + 1 < d.width() && d.valid(y, x + 1)) pair_term(y, x, y, x + 1);
        }
    }
    return g;
}

double second_order_smoothness(const DisparityMap& d, const Grid& image) {
    check_second_order(d, image);
    const double n = valid_count(d);
    double sum = 0.0;
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x)) continue;
            double term = 0.0;
            if (x >= 1 && x + 1 < d.width() && d.valid(y, x - 1) && d.valid(y, x + 1)) {
                term += std::abs(d(y, x - 1) - 2.0 * d(y, x) + d(y, x + 1)) *
                        std::exp(-image_curvature(image, y, x - 1, y, x, y, x + 1));
            }
            if (y >= 1 && y + 1 < d.height() && d.valid(y - 1, x) && d.valid(y + 1, x)) {
                term += std::abs(d(y - 1, x) - 2.0 * d(y, x) + d(y + 1, x)) *
                        std::exp(-image_curvature(image, y - 1, x, y, x, y + 1, x));
            }
            sum += term;
        }
    }
    return sum / n;
}

SecondOrderGradients second_order_smoothness_backward(const DisparityMap& d, const Grid& image,
                                                      double grad_out) {
    check_second_order(d, image);
    const double scale = grad_out / valid_count(d);
    SecondOrderGradients g{Grid(1, d.height(), d.width()),
                           Grid(image.channels(), image.height(), image.width())};
    const double inv_c = 1.0 / image.channels();
    auto triple = [&](int y0, int x0, int y1, int x1, int y2, int x2) {
        const double s = d(y0, x0) - 2.0 * d(y1, x1) + d(y2, x2);
        const double w = std::exp(-image_curvature(image, y0, x0, y1, x1, y2, x2));
        const double gd = scale * sign(s) * w;
        g.disparity(0, y0, x0) += gd;
        g.disparity(0, y1, x1) -= 2.0 * gd;
        g.disparity(0, y2, x2) += gd;
        const double base = -scale * std::abs(s) * w * inv_c;
        for (int c = 0; c < image.channels(); ++c) {
            const double q = image(c, y0, x0) - 2.0 * image(c, y1, x1) + image(c, y2, x2);
            const double gi = base * sign(q);
            g.image(c, y0, x0) += gi;
            g.image(c, y1, x1) -= 2.0 * gi;
            g.image(c, y2, x2) += gi;
        }
    };
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x)) continue;
            if (x >= 1 && x + 1 < d.width() && d.valid(y, x - 1) && d.valid(y, x + 1)) {
                triple(y, x - 1, y, x, y, x + 1);
            }
            if (y >= 1 && y + 1 < d.height() && d.valid(y - 1, x) && d.valid(y + 1, x)) {
                triple(y - 1, x, y, x, y + 1, x);
            }
        }
    }
    return g;
}

namespace {

struct BceWeights {
    double pos;
    double neg;
};

BceWeights bce_weights(const Grid& pred, const EdgeMap& gt, double balance) {
    if (!pred.same_shape(gt.probabilities)) throw ShapeError("class_balanced_bce: shape mismatch");
    if (!gt.is_binary()) throw std::invalid_argument("class_balanced_bce: ground truth is not binary");
    double positives = 0.0;
    for (double v : gt.probabilities.data()) positives += v;
    const double total = static_cast<double>(gt.probabilities.size());
    return {(total - positives) / total, balance * positives / total};
}

} // namespace

double class_balanced_bce(const Grid& pred, const EdgeMap& gt, double balance) {
    const BceWeights w = bce_weights(pred, gt, balance);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], kBceEpsilon, 1.0 - kBceEpsilon);
        if (gt.probabilities[i] == 1.0) {
            if (w.pos != 0.0) sum += w.pos * std::log(p);
        } else if (w.neg != 0.0) {
            sum += w.neg * std::log(1.0 - p);
        }
    }
    return -sum;
}

double class_balanced_bce(const EdgeMap& pred, const EdgeMap& gt, double balance) {
    return class_balanced_bce(pred.probabilities, gt, balance);
}

Grid class_balanced_bce_backward(const Grid& pred, const EdgeMap& gt, double grad_out,
                                 double balance) {
    const BceWeights w = bce_weights(pred, gt, balance);
    Grid g(pred.channels(), pred.height(), pred.width());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred[i];
        if (!(p > kBceEpsilon && p < 1.0 - kBceEpsilon)) continue;
        g[i] = gt.probabilities[i] == 1.0 ? -grad_out * w.pos / p : grad_out * w.neg / (1.0 - p);
    }
    return g;
}

double multiscale_total(std::span<const ScaleLoss> per_scale, const LossWeights& w) {
    w.validate(static_cast<int>(per_scale.size()));
    double total = 0.0;
    for (std::size_t s = 0; s < per_scale.size(); ++s) {
        total += w.lambda_r[s] * per_scale[s].regression + w.lambda_sm[s] * per_scale[s].smoothness;
    }
    return total;
}

} // namespace edgestereo::losses
