#include "edgestereo/gradcheck.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace edgestereo::ad {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(const ScalarFn& f, const Grid& x, double h, double tol) {
    Tape tape;
    Var xv = tape.variable(x);
    Var root = f(tape, xv);
    tape.backward(root);
    const Grid analytic = tape.gradient(xv);

    auto eval = [&](const Grid& point) {
        Tape t;
        return scalar(f(t, t.variable(point)));
    };

    GradcheckReport report;
    Grid probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = eval(probe);
        probe[i] = x[i] - h;
        const double down = eval(probe);
        probe[i] = x[i];
        CoordinateCheck c;
        c.index = i;
        c.analytic = analytic[i];
        c.numeric = (up - down) / (2.0 * h);
        c.rel_error = relative_error(c.analytic, c.numeric);
        c.pass = c.rel_error <= tol;
        report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
        report.passed = report.passed && c.pass;
        report.coordinates.push_back(c);
    }
    return report;
}

namespace {

using Rng = std::mt19937_64;

// Kinks (|.|, relu, bilinear cell borders) are kept at least this far from every sample.
constexpr double kMargin = 1e-3;

Grid uniform(Rng& rng, int c, int h, int w, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Grid g(c, h, w);
    for (double& v : g.data()) v = u(rng);
    return g;
}

// Uniform values in [lo, hi] whose magnitude stays above kMargin.
Grid away_from_zero(Rng& rng, int c, int h, int w, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Grid g(c, h, w);
    for (double& v : g.data()) {
        do {
            v = u(rng);
        } while (std::abs(v) < kMargin);
    }
    return g;
}

Mask random_mask(Rng& rng, int h, int w, double p_valid) {
    std::bernoulli_distribution b(p_valid);
    Mask m(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m.set(y, x, b(rng));
    }
    m.set(0, 0, true);
    return m;
}

bool forward_differences_clear(const Grid& g) {
    auto [gx, gy] = spatial_gradient(g);
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            if (x + 1 < g.width() && std::abs(gx(0, y, x)) < kMargin) return false;
            if (y + 1 < g.height() && std::abs(gy(0, y, x)) < kMargin) return false;
        }
    }
    return true;
}

bool second_differences_clear(const Grid& g) {
    for (int c = 0; c < g.channels(); ++c) {
        for (int y = 0; y < g.height(); ++y) {
            for (int x = 0; x < g.width(); ++x) {
                if (x >= 1 && x + 1 < g.width() &&
                    std::abs(g(c, y, x - 1) - 2.0 * g(c, y, x) + g(c, y, x + 1)) < kMargin) {
                    return false;
                }
                if (y >= 1 && y + 1 < g.height() &&
                    std::abs(g(c, y - 1, x) - 2.0 * g(c, y, x) + g(c, y + 1, x)) < kMargin) {
                    return false;
                }
            }
        }
    }
    return true;
}

template <typename Pred>
Grid draw_until(Rng& rng, int c, int h, int w, double lo, double hi, Pred ok) {
    for (;;) {
        Grid g = uniform(rng, c, h, w, lo, hi);
        if (ok(g)) return g;
    }
}

// Disparities whose fractional part stays clear of bilinear cell borders.
Grid fractional_disparity(Rng& rng, int h, int w, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Grid g(1, h, w);
    for (double& v : g.data()) {
        double frac = 0.0;
        do {
            v = u(rng);
            frac = v - std::floor(v);
        } while (frac < 0.02 || frac > 0.98);
    }
    return g;
}

// One checked input: its name, the point, and the scalar function of it.
struct Probe {
    std::string wrt;
    Grid point;
    ScalarFn fn;
};

struct Input {
    std::string name;
    Grid value;
    bool differentiable = true;
};

using MultiOp = std::function<Var(Tape&, const std::vector<Var>&)>;

// One probe per differentiable input; the others are held constant. Non-scalar outputs are
// projected onto fixed random weights so each check covers the full Jacobian.
std::vector<Probe> probes_for(const std::vector<Input>& inputs, MultiOp op, Rng& rng) {
    Grid projection;
    {
        Tape t;
        std::vector<Var> vars;
        for (const Input& in : inputs) vars.push_back(t.constant(in.value));
        const Grid& out = op(t, vars).value();
        if (out.size() != 1) {
            projection = uniform(rng, out.channels(), out.height(), out.width(), -1.0, 1.0);
        }
    }
    std::vector<Probe> probes;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].differentiable) continue;
        probes.push_back({inputs[i].name, inputs[i].value,
                          [inputs, op, projection, i](Tape& t, Var v) {
                              std::vector<Var> vars;
                              for (std::size_t j = 0; j < inputs.size(); ++j) {
                                  vars.push_back(j == i ? v : t.constant(inputs[j].value));
                              }
                              Var out = op(t, vars);
                              return projection.empty() ? out : inner(out, projection);
                          }});
    }
    return probes;
}

using ProbeFactory = std::function<std::vector<Probe>(Rng&)>;

std::vector<Probe> conv_case(Rng& rng, int out_c, int k, int stride, int pad) {
    const int in_c = 2;
    return probes_for({{"input", uniform(rng, in_c, 5, 6, -1.0, 1.0)},
                       {"weight", uniform(rng, out_c * in_c, k, k, -0.5, 0.5)},
                       {"bias", uniform(rng, out_c, 1, 1, -0.5, 0.5)}},
                      [stride, pad](Tape&, const std::vector<Var>& v) {
                          return conv2d(v[0], v[1], v[2], stride, pad);
                      },
                      rng);
}

std::vector<Probe> conv2d_probes(Rng& rng) {
    // Alternate the supported geometries across points.
    std::uniform_int_distribution<int> pick(0, 2);
    switch (pick(rng)) {
    case 0: return conv_case(rng, 3, 3, 1, 1);
    case 1: return conv_case(rng, 3, 3, 2, 1);
    default: return conv_case(rng, 3, 1, 1, 0);
    }
}

std::vector<Probe> deconv2d_probes(Rng& rng) {
    const int in_c = 2;
    const int out_c = 2;
    return probes_for({{"input", uniform(rng, in_c, 3, 4, -1.0, 1.0)},
                       {"weight", uniform(rng, in_c * out_c, 4, 4, -0.5, 0.5)},
                       {"bias", uniform(rng, out_c, 1, 1, -0.5, 0.5)}},
                      [](Tape&, const std::vector<Var>& v) { return deconv2d(v[0], v[1], v[2], 2, 1); },
                      rng);
}

std::vector<Probe> relu_probes(Rng& rng) {
    return probes_for({{"input", away_from_zero(rng, 2, 4, 5, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) { return relu(v[0]); }, rng);
}

std::vector<Probe> clamp_probes(Rng& rng) {
    return probes_for({{"input", away_from_zero(rng, 1, 4, 5, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) { return clamp_nonneg(v[0]); }, rng);
}

std::vector<Probe> sigmoid_probes(Rng& rng) {
    return probes_for({{"input", uniform(rng, 2, 4, 5, -3.0, 3.0)}},
                      [](Tape&, const std::vector<Var>& v) { return sigmoid(v[0]); }, rng);
}

std::vector<Probe> upsample_probes(Rng& rng) {
    std::bernoulli_distribution flag(0.5);
    const bool scale_values = flag(rng);
    return probes_for({{"input", uniform(rng, 2, 3, 4, -1.0, 1.0)}},
                      [scale_values](Tape&, const std::vector<Var>& v) {
                          return upsample2x(v[0], scale_values);
                      },
                      rng);
}

std::vector<Probe> avg_pool_probes(Rng& rng) {
    return probes_for({{"input", uniform(rng, 2, 4, 6, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) { return avg_pool2x(v[0]); }, rng);
}

std::vector<Probe> concat_probes(Rng& rng) {
    return probes_for({{"first", uniform(rng, 2, 3, 4, -1.0, 1.0)},
                       {"second", uniform(rng, 1, 3, 4, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) { return concat_channels(v); }, rng);
}

std::vector<Probe> correlate_probes(Rng& rng) {
    return probes_for({{"left", uniform(rng, 3, 3, 6, -1.0, 1.0)},
                       {"right", uniform(rng, 3, 3, 6, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) { return correlate_1d(v[0], v[1], 3); },
                      rng);
}

std::vector<Probe> warp_probes(Rng& rng) {
    const Mask valid = random_mask(rng, 3, 6, 0.85);
    return probes_for({{"features", uniform(rng, 2, 3, 6, -1.0, 1.0)},
                       {"disparity", fractional_disparity(rng, 3, 6, 0.0, 3.5)}},
                      [valid](Tape&, const std::vector<Var>& v) {
                          return warp_right_to_left(v[0], DispVar{v[1], valid}).values;
                      },
                      rng);
}

std::vector<Probe> residual_compose_probes(Rng& rng) {
    return probes_for({{"coarse", uniform(rng, 1, 2, 3, 0.0, 3.0)},
                       {"residual", uniform(rng, 1, 4, 6, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) {
                          return residual_compose(DispVar{v[0], Mask(2, 3, true)}, v[1]).values;
                      },
                      rng);
}

std::vector<Probe> edge_aware_probes(Rng& rng) {
    const Mask valid = random_mask(rng, 4, 5, 0.85);
    const double beta = std::uniform_real_distribution<double>(0.5, 4.0)(rng);
    return probes_for({{"disparity", draw_until(rng, 1, 4, 5, 0.0, 4.0, forward_differences_clear)},
                       {"edges", draw_until(rng, 1, 4, 5, 0.0, 1.0, forward_differences_clear)}},
                      [valid, beta](Tape&, const std::vector<Var>& v) {
                          return edge_aware_smoothness(DispVar{v[0], valid}, v[1], beta);
                      },
                      rng);
}

std::vector<Probe> l1_probes(Rng& rng) {
    Grid d = uniform(rng, 1, 4, 5, 0.0, 4.0);
    Grid offset = away_from_zero(rng, 1, 4, 5, -1.0, 1.0);
    Grid gt_values = d;
    gt_values += offset;
    const DisparityMap gt(gt_values, random_mask(rng, 4, 5, 0.8));
    const Mask valid = random_mask(rng, 4, 5, 0.9);
    return probes_for({{"disparity", d}},
                      [gt, valid](Tape&, const std::vector<Var>& v) {
                          return l1_regression(DispVar{v[0], valid}, gt);
                      },
                      rng);
}

std::vector<Probe> charbonnier_probes(Rng& rng) {
    const Mask valid = random_mask(rng, 4, 5, 0.85);
    return probes_for({{"disparity", uniform(rng, 1, 4, 5, 0.0, 4.0)}},
                      [valid](Tape&, const std::vector<Var>& v) {
                          return charbonnier_smoothness(DispVar{v[0], valid}, 0.45, 1e-3);
                      },
                      rng);
}

std::vector<Probe> second_order_probes(Rng& rng) {
    const Mask valid = random_mask(rng, 4, 5, 0.9);
    return probes_for({{"disparity", draw_until(rng, 1, 4, 5, 0.0, 4.0, second_differences_clear)},
                       {"image", draw_until(rng, 2, 4, 5, 0.0, 1.0, second_differences_clear)}},
                      [valid](Tape&, const std::vector<Var>& v) {
                          return second_order_smoothness(DispVar{v[0], valid}, v[1]);
                      },
                      rng);
}

std::vector<Probe> bce_probes(Rng& rng) {
    Grid labels(1, 4, 5);
    std::bernoulli_distribution edge(0.3);
    for (double& v : labels.data()) v = edge(rng) ? 1.0 : 0.0;
    labels[0] = 1.0;
    labels[1] = 0.0;
    const EdgeMap gt(labels);
    return probes_for({{"prediction", uniform(rng, 1, 4, 5, 0.05, 0.95)}},
                      [gt](Tape&, const std::vector<Var>& v) { return class_balanced_bce(v[0], gt); },
                      rng);
}

std::vector<Probe> multiscale_probes(Rng& rng) {
    const int scales = 3;
    losses::LossWeights w;
    // Each per-scale term is a distinct linear functional of the checked vector.
    std::vector<Grid> selectors;
    for (int i = 0; i < 2 * scales; ++i) selectors.push_back(uniform(rng, 1, 1, 2 * scales, 0.0, 1.0));
    return probes_for({{"terms", uniform(rng, 1, 1, 2 * scales, 0.0, 2.0)}},
                      [selectors, w, scales](Tape&, const std::vector<Var>& v) {
                          std::vector<ScaleLossVar> per_scale;
                          for (int s = 0; s < scales; ++s) {
                              per_scale.push_back({inner(v[0], selectors[2 * s]),
                                                   inner(v[0], selectors[2 * s + 1])});
                          }
                          return multiscale_total(per_scale, w);
                      },
                      rng);
}

std::vector<Probe> add_probes(Rng& rng) {
    return probes_for({{"a", uniform(rng, 2, 3, 4, -1.0, 1.0)}, {"b", uniform(rng, 2, 3, 4, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); }, rng);
}

std::vector<Probe> scale_probes(Rng& rng) {
    const double k = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    return probes_for({{"input", uniform(rng, 2, 3, 4, -1.0, 1.0)}},
                      [k](Tape&, const std::vector<Var>& v) { return scale(v[0], k); }, rng);
}

std::vector<Probe> sum_probes(Rng& rng) {
    return probes_for({{"input", uniform(rng, 2, 3, 4, -1.0, 1.0)}},
                      [](Tape&, const std::vector<Var>& v) { return sum(v[0]); }, rng);
}

const std::map<std::string, ProbeFactory>& registry() {
    static const std::map<std::string, ProbeFactory> ops{
        {"conv2d", conv2d_probes},
        {"deconv2d", deconv2d_probes},
        {"relu", relu_probes},
        {"sigmoid", sigmoid_probes},
        {"clamp_nonneg", clamp_probes},
        {"upsample2x", upsample_probes},
        {"avg_pool2x", avg_pool_probes},
        {"concat_channels", concat_probes},
        {"correlate_1d", correlate_probes},
        {"warp_right_to_left", warp_probes},
        {"residual_compose", residual_compose_probes},
        {"edge_aware_smoothness", edge_aware_probes},
        {"l1_regression", l1_probes},
        {"charbonnier_smoothness", charbonnier_probes},
        {"second_order_smoothness", second_order_probes},
        {"class_balanced_bce", bce_probes},
        {"multiscale_total", multiscale_probes},
        {"add", add_probes},
        {"scale", scale_probes},
        {"sum", sum_probes},
    };
    return ops;
}

} // namespace

const std::vector<std::string>& differentiable_ops() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, factory] : registry()) out.push_back(name);
        return out;
    }();
    return names;
}

std::vector<OpCheckResult> check_op(const std::string& op, std::uint64_t seed, int points, double h,
                                    double tol) {
    const auto it = registry().find(op);
    if (it == registry().end()) throw std::invalid_argument("unsupported op: " + op);
    std::seed_seq seq{seed, static_cast<std::uint64_t>(std::hash<std::string>{}(op))};
    Rng rng(seq);
    std::vector<OpCheckResult> results;
    for (int p = 0; p < points; ++p) {
        for (Probe& probe : it->second(rng)) {
            auto found = std::find_if(results.begin(), results.end(),
                                      [&](const OpCheckResult& r) { return r.wrt == probe.wrt; });
            if (found == results.end()) {
                results.push_back({op, probe.wrt, 0, 0.0, true});
                found = std::prev(results.end());
            }
            const GradcheckReport report = gradcheck(probe.fn, probe.point, h, tol);
            found->points += 1;
            found->max_rel_error = std::max(found->max_rel_error, report.max_rel_error);
            found->passed = found->passed && report.passed;
        }
    }
    return results;
}

} // namespace edgestereo::ad
