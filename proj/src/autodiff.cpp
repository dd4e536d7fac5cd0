#include "edgestereo/autodiff.hpp"

#include "edgestereo/conv.hpp"
#include "edgestereo/error.hpp"
#include "edgestereo/stereo_ops.hpp"

#include <cmath>
#include <memory>

namespace edgestereo::ad {

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Grid value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Var Tape::record(Grid value, std::span<const Var> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (const Var& v : inputs) {
        if (v.tape != this) throw std::invalid_argument("Tape::record: input from another tape");
        n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(fn);
    return push(std::move(n));
}

Grid Tape::gradient(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.has_grad) return n.grad;
    return Grid(n.value.channels(), n.value.height(), n.value.width());
}

void Tape::accumulate(Var target, const Grid& g) {
    Node& n = nodes_.at(target.id);
    if (!n.requires_grad) return;
    if (!g.same_shape(n.value)) throw ShapeError("Tape::accumulate: gradient shape mismatch");
    if (n.has_grad) {
        n.grad += g;
    } else {
        n.grad = g;
        n.has_grad = true;
    }
}

void Tape::accumulate(Var target, Grid&& g) {
    Node& n = nodes_.at(target.id);
    if (!n.requires_grad) return;
    if (!g.same_shape(n.value)) throw ShapeError("Tape::accumulate: gradient shape mismatch");
    if (n.has_grad) {
        n.grad += g;
    } else {
        n.grad = std::move(g);
        n.has_grad = true;
    }
}

void Tape::backward(Var root) {
    const Grid& rv = value(root);
    if (rv.size() != 1) throw ShapeError("backward: root must be a scalar");
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Grid();
    }
    if (!nodes_[root.id].requires_grad) return;
    nodes_[root.id].grad = Grid(1, 1, 1, 1.0);
    nodes_[root.id].has_grad = true;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.backward) continue;
        // Inputs precede this node, so nothing accumulates into it past this point; only
        // leaves (which have no callback) keep their gradients.
        const Grid grad = std::move(n.grad);
        n.grad = Grid();
        n.has_grad = false;
        n.backward(*this, grad);
    }
}

double scalar(Var v) {
    const Grid& g = v.value();
    if (g.size() != 1) throw ShapeError("scalar: value is not 1x1x1");
    return g[0];
}

namespace {

DisparityMap as_disparity(const DispVar& d) { return DisparityMap(d.values.value(), d.valid); }

} // namespace

Var conv2d(Var x, Var weight, Var bias, int stride, int pad) {
    Tape& t = *x.tape;
    Grid out = conv2d_forward(x.value(), weight.value(), bias.value(), stride, pad);
    return t.record(std::move(out), {x, weight, bias},
                    [x, weight, bias, stride, pad](Tape& tape, const Grid& g) {
                        const bool ni = tape.requires_grad(x);
                        const bool np = tape.requires_grad(weight) || tape.requires_grad(bias);
                        ConvGradients grads = conv2d_backward(x.value(), weight.value(), g, stride,
                                                              pad, ni, np);
                        if (ni) tape.accumulate(x, std::move(grads.input));
                        if (np) {
                            tape.accumulate(weight, std::move(grads.weight));
                            tape.accumulate(bias, std::move(grads.bias));
                        }
                    });
}

Var deconv2d(Var x, Var weight, Var bias, int stride, int pad) {
    Tape& t = *x.tape;
    Grid out = deconv2d_forward(x.value(), weight.value(), bias.value(), stride, pad);
    return t.record(std::move(out), {x, weight, bias},
                    [x, weight, bias, stride, pad](Tape& tape, const Grid& g) {
                        const bool ni = tape.requires_grad(x);
                        const bool np = tape.requires_grad(weight) || tape.requires_grad(bias);
                        ConvGradients grads = deconv2d_backward(x.value(), weight.value(), g,
                                                                stride, pad, ni, np);
                        if (ni) tape.accumulate(x, std::move(grads.input));
                        if (np) {
                            tape.accumulate(weight, std::move(grads.weight));
                            tape.accumulate(bias, std::move(grads.bias));
                        }
                    });
}

Var relu(Var x) {
    Grid out = x.value();
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return x.tape->record(std::move(out), {x}, [x](Tape& tape, const Grid& g) {
        Grid gi = g;
        const Grid& xv = x.value();
        for (std::size_t i = 0; i < gi.size(); ++i) {
            if (!(xv[i] > 0.0)) gi[i] = 0.0;
        }
        tape.accumulate(x, std::move(gi));
    });
}

Var clamp_nonneg(Var x) {
    Grid out = x.value();
    for (double& v : out.data()) v = v >= 0.0 ? v : 0.0;
    return x.tape->record(std::move(out), {x}, [x](Tape& tape, const Grid& g) {
        Grid gi = g;
        const Grid& xv = x.value();
        for (std::size_t i = 0; i < gi.size(); ++i) {
            if (!(xv[i] >= 0.0)) gi[i] = 0.0;
        }
        tape.accumulate(x, std::move(gi));
    });
}

Var sigmoid(Var x) {
    Grid out = x.value();
    for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
    return x.tape->record(std::move(out), {x}, [x](Tape& tape, const Grid& g) {
        Grid gi = g;
        const Grid& xv = x.value();
        for (std::size_t i = 0; i < gi.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-xv[i]));
            gi[i] *= s * (1.0 - s);
        }
        tape.accumulate(x, std::move(gi));
    });
}

Var add(Var a, Var b) {
    if (!a.value().same_shape(b.value())) throw ShapeError("add: shape mismatch");
    Grid out = a.value();
    out += b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tape, const Grid& g) {
        tape.accumulate(a, g);
        tape.accumulate(b, g);
    });
}

Var scale(Var a, double s) {
    Grid out = a.value();
    out *= s;
    return a.tape->record(std::move(out), {a}, [a, s](Tape& tape, const Grid& g) {
        Grid gi = g;
        gi *= s;
        tape.accumulate(a, std::move(gi));
    });
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().data()) total += v;
    return a.tape->record(Grid(1, 1, 1, total), {a}, [a](Tape& tape, const Grid& g) {
        const Grid& av = a.value();
        tape.accumulate(a, Grid(av.channels(), av.height(), av.width(), g[0]));
    });
}

Var inner(Var a, const Grid& weights) {
    if (!a.value().same_shape(weights)) throw ShapeError("inner: shape mismatch");
    double total = 0.0;
    const Grid& av = a.value();
    for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * weights[i];
    auto w = std::make_shared<const Grid>(weights);
    return a.tape->record(Grid(1, 1, 1, total), {a}, [a, w](Tape& tape, const Grid& g) {
        Grid gi = *w;
        gi *= g[0];
        tape.accumulate(a, std::move(gi));
    });
}

Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights) {
    if (scalars.empty() || scalars.size() != weights.size()) {
        throw ShapeError("weighted_sum: need matching, nonempty scalar and weight lists");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < scalars.size(); ++i) total += weights[i] * scalar(scalars[i]);
    std::vector<Var> inputs(scalars.begin(), scalars.end());
    std::vector<double> w(weights.begin(), weights.end());
    return scalars.front().tape->record(
        Grid(1, 1, 1, total), inputs, [inputs, w](Tape& tape, const Grid& g) {
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                tape.accumulate(inputs[i], Grid(1, 1, 1, w[i] * g[0]));
            }
        });
}

Var concat_channels(std::span<const Var> xs) {
    if (xs.empty()) throw ShapeError("concat_channels of an empty list");
    std::vector<Grid> values;
    values.reserve(xs.size());
    for (const Var& v : xs) values.push_back(v.value());
    Grid out = edgestereo::concat_channels(values);
    std::vector<Var> inputs(xs.begin(), xs.end());
    return xs.front().tape->record(std::move(out), inputs, [inputs](Tape& tape, const Grid& g) {
        int first = 0;
        for (const Var& v : inputs) {
            const int c = v.value().channels();
            if (tape.requires_grad(v)) tape.accumulate(v, slice_channels(g, first, c));
            first += c;
        }
    });
}

Var upsample2x(Var x, bool scale_values) {
    Grid out = edgestereo::upsample2x(x.value(), scale_values);
    return x.tape->record(std::move(out), {x}, [x, scale_values](Tape& tape, const Grid& g) {
        tape.accumulate(x, upsample2x_backward(g, x.value().height(), x.value().width(), scale_values));
    });
}

Var avg_pool2x(Var x) {
    Grid out = edgestereo::avg_pool2x(x.value());
    return x.tape->record(std::move(out), {x}, [x](Tape& tape, const Grid& g) {
        tape.accumulate(x, avg_pool2x_backward(g, x.value().height(), x.value().width()));
    });
}

Var correlate_1d(Var left, Var right, int max_disp) {
    Grid out = edgestereo::correlate_1d(left.value(), right.value(), max_disp);
    return left.tape->record(std::move(out), {left, right}, [left, right](Tape& tape, const Grid& g) {
        auto [gl, gr] = correlate_1d_backward(left.value(), right.value(), g);
        tape.accumulate(left, std::move(gl));
        tape.accumulate(right, std::move(gr));
    });
}

WarpVar warp_right_to_left(Var right_feat, const DispVar& disp) {
    const DisparityMap d = as_disparity(disp);
    WarpResult r = edgestereo::warp_right_to_left(right_feat.value(), d);
    auto mask = std::make_shared<const Mask>(disp.valid);
    Var dv = disp.values;
    Var out = right_feat.tape->record(
        std::move(r.values), {right_feat, dv}, [right_feat, dv, mask](Tape& tape, const Grid& g) {
            WarpGradients wg = warp_right_to_left_backward(
                right_feat.value(), DisparityMap(dv.value(), *mask), g);
            tape.accumulate(right_feat, std::move(wg.features));
            tape.accumulate(dv, std::move(wg.disparity));
        });
    return {out, std::move(r.valid)};
}

DispVar residual_compose(const DispVar& coarse, Var residual) {
    const Grid& rv = residual.value();
    const Grid& cv = coarse.values.value();
    if (rv.channels() != 1 || rv.height() != 2 * cv.height() || rv.width() != 2 * cv.width()) {
        throw ShapeError("residual_compose: residual must be twice the coarse resolution");
    }
    const DisparityMap composed =
        edgestereo::residual_compose(as_disparity(coarse), DisparityMap(rv));
    Var c = coarse.values;
    Var out = residual.tape->record(composed.values, {c, residual}, [c, residual](Tape& tape, const Grid& g) {
        if (tape.requires_grad(c)) {
            tape.accumulate(c, upsample2x_backward(g, c.value().height(), c.value().width(), true));
        }
        tape.accumulate(residual, g);
    });
    return {out, composed.valid};
}

Var edge_aware_smoothness(const DispVar& d, Var edges, double beta) {
    const double v = losses::edge_aware_smoothness(as_disparity(d), edges.value(), beta);
    auto mask = std::make_shared<const Mask>(d.valid);
    Var dv = d.values;
    return dv.tape->record(Grid(1, 1, 1, v), {dv, edges}, [dv, edges, mask, beta](Tape& tape, const Grid& g) {
        auto grads = losses::edge_aware_smoothness_backward(DisparityMap(dv.value(), *mask),
                                                            edges.value(), beta, g[0]);
        tape.accumulate(dv, std::move(grads.disparity));
        tape.accumulate(edges, std::move(grads.edges));
    });
}

Var l1_regression(const DispVar& d, const DisparityMap& gt) {
    const double v = losses::l1_regression(as_disparity(d), gt);
    auto mask = std::make_shared<const Mask>(d.valid);
    auto target = std::make_shared<const DisparityMap>(gt);
    Var dv = d.values;
    return dv.tape->record(Grid(1, 1, 1, v), {dv}, [dv, mask, target](Tape& tape, const Grid& g) {
        tape.accumulate(dv, losses::l1_regression_backward(DisparityMap(dv.value(), *mask), *target, g[0]));
    });
}

Var charbonnier_smoothness(const DispVar& d, double alpha, double eps) {
    const double v = losses::charbonnier_smoothness(as_disparity(d), alpha, eps);
    auto mask = std::make_shared<const Mask>(d.valid);
    Var dv = d.values;
    return dv.tape->record(Grid(1, 1, 1, v), {dv}, [dv, mask, alpha, eps](Tape& tape, const Grid& g) {
        tape.accumulate(dv, losses::charbonnier_smoothness_backward(DisparityMap(dv.value(), *mask),
                                                                    alpha, eps, g[0]));
    });
}

Var second_order_smoothness(const DispVar& d, Var image) {
    const double v = losses::second_order_smoothness(as_disparity(d), image.value());
    auto mask = std::make_shared<const Mask>(d.valid);
    Var dv = d.values;
    return dv.tape->record(Grid(1, 1, 1, v), {dv, image}, [dv, image, mask](Tape& tape, const Grid& g) {
        auto grads = losses::second_order_smoothness_backward(DisparityMap(dv.value(), *mask),
                                                              image.value(), g[0]);
        tape.accumulate(dv, std::move(grads.disparity));
        tape.accumulate(image, std::move(grads.image));
    });
}

Var class_balanced_bce(Var pred, const EdgeMap& gt) {
    const double v = losses::class_balanced_bce(pred.value(), gt);
    auto target = std::make_shared<const EdgeMap>(gt);
    return pred.tape->record(Grid(1, 1, 1, v), {pred}, [pred, target](Tape& tape, const Grid& g) {
        tape.accumulate(pred, losses::class_balanced_bce_backward(pred.value(), *target, g[0]));
    });
}

Var multiscale_total(std::span<const ScaleLossVar> per_scale, const losses::LossWeights& w) {
    std::vector<losses::ScaleLoss> values;
    std::vector<Var> inputs;
    for (const ScaleLossVar& s : per_scale) {
        values.push_back({scalar(s.regression), scalar(s.smoothness)});
        inputs.push_back(s.regression);
        inputs.push_back(s.smoothness);
    }
    const double total = losses::multiscale_total(values, w);
    if (inputs.empty()) throw ShapeError("multiscale_total: no scales");
    return inputs.front().tape->record(Grid(1, 1, 1, total), inputs, [inputs, w](Tape& tape, const Grid& g) {
        for (std::size_t s = 0; s < inputs.size() / 2; ++s) {
            tape.accumulate(inputs[2 * s], Grid(1, 1, 1, w.lambda_r[s] * g[0]));
            tape.accumulate(inputs[2 * s + 1], Grid(1, 1, 1, w.lambda_sm[s] * g[0]));
        }
    });
}

} // namespace edgestereo::ad
