#pragma once

#include "edgestereo/grid.hpp"
#include "edgestereo/losses.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace edgestereo::ad {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Grid& value() const;
};

/// A differentiable disparity map: taped values plus a (non-differentiable) validity mask.
struct DispVar {
    Var values;
    Mask valid;
};

using BackwardFn = std::function<void(Tape&, const Grid& grad_out)>;

/// Records operations in execution order; backward() walks them in reverse, visiting each
/// node once. Nodes whose inputs do not require gradients are never differentiated, so
/// frozen subgraphs cost nothing in the backward pass.
class Tape {
public:
    Var constant(Grid value) { return leaf(std::move(value), false); }
    Var variable(Grid value) { return leaf(std::move(value), true); }
    Var leaf(Grid value, bool requires_grad);

    /// Appends a node computed from `inputs`. `fn` receives the node's output gradient and
    /// must route it to the inputs through accumulate().
    Var record(Grid value, std::span<const Var> inputs, BackwardFn fn);
    Var record(Grid value, std::initializer_list<Var> inputs, BackwardFn fn) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                      std::move(fn));
    }

    const Grid& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient accumulated into leaf v by the last backward(); zeros when none reached it.
    /// Interior gradients are released during the pass.
    Grid gradient(Var v) const;

    /// Reverse pass from a 1x1x1 root. Throws ShapeError for non-scalar roots.
    void backward(Var root);

    void accumulate(Var target, const Grid& g);
    void accumulate(Var target, Grid&& g);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Grid value;
        Grid grad;
        bool requires_grad = false;
        bool has_grad = false;
        BackwardFn backward;
    };

    Var push(Node node);

    std::deque<Node> nodes_;
};

inline const Grid& Var::value() const { return tape->value(*this); }

double scalar(Var v);

// Layers. Convolution weights are stored as a Grid of shape (out*in, k, k) indexed
// [out][in]; transposed-convolution weights as (in*out, k, k) indexed [in][out]. Biases are
// (out, 1, 1).
Var conv2d(Var x, Var weight, Var bias, int stride, int pad);
Var deconv2d(Var x, Var weight, Var bias, int stride, int pad);
Var relu(Var x);
Var sigmoid(Var x);
/// max(x, 0); unlike relu the gradient passes at exactly zero, so zero-initialized
/// prediction heads still learn.
Var clamp_nonneg(Var x);

Var add(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);
/// sum_i a[i] * weights[i] for a constant weight grid of a's shape.
Var inner(Var a, const Grid& weights);
Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);

Var concat_channels(std::span<const Var> xs);
Var upsample2x(Var x, bool scale_values);
Var avg_pool2x(Var x);

Var correlate_1d(Var left, Var right, int max_disp);
struct WarpVar {
    Var values;
    Mask valid;
};
WarpVar warp_right_to_left(Var right_feat, const DispVar& disp);
DispVar residual_compose(const DispVar& coarse, Var residual);

Var edge_aware_smoothness(const DispVar& d, Var edges, double beta);
Var l1_regression(const DispVar& d, const DisparityMap& gt);
Var charbonnier_smoothness(const DispVar& d, double alpha = 0.45, double eps = 1e-3);
Var second_order_smoothness(const DispVar& d, Var image);
Var class_balanced_bce(Var pred, const EdgeMap& gt);

struct ScaleLossVar {
    Var regression;
    Var smoothness;
};
Var multiscale_total(std::span<const ScaleLossVar> per_scale, const losses::LossWeights& w);

} // namespace edgestereo::ad
