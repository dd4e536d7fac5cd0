#include "edgestereo/stereo_ops.hpp"

#include "edgestereo/error.hpp"

#include <cmath>

namespace edgestereo {

namespace {

struct Sample {
    int x0;
    double frac;
};

// Sampling position x - d; returns false when outside [0, width - 1].
bool sample_position(int x, double d, int width, Sample& s) {
    const double xs = static_cast<double>(x) - d;
    if (!(xs >= 0.0 && xs <= static_cast<double>(width - 1))) return false;
    s.x0 = static_cast<int>(std::floor(xs));
    if (s.x0 > width - 1) s.x0 = width - 1;
    s.frac = xs - s.x0;
    return true;
}

} // namespace

CostVolume correlate_1d(const Grid& left, const Grid& right, int max_disp) {
    if (!left.same_shape(right)) throw ShapeError("correlate_1d: left/right shape mismatch");
    if (max_disp < 0 || max_disp >= left.width()) {
        throw ShapeError("correlate_1d: max displacement must be in [0, width)");
    }
    const int channels = left.channels();
    CostVolume out(max_disp + 1, left.height(), left.width());
    for (int d = 0; d <= max_disp; ++d) {
        for (int c = 0; c < channels; ++c) {
            for (int y = 0; y < left.height(); ++y) {
                const double* l = left.row(c, y);
                const double* r = right.row(c, y);
                double* o = out.row(d, y);
                for (int x = d; x < left.width(); ++x) o[x] += l[x] * r[x - d];
            }
        }
    }
    const double n = static_cast<double>(channels);
    for (double& v : out.data()) v /= n;
    return out;
}

std::pair<Grid, Grid> correlate_1d_backward(const Grid& left, const Grid& right,
                                            const CostVolume& grad_out) {
    if (!left.same_shape(right) || !grad_out.same_resolution(left)) {
        throw ShapeError("correlate_1d_backward: shape mismatch");
    }
    const double inv = 1.0 / static_cast<double>(left.channels());
    Grid gl(left.channels(), left.height(), left.width());
    Grid gr(left.channels(), left.height(), left.width());
    for (int d = 0; d < grad_out.channels(); ++d) {
        for (int c = 0; c < left.channels(); ++c) {
            for (int y = 0; y < left.height(); ++y) {
                const double* g = grad_out.row(d, y);
                const double* l = left.row(c, y);
                const double* r = right.row(c, y);
                double* dl = gl.row(c, y);
                double* dr = gr.row(c, y);
                for (int x = d; x < left.width(); ++x) {
                    const double gs = g[x] * inv;
                    dl[x] += gs * r[x - d];
                    dr[x - d] += gs * l[x];
                }
            }
        }
    }
    return {std::move(gl), std::move(gr)};
}

WarpResult warp_right_to_left(const Grid& right_feat, const DisparityMap& disp) {
    if (!right_feat.same_resolution(disp.values)) {
        throw ShapeError("warp_right_to_left: disparity resolution differs from features");
    }
    const int w = right_feat.width();
    WarpResult out{Grid(right_feat.channels(), right_feat.height(), w),
                   Mask(right_feat.height(), w, false)};
    for (int y = 0; y < right_feat.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            Sample s{};
            if (!disp.valid(y, x) || !sample_position(x, disp(y, x), w, s)) continue;
            out.valid.set(y, x, true);
            for (int c = 0; c < right_feat.channels(); ++c) {
                const double* r = right_feat.row(c, y);
                out.values(c, y, x) =
                    s.frac == 0.0 ? r[s.x0] : (1.0 - s.frac) * r[s.x0] + s.frac * r[s.x0 + 1];
            }
        }
    }
    return out;
}

WarpGradients warp_right_to_left_backward(const Grid& right_feat, const DisparityMap& disp,
                                          const Grid& grad_out) {
    if (!right_feat.same_resolution(disp.values) || !grad_out.same_shape(right_feat)) {
        throw ShapeError("warp_right_to_left_backward: shape mismatch");
    }
    const int w = right_feat.width();
    WarpGradients g{Grid(right_feat.channels(), right_feat.height(), w),
                    Grid(1, right_feat.height(), w)};
    for (int y = 0; y < right_feat.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            Sample s{};
            if (!disp.valid(y, x) || !sample_position(x, disp(y, x), w, s)) continue;
            double dd = 0.0;
            for (int c = 0; c < right_feat.channels(); ++c) {
                const double go = grad_out(c, y, x);
                const double* r = right_feat.row(c, y);
                double* gf = g.features.row(c, y);
                // d(sample)/d(xs) is the local slope; xs = x - d flips the sign.
                if (s.x0 + 1 < w) {
                    gf[s.x0] += (1.0 - s.frac) * go;
                    gf[s.x0 + 1] += s.frac * go;
                    dd -= go * (r[s.x0 + 1] - r[s.x0]);
                } else {
                    gf[s.x0] += go;
                    if (s.x0 > 0) dd -= go * (r[s.x0] - r[s.x0 - 1]);
                }
            }
            g.disparity(0, y, x) = dd;
        }
    }
    return g;
}

DisparityMap residual_compose(const DisparityMap& coarse, const DisparityMap& residual) {
    if (residual.height() != 2 * coarse.height() || residual.width() != 2 * coarse.width()) {
        throw ShapeError("residual_compose: residual must be twice the coarse resolution");
    }
    Grid values = upsample2x(coarse.values, true);
    values += residual.values;
    return {std::move(values), upsample2x(coarse.valid)};
}

} // namespace edgestereo
