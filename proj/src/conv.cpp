#include "edgestereo/conv.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>

namespace edgestereo {

namespace {

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
int ceil_div(int a, int b) { return -floor_div(-a, b); }

// Output index range [lo, hi] whose input tap o*stride + k - pad lands inside [0, n).
struct Range {
    int lo;
    int hi;
};

Range conv_range(int n_in, int n_out, int k, int stride, int pad) {
    return {std::max(0, ceil_div(pad - k, stride)),
            std::min(n_out - 1, floor_div(n_in - 1 + pad - k, stride))};
}

ConvGeometry check_geometry(const Grid& x, const Grid& weight, int stride, int pad) {
    if (weight.height() != weight.width()) throw ShapeError("conv: kernel must be square");
    if (stride < 1 || pad < 0) throw ShapeError("conv: invalid stride or padding");
    if (weight.channels() % x.channels() != 0) {
        throw ShapeError("conv: weight channels are not a multiple of the input channels");
    }
    return {x.channels(), weight.channels() / x.channels(), weight.height(), stride, pad};
}

void check_bias(const Grid& bias, int out_channels) {
    if (bias.channels() != out_channels || bias.height() != 1 || bias.width() != 1) {
        throw ShapeError("conv: bias must be (out, 1, 1)");
    }
}

} // namespace

ConvGeometry conv_geometry(const Grid& x, const Grid& weight, const Grid& bias, int stride, int pad) {
    ConvGeometry g = check_geometry(x, weight, stride, pad);
    check_bias(bias, g.out_channels);
    return g;
}

Grid conv2d_forward(const Grid& x, const Grid& weight, const Grid& bias, int stride, int pad) {
    const ConvGeometry g = conv_geometry(x, weight, bias, stride, pad);
    const int ho = (x.height() + 2 * pad - g.kernel) / stride + 1;
    const int wo = (x.width() + 2 * pad - g.kernel) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");
    Grid out(g.out_channels, ho, wo);
    for (int o = 0; o < g.out_channels; ++o) {
        const double b = bias[static_cast<std::size_t>(o)];
        for (double& v : out.plane(o)) v = b;
        for (int i = 0; i < g.in_channels; ++i) {
            const int wc = o * g.in_channels + i;
            for (int ky = 0; ky < g.kernel; ++ky) {
                const Range ry = conv_range(x.height(), ho, ky, stride, pad);
                for (int kx = 0; kx < g.kernel; ++kx) {
                    const double wv = weight(wc, ky, kx);
                    const Range rx = conv_range(x.width(), wo, kx, stride, pad);
                    const int off = kx - pad;
                    for (int y = ry.lo; y <= ry.hi; ++y) {
                        const double* in = x.row(i, y * stride + ky - pad);
                        double* dst = out.row(o, y);
                        if (stride == 1) {
                            for (int xo = rx.lo; xo <= rx.hi; ++xo) dst[xo] += wv * in[xo + off];
                        } else {
                            for (int xo = rx.lo; xo <= rx.hi; ++xo) {
                                dst[xo] += wv * in[xo * stride + off];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

ConvGradients conv2d_backward(const Grid& x, const Grid& weight, const Grid& grad_out, int stride,
                              int pad, bool need_input, bool need_params) {
    const ConvGeometry g = check_geometry(x, weight, stride, pad);
    const int ho = grad_out.height();
    const int wo = grad_out.width();
    if (grad_out.channels() != g.out_channels) throw ShapeError("conv2d_backward: channel mismatch");
    ConvGradients grads;
    if (need_input) grads.input = Grid(x.channels(), x.height(), x.width());
    if (need_params) {
        grads.weight = Grid(weight.channels(), weight.height(), weight.width());
        grads.bias = Grid(g.out_channels, 1, 1);
        for (int o = 0; o < g.out_channels; ++o) {
            double s = 0.0;
            for (double v : grad_out.plane(o)) s += v;
            grads.bias[static_cast<std::size_t>(o)] = s;
        }
    }
    for (int o = 0; o < g.out_channels; ++o) {
        for (int i = 0; i < g.in_channels; ++i) {
            const int wc = o * g.in_channels + i;
            for (int ky = 0; ky < g.kernel; ++ky) {
                const Range ry = conv_range(x.height(), ho, ky, stride, pad);
                for (int kx = 0; kx < g.kernel; ++kx) {
                    const Range rx = conv_range(x.width(), wo, kx, stride, pad);
                    const int off = kx - pad;
                    const double wv = weight(wc, ky, kx);
                    double acc = 0.0;
                    for (int y = ry.lo; y <= ry.hi; ++y) {
                        const int iy = y * stride + ky - pad;
                        const double* go = grad_out.row(o, y);
                        if (need_params) {
                            const double* in = x.row(i, iy);
                            for (int xo = rx.lo; xo <= rx.hi; ++xo) {
                                acc += go[xo] * in[xo * stride + off];
                            }
                        }
                        if (need_input) {
                            double* gi = grads.input.row(i, iy);
                            if (stride == 1) {
                                for (int xo = rx.lo; xo <= rx.hi; ++xo) gi[xo + off] += wv * go[xo];
                            } else {
                                for (int xo = rx.lo; xo <= rx.hi; ++xo) {
                                    gi[xo * stride + off] += wv * go[xo];
                                }
                            }
                        }
                    }
                    if (need_params) grads.weight(wc, ky, kx) = acc;
                }
            }
        }
    }
    return grads;
}

Grid deconv2d_forward(const Grid& x, const Grid& weight, const Grid& bias, int stride, int pad) {
    const ConvGeometry g = conv_geometry(x, weight, bias, stride, pad);
    const int ho = (x.height() - 1) * stride - 2 * pad + g.kernel;
    const int wo = (x.width() - 1) * stride - 2 * pad + g.kernel;
    if (ho <= 0 || wo <= 0) throw ShapeError("deconv2d: empty output");
    Grid out(g.out_channels, ho, wo);
    for (int o = 0; o < g.out_channels; ++o) {
        const double b = bias[static_cast<std::size_t>(o)];
        for (double& v : out.plane(o)) v = b;
    }
    // out(o, y*s + ky - p, x*s + kx - p) += w[i][o][ky][kx] * in(i, y, x); the valid input
    // range mirrors conv_range with the roles of input and output swapped.
    for (int i = 0; i < g.in_channels; ++i) {
        for (int o = 0; o < g.out_channels; ++o) {
            const int wc = i * g.out_channels + o;
            for (int ky = 0; ky < g.kernel; ++ky) {
                const Range ry = conv_range(ho, x.height(), ky, stride, pad);
                for (int kx = 0; kx < g.kernel; ++kx) {
                    const Range rx = conv_range(wo, x.width(), kx, stride, pad);
                    const double wv = weight(wc, ky, kx);
                    const int off = kx - pad;
                    for (int y = ry.lo; y <= ry.hi; ++y) {
                        const double* in = x.row(i, y);
                        double* dst = out.row(o, y * stride + ky - pad);
                        for (int xi = rx.lo; xi <= rx.hi; ++xi) dst[xi * stride + off] += wv * in[xi];
                    }
                }
            }
        }
    }
    return out;
}

ConvGradients deconv2d_backward(const Grid& x, const Grid& weight, const Grid& grad_out,
                                int stride, int pad, bool need_input, bool need_params) {
    const ConvGeometry g = check_geometry(x, weight, stride, pad);
    if (grad_out.channels() != g.out_channels) {
        throw ShapeError("deconv2d_backward: channel mismatch");
    }
    const int ho = grad_out.height();
    const int wo = grad_out.width();
    ConvGradients grads;
    if (need_input) grads.input = Grid(x.channels(), x.height(), x.width());
    if (need_params) {
        grads.weight = Grid(weight.channels(), weight.height(), weight.width());
        grads.bias = Grid(g.out_channels, 1, 1);
        for (int o = 0; o < g.out_channels; ++o) {
            double s = 0.0;
            for (double v : grad_out.plane(o)) s += v;
            grads.bias[static_cast<std::size_t>(o)] = s;
        }
    }
    for (int i = 0; i < g.in_channels; ++i) {
        for (int o = 0; o < g.out_channels; ++o) {
            const int wc = i * g.out_channels + o;
            for (int ky = 0; ky < g.kernel; ++ky) {
                const Range ry = conv_range(ho, x.height(), ky, stride, pad);
                for (int kx = 0; kx < g.kernel; ++kx) {
                    const Range rx = conv_range(wo, x.width(), kx, stride, pad);
                    const double wv = weight(wc, ky, kx);
                    const int off = kx - pad;
                    double acc = 0.0;
                    for (int y = ry.lo; y <= ry.hi; ++y) {
                        const double* go = grad_out.row(o, y * stride + ky - pad);
                        if (need_params) {
                            const double* in = x.row(i, y);
                            for (int xi = rx.lo; xi <= rx.hi; ++xi) acc += in[xi] * go[xi * stride + off];
                        }
                        if (need_input) {
                            double* gi = grads.input.row(i, y);
                            for (int xi = rx.lo; xi <= rx.hi; ++xi) gi[xi] += wv * go[xi * stride + off];
                        }
                    }
                    if (need_params) grads.weight(wc, ky, kx) = acc;
                }
            }
        }
    }
    return grads;
}

} // namespace edgestereo
