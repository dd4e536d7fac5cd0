#include "edgestereo/grid.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace edgestereo {

namespace {

void check_dims(int c, int h, int w) {
    if (c <= 0 || h <= 0 || w <= 0) {
        throw ShapeError("grid dimensions must be positive, got " + std::to_string(c) + "x" +
                         std::to_string(h) + "x" + std::to_string(w));
    }
}

// Source taps for one axis of a corner-aligned 2x upsampling.
struct Tap {
    int lo;
    int hi;
    double frac;
};

std::vector<Tap> upsample_taps(int n) {
    const int out = 2 * n;
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    for (int i = 0; i < out; ++i) {
        const double src = n == 1 ? 0.0 : static_cast<double>(i) * (n - 1) / (out - 1);
        const int lo = std::min(static_cast<int>(std::floor(src)), n - 1);
        const int hi = std::min(lo + 1, n - 1);
        taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
    }
    return taps;
}

} // namespace

Grid::Grid(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
    check_dims(channels, height, width);
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Grid::Grid(int channels, int height, int width, std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    check_dims(channels, height, width);
    if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
        throw ShapeError("grid data length does not match channels*height*width");
    }
}

bool Grid::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Grid& Grid::operator+=(const Grid& other) {
    if (!same_shape(other)) throw ShapeError("grid += with mismatched shapes");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Grid& Grid::operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
}

Mask::Mask(int height, int width, bool fill) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask operator&(const Mask& a, const Mask& b) {
    if (!a.same_resolution(b)) throw ShapeError("mask & with mismatched resolutions");
    Mask out = a;
    for (std::size_t i = 0; i < out.bits_.size(); ++i) out.bits_[i] = a.bits_[i] & b.bits_[i];
    return out;
}

DisparityMap::DisparityMap(Grid v, Mask m) : values(std::move(v)), valid(std::move(m)) {
    if (values.channels() != 1) throw ShapeError("disparity map must have one channel");
    if (!valid.same_resolution(values)) throw ShapeError("disparity mask resolution mismatch");
}

DisparityMap::DisparityMap(Grid v) : values(std::move(v)) {
    if (values.channels() != 1) throw ShapeError("disparity map must have one channel");
    valid = Mask(values.height(), values.width(), true);
}

EdgeMap::EdgeMap(Grid p) : probabilities(std::move(p)) {
    if (probabilities.channels() != 1) throw ShapeError("edge map must have one channel");
    for (double v : probabilities.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("edge probability outside [0, 1]");
    }
}

bool EdgeMap::is_binary() const noexcept {
    return std::all_of(probabilities.data().begin(), probabilities.data().end(),
                       [](double v) { return v == 0.0 || v == 1.0; });
}

Grid upsample2x(const Grid& g, bool scale_values) {
    if (g.empty()) throw ShapeError("upsample2x of an empty grid");
    const auto ty = upsample_taps(g.height());
    const auto tx = upsample_taps(g.width());
    const double k = scale_values ? 2.0 : 1.0;
    Grid out(g.channels(), 2 * g.height(), 2 * g.width());
    for (int c = 0; c < g.channels(); ++c) {
        for (int y = 0; y < out.height(); ++y) {
            const Tap& a = ty[static_cast<std::size_t>(y)];
            const double* r0 = g.row(c, a.lo);
            const double* r1 = g.row(c, a.hi);
            double* dst = out.row(c, y);
            for (int x = 0; x < out.width(); ++x) {
                const Tap& b = tx[static_cast<std::size_t>(x)];
                const double top = (1.0 - b.frac) * r0[b.lo] + b.frac * r0[b.hi];
                const double bot = (1.0 - b.frac) * r1[b.lo] + b.frac * r1[b.hi];
                dst[x] = k * ((1.0 - a.frac) * top + a.frac * bot);
            }
        }
    }
    return out;
}

Grid upsample2x_backward(const Grid& grad_out, int in_height, int in_width, bool scale_values) {
    if (grad_out.height() != 2 * in_height || grad_out.width() != 2 * in_width) {
        throw ShapeError("upsample2x_backward: gradient is not twice the input resolution");
    }
    const auto ty = upsample_taps(in_height);
    const auto tx = upsample_taps(in_width);
    const double k = scale_values ? 2.0 : 1.0;
    Grid grad(grad_out.channels(), in_height, in_width);
    for (int c = 0; c < grad_out.channels(); ++c) {
        for (int y = 0; y < grad_out.height(); ++y) {
            const Tap& a = ty[static_cast<std::size_t>(y)];
            double* r0 = grad.row(c, a.lo);
            double* r1 = grad.row(c, a.hi);
            const double* src = grad_out.row(c, y);
            for (int x = 0; x < grad_out.width(); ++x) {
                const Tap& b = tx[static_cast<std::size_t>(x)];
                const double go = k * src[x];
                const double top = (1.0 - a.frac) * go;
                const double bot = a.frac * go;
                r0[b.lo] += (1.0 - b.frac) * top;
                r0[b.hi] += b.frac * top;
                r1[b.lo] += (1.0 - b.frac) * bot;
                r1[b.hi] += b.frac * bot;
            }
        }
    }
    return grad;
}

Mask upsample2x(const Mask& m) {
    const auto ty = upsample_taps(m.height());
    const auto tx = upsample_taps(m.width());
    Mask out(2 * m.height(), 2 * m.width());
    for (int y = 0; y < out.height(); ++y) {
        const Tap& a = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < out.width(); ++x) {
            const Tap& b = tx[static_cast<std::size_t>(x)];
            bool ok = m(a.lo, b.lo);
            if (b.frac > 0.0) ok = ok && m(a.lo, b.hi);
            if (a.frac > 0.0) {
                ok = ok && m(a.hi, b.lo);
                if (b.frac > 0.0) ok = ok && m(a.hi, b.hi);
            }
            out.set(y, x, ok);
        }
    }
    return out;
}

std::pair<Grid, Grid> spatial_gradient(const Grid& g) {
    if (g.height() < 2 || g.width() < 2) {
        throw ShapeError("spatial_gradient needs height >= 2 and width >= 2");
    }
    Grid gx(g.channels(), g.height(), g.width());
    Grid gy(g.channels(), g.height(), g.width());
    for (int c = 0; c < g.channels(); ++c) {
        for (int y = 0; y < g.height(); ++y) {
            const double* r = g.row(c, y);
            double* dx = gx.row(c, y);
            for (int x = 0; x + 1 < g.width(); ++x) dx[x] = r[x + 1] - r[x];
            if (y + 1 < g.height()) {
                const double* below = g.row(c, y + 1);
                double* dy = gy.row(c, y);
                for (int x = 0; x < g.width(); ++x) dy[x] = below[x] - r[x];
            }
        }
    }
    return {std::move(gx), std::move(gy)};
}

Grid concat_channels(std::span<const Grid> gs) {
    if (gs.empty()) throw ShapeError("concat_channels of an empty list");
    int total = 0;
    for (const Grid& g : gs) {
        if (!g.same_resolution(gs.front())) throw ShapeError("concat_channels: resolution mismatch");
        total += g.channels();
    }
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(total) * gs.front().plane_size());
    for (const Grid& g : gs) data.insert(data.end(), g.data().begin(), g.data().end());
    return Grid(total, gs.front().height(), gs.front().width(), std::move(data));
}

Grid slice_channels(const Grid& g, int first, int count) {
    if (first < 0 || count <= 0 || first + count > g.channels()) {
        throw ShapeError("slice_channels: range outside the grid");
    }
    const auto begin = g.data().begin() + static_cast<std::ptrdiff_t>(first * g.plane_size());
    std::vector<double> data(begin, begin + static_cast<std::ptrdiff_t>(count * g.plane_size()));
    return Grid(count, g.height(), g.width(), std::move(data));
}

Grid avg_pool2x(const Grid& g) {
    if (g.height() < 2 || g.width() < 2) throw ShapeError("avg_pool2x needs at least 2x2");
    Grid out(g.channels(), g.height() / 2, g.width() / 2);
    for (int c = 0; c < g.channels(); ++c) {
        for (int y = 0; y < out.height(); ++y) {
            const double* r0 = g.row(c, 2 * y);
            const double* r1 = g.row(c, 2 * y + 1);
            double* dst = out.row(c, y);
            for (int x = 0; x < out.width(); ++x) {
                dst[x] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
            }
        }
    }
    return out;
}

Grid avg_pool2x_backward(const Grid& grad_out, int in_height, int in_width) {
    if (grad_out.height() != in_height / 2 || grad_out.width() != in_width / 2) {
        throw ShapeError("avg_pool2x_backward: resolution mismatch");
    }
    Grid grad(grad_out.channels(), in_height, in_width);
    for (int c = 0; c < grad_out.channels(); ++c) {
        for (int y = 0; y < grad_out.height(); ++y) {
            const double* src = grad_out.row(c, y);
            double* r0 = grad.row(c, 2 * y);
            double* r1 = grad.row(c, 2 * y + 1);
            for (int x = 0; x < grad_out.width(); ++x) {
                const double v = 0.25 * src[x];
                r0[2 * x] = v;
                r0[2 * x + 1] = v;
                r1[2 * x] = v;
                r1[2 * x + 1] = v;
            }
        }
    }
    return grad;
}

DisparityMap downsample_disparity(const DisparityMap& d) {
    if (d.height() < 2 || d.width() < 2) throw ShapeError("downsample_disparity needs at least 2x2");
    const int h = d.height() / 2;
    const int w = d.width() / 2;
    Grid values(1, h, w);
    Mask valid(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            int n = 0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    if (d.valid(2 * y + dy, 2 * x + dx)) {
                        sum += d(2 * y + dy, 2 * x + dx);
                        ++n;
                    }
                }
            }
            if (n > 0) {
                values(0, y, x) = 0.5 * sum / n;
                valid.set(y, x, true);
            }
        }
    }
    return {std::move(values), std::move(valid)};
}

} // namespace edgestereo
