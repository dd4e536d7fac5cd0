#include "edgestereo/sgm.hpp"

#include "edgestereo/dataio.hpp"
#include "edgestereo/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace edgestereo::sgm {

void SgmConfig::validate() const {
    if (max_disp < 0) throw ConfigError("max_disp must be >= 0");
    if (census_window % 2 == 0 || census_window < 3 || census_window > 7) {
        throw ConfigError("census_window must be odd and in [3, 7], got " + std::to_string(census_window));
    }
    if (p1 < 0.0 || p2 < 0.0 || (p1 >= p2 && !(p1 == 0.0 && p2 == 0.0))) {
        throw ConfigError("SGM penalties need 0 <= p1 < p2");
    }
    if (num_paths != 4 && num_paths != 8) throw ConfigError("num_paths must be 4 or 8");
    if (lr_check_threshold < 0.0) throw ConfigError("lr_check_threshold must be >= 0");
}

CensusImage census_transform(const Grid& image, int window) {
    if (image.channels() != 1) throw ShapeError("census_transform needs a 1-channel image");
    if (window % 2 == 0 || window < 3 || window > 7) {
        throw std::invalid_argument("census window must be odd and in [3, 7]");
    }
    const int h = image.height();
    const int w = image.width();
    const int r = window / 2;
    CensusImage out{h, w, window * window - 1, std::vector<std::uint64_t>(static_cast<std::size_t>(h) * w)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double center = image(0, y, x);
            std::uint64_t code = 0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int yy = y + dy;
                    const int xx = x + dx;
                    const bool inside = yy >= 0 && yy < h && xx >= 0 && xx < w;
                    code = (code << 1) | (inside && image(0, yy, xx) < center ? 1u : 0u);
                }
            }
            out.codes[static_cast<std::size_t>(y) * w + x] = code;
        }
    }
    return out;
}

CostVolume matching_cost(const CensusImage& left, const CensusImage& right, int max_disp) {
    if (left.height != right.height || left.width != right.width || left.bits != right.bits) {
        throw ShapeError("census images differ in shape or window");
    }
    if (max_disp < 0 || max_disp >= left.width) throw ShapeError("max_disp must be in [0, width)");
    CostVolume cost(max_disp + 1, left.height, left.width);
    for (int d = 0; d <= max_disp; ++d) {
        for (int y = 0; y < left.height; ++y) {
            for (int x = 0; x < left.width; ++x) {
                cost(d, y, x) = x - d >= 0 ? std::popcount(left(y, x) ^ right(y, x - d)) : left.bits;
            }
        }
    }
    return cost;
}

std::vector<std::pair<int, int>> path_directions(int num_paths) {
    std::vector<std::pair<int, int>> dirs{{0, 1}, {0, -1}, {1, 0}, {-1, 0}};
    if (num_paths == 8) {
        dirs.insert(dirs.end(), {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}});
    } else if (num_paths != 4) {
        throw ConfigError("num_paths must be 4 or 8");
    }
    return dirs;
}

namespace {

// Pixel-major cost layout: index (y * W + x) * ND + d.
std::vector<double> to_pixel_major(const CostVolume& cost) {
    const std::size_t nd = static_cast<std::size_t>(cost.channels());
    const std::size_t np = cost.plane_size();
    std::vector<double> out(np * nd);
    for (std::size_t d = 0; d < nd; ++d) {
        const auto plane = cost.plane(static_cast<int>(d));
        for (std::size_t p = 0; p < np; ++p) out[p * nd + d] = plane[p];
    }
    return out;
}

CostVolume from_pixel_major(const std::vector<double>& v, int nd, int h, int w) {
    CostVolume out(nd, h, w);
    const std::size_t np = out.plane_size();
    for (int d = 0; d < nd; ++d) {
        auto plane = out.plane(d);
        for (std::size_t p = 0; p < np; ++p) plane[p] = v[p * nd + d];
    }
    return out;
}

// Adds the path costs of direction (dy, dx) into `acc` (same layout as `cost`).
void accumulate_path(const std::vector<double>& cost, int nd, int h, int w, int dy, int dx, double p1,
                     double p2, std::vector<double>& acc) {
    std::vector<double> lr(cost.size());
    const int y_begin = dy >= 0 ? 0 : h - 1;
    const int y_step = dy >= 0 ? 1 : -1;
    const int x_begin = dx >= 0 ? 0 : w - 1;
    const int x_step = dx >= 0 ? 1 : -1;
    for (int y = y_begin; y >= 0 && y < h; y += y_step) {
        for (int x = x_begin; x >= 0 && x < w; x += x_step) {
            const std::size_t p = (static_cast<std::size_t>(y) * w + x) * nd;
            const int py = y - dy;
            const int px = x - dx;
            if (py < 0 || py >= h || px < 0 || px >= w) {
                for (int d = 0; d < nd; ++d) lr[p + d] = cost[p + d];
            } else {
                const std::size_t q = (static_cast<std::size_t>(py) * w + px) * nd;
                double prev_min = lr[q];
                for (int d = 1; d < nd; ++d) prev_min = std::min(prev_min, lr[q + d]);
                for (int d = 0; d < nd; ++d) {
                    double best = lr[q + d];
                    if (d > 0) best = std::min(best, lr[q + d - 1] + p1);
                    if (d + 1 < nd) best = std::min(best, lr[q + d + 1] + p1);
                    best = std::min(best, prev_min + p2);
                    lr[p + d] = cost[p + d] + best - prev_min;
                }
            }
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += lr[i];
}

} // namespace

CostVolume aggregate_path(const CostVolume& cost, int dy, int dx, double p1, double p2) {
    if (dy < -1 || dy > 1 || dx < -1 || dx > 1 || (dy == 0 && dx == 0)) {
        throw std::invalid_argument("path direction components must be in {-1, 0, 1}, not both 0");
    }
    const auto pm = to_pixel_major(cost);
    std::vector<double> acc(pm.size(), 0.0);
    accumulate_path(pm, cost.channels(), cost.height(), cost.width(), dy, dx, p1, p2, acc);
    return from_pixel_major(acc, cost.channels(), cost.height(), cost.width());
}

CostVolume aggregate_paths(const CostVolume& cost, const SgmConfig& cfg) {
    const auto pm = to_pixel_major(cost);
    std::vector<double> acc(pm.size(), 0.0);
    for (const auto& [dy, dx] : path_directions(cfg.num_paths)) {
        accumulate_path(pm, cost.channels(), cost.height(), cost.width(), dy, dx, cfg.p1, cfg.p2, acc);
    }
    return from_pixel_major(acc, cost.channels(), cost.height(), cost.width());
}

DisparityMap wta_subpixel(const CostVolume& aggregated, bool subpixel) {
    const int nd = aggregated.channels();
    const int h = aggregated.height();
    const int w = aggregated.width();
    Grid out(1, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = 0;
            for (int d = 1; d < nd; ++d) {
                if (aggregated(d, y, x) < aggregated(best, y, x)) best = d;
            }
            double value = best;
            if (subpixel && best > 0 && best + 1 < nd) {
                const double cm = aggregated(best - 1, y, x);
                const double c0 = aggregated(best, y, x);
                const double cp = aggregated(best + 1, y, x);
                if (cm > c0 && cp > c0) value += (cm - cp) / (2.0 * (cm - 2.0 * c0 + cp));
            }
            out(0, y, x) = value;
        }
    }
    return DisparityMap(std::move(out));
}

DisparityMap lr_consistency_check(const DisparityMap& left, const DisparityMap& right, double threshold) {
    if (!left.values.same_shape(right.values)) throw ShapeError("left/right disparity shapes differ");
    DisparityMap out = left;
    for (int y = 0; y < left.height(); ++y) {
        for (int x = 0; x < left.width(); ++x) {
            if (!left.valid(y, x)) continue;
            const double xr = std::round(x - left(y, x));
            bool ok = xr >= 0.0 && xr < left.width();
            if (ok) {
                const int xi = static_cast<int>(xr);
                ok = right.valid(y, xi) && std::abs(left(y, x) - right(y, xi)) <= threshold;
            }
            if (!ok) out.valid.set(y, x, false);
        }
    }
    return out;
}

Grid mirror(const Grid& g) {
    Grid out(g.channels(), g.height(), g.width());
    for (int c = 0; c < g.channels(); ++c) {
        for (int y = 0; y < g.height(); ++y) {
            const double* src = g.row(c, y);
            std::reverse_copy(src, src + g.width(), out.row(c, y));
        }
    }
    return out;
}

DisparityMap mirror(const DisparityMap& d) {
    Mask valid(d.height(), d.width());
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) valid.set(y, x, d.valid(y, d.width() - 1 - x));
    }
    return {mirror(d.values), std::move(valid)};
}

DisparityMap sgm_raw(const Grid& left, const Grid& right, const SgmConfig& cfg) {
    cfg.validate();
    if (!left.same_shape(right)) throw ShapeError("SGM inputs must share a shape");
    if (cfg.max_disp >= left.width()) throw ConfigError("max_disp must be smaller than the image width");
    const Grid gl = io::to_gray(left);
    const Grid gr = io::to_gray(right);
    const CostVolume cost =
        matching_cost(census_transform(gl, cfg.census_window), census_transform(gr, cfg.census_window), cfg.max_disp);
    return wta_subpixel(aggregate_paths(cost, cfg), cfg.subpixel);
}

DisparityMap sgm_right_view(const Grid& left, const Grid& right, const SgmConfig& cfg) {
    return mirror(sgm_raw(mirror(right), mirror(left), cfg));
}

DisparityMap run_sgm(const Grid& left, const Grid& right, const SgmConfig& cfg) {
    const DisparityMap dl = sgm_raw(left, right, cfg);
    const DisparityMap dr = sgm_right_view(left, right, cfg);
    return lr_consistency_check(dl, dr, cfg.lr_check_threshold);
}

} // namespace edgestereo::sgm
