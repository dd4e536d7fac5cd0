#pragma once

#include "edgestereo/grid.hpp"
#include "edgestereo/stereo_ops.hpp"

#include <cstdint>
#include <vector>

namespace edgestereo::sgm {

struct SgmConfig {
    int max_disp = 64;
    int census_window = 5;
    double p1 = 10.0;
    double p2 = 120.0;
    int num_paths = 8;
    double lr_check_threshold = 1.0;
    bool subpixel = true;
    /// Throws ConfigError unless p1 < p2 (or both zero), the window is odd in [3, 7] and
    /// num_paths is 4 or 8.
    void validate() const;
};

/// Census descriptors: one bitstring per pixel, bits = [neighbor < center] in row-major
/// window order with the center skipped (the first neighbor ends up in the highest bit).
/// Neighbors outside the image contribute a 0 bit.
struct CensusImage {
    int height = 0;
    int width = 0;
    int bits = 0;
    std::vector<std::uint64_t> codes;

    std::uint64_t operator()(int y, int x) const noexcept {
        return codes[static_cast<std::size_t>(y) * width + x];
    }
};

/// Requires a 1-channel image and an odd window in [3, 7].
CensusImage census_transform(const Grid& image, int window);

/// Hamming distances: cost(d, y, x) = popcount(L(y, x) ^ R(y, x - d)); displacements that
/// leave the image cost the maximum distance (the descriptor length).
CostVolume matching_cost(const CensusImage& left, const CensusImage& right, int max_disp);

/// Sum over the configured scanline directions r of
///   L_r(p, d) = C(p, d) + min(L_r(p-r, d), L_r(p-r, d±1) + P1, min_k L_r(p-r, k) + P2)
///               - min_k L_r(p-r, k),
/// with L_r(p, d) = C(p, d) when p - r lies outside the image.
CostVolume aggregate_paths(const CostVolume& cost, const SgmConfig& cfg);

/// Single-direction recurrence (dy, dx in {-1, 0, 1}); exposed for testing.
CostVolume aggregate_path(const CostVolume& cost, int dy, int dx, double p1, double p2);

/// Scanline directions used for 4 or 8 paths.
std::vector<std::pair<int, int>> path_directions(int num_paths);

/// Winner-take-all (first minimum) with optional parabola refinement
///   d* + (c- - c+) / (2 (c- - 2 c0 + c+)),
/// applied at interior minima whose two neighbors are strictly larger, so the offset stays
/// in (-0.5, 0.5). All pixels are valid.
DisparityMap wta_subpixel(const CostVolume& aggregated, bool subpixel = true);

/// Invalidates pixels with |d_L(x) - d_R(x')| > threshold, x' = round(x - d_L(x)), or whose
/// x' falls outside the image or on an invalid right pixel. Never revalidates a pixel.
DisparityMap lr_consistency_check(const DisparityMap& left, const DisparityMap& right, double threshold);

/// Census -> cost -> aggregation -> WTA for the left view, no consistency check.
DisparityMap sgm_raw(const Grid& left, const Grid& right, const SgmConfig& cfg);

/// Right-view disparity, computed by running sgm_raw on the mirrored, swapped pair and
/// mirroring the result back.
DisparityMap sgm_right_view(const Grid& left, const Grid& right, const SgmConfig& cfg);

/// Horizontal mirror of every channel.
Grid mirror(const Grid& g);
DisparityMap mirror(const DisparityMap& d);

/// Full pipeline: both views plus the left-right check. Multi-channel inputs are averaged
/// to gray first.
DisparityMap run_sgm(const Grid& left, const Grid& right, const SgmConfig& cfg);

} // namespace edgestereo::sgm
