#pragma once

#include "edgestereo/grid.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace edgestereo {

struct StereoSample {
    Grid left;
    Grid right;
    DisparityMap gt_disparity;
    std::optional<EdgeMap> gt_edges;
};

/// Axis-aligned rectangle in left-image coordinates.
struct Rect {
    int y0 = 0;
    int x0 = 0;
    int height = 0;
    int width = 0;
};

/// A fronto-parallel layer with an integer disparity. Layers listed later occlude earlier ones.
struct Layer {
    Rect rect;
    int disparity = 0;
};

/// Texture of the generated images. Each pixel is (1 - contrast) * u + contrast * level, where u
/// is uniform noise and level cycles through `levels` by layer index, so layer boundaries are
/// visible as intensity edges as well as disparity edges.
struct TextureConfig {
    int channels = 1;
    double contrast = 0.5;
    std::vector<double> levels{0.5, 0.0, 1.0};
};

/// Random-dot stereogram. layers[0] is the background and must cover the whole frame; every
/// disparity must lie in [0, width / 4). The right image satisfies right(y, x - d) = left(y, x)
/// for every left pixel visible in the right view; right pixels without a source get fresh
/// noise. Left pixels that are occluded or shifted out of frame are invalid in gt_disparity.
/// Throws ConfigError for bad layers.
StereoSample gen_random_dot_stereogram(int height, int width, std::uint64_t seed,
                                       std::span<const Layer> layers, const TextureConfig& texture = {});

/// Background with disparity in [2, 5] plus two rectangles (sides width/4 .. width/2) with
/// disparities in [background + 2, min(12, width/4 - 1)].
/// Throws ConfigError for frames smaller than 8x20.
std::vector<Layer> random_layers(int height, int width, std::uint64_t seed);

/// gen_random_dot_stereogram over random_layers with a seed derived from `seed`.
StereoSample gen_default_sample(int height, int width, std::uint64_t seed, const TextureConfig& texture = {});

/// `count` default samples with seeds derived from `seed` and the sample index.
std::vector<StereoSample> make_dataset(int count, int height, int width, std::uint64_t seed,
                                       const TextureConfig& texture = {});

/// Marks pixels whose disparity differs from any 4-neighbor.
EdgeMap disparity_discontinuities(const Grid& disparity);

} // namespace edgestereo
