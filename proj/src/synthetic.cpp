#include "edgestereo/synthetic.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace edgestereo {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

void validate_layers(int height, int width, std::span<const Layer> layers) {
    if (height <= 0 || width <= 0) throw ConfigError("image size must be positive");
    if (layers.empty()) throw ConfigError("at least a background layer is required");
    const Rect& bg = layers.front().rect;
    if (bg.y0 > 0 || bg.x0 > 0 || bg.y0 + bg.height < height || bg.x0 + bg.width < width) {
        throw ConfigError("the first layer must cover the full frame");
    }
    for (const Layer& layer : layers) {
        if (layer.disparity < 0 || 4 * layer.disparity >= width) {
            throw ConfigError("layer disparity " + std::to_string(layer.disparity) +
                              " outside [0, width/4) for width " + std::to_string(width));
        }
        if (layer.rect.height <= 0 || layer.rect.width <= 0) throw ConfigError("empty layer rectangle");
    }
}

bool contains(const Rect& r, int y, int x) {
    return y >= r.y0 && y < r.y0 + r.height && x >= r.x0 && x < r.x0 + r.width;
}

} // namespace

EdgeMap disparity_discontinuities(const Grid& disparity) {
    const int h = disparity.height();
    const int w = disparity.width();
    Grid edges(1, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = disparity(0, y, x);
            const bool edge = (x > 0 && disparity(0, y, x - 1) != v) ||
                              (x + 1 < w && disparity(0, y, x + 1) != v) ||
                              (y > 0 && disparity(0, y - 1, x) != v) ||
                              (y + 1 < h && disparity(0, y + 1, x) != v);
            edges(0, y, x) = edge ? 1.0 : 0.0;
        }
    }
    return EdgeMap(std::move(edges));
}

StereoSample gen_random_dot_stereogram(int height, int width, std::uint64_t seed,
                                       std::span<const Layer> layers, const TextureConfig& texture) {
    validate_layers(height, width, layers);
    if (texture.channels != 1 && texture.channels != 3) throw ConfigError("texture channels must be 1 or 3");
    if (texture.levels.empty()) throw ConfigError("texture needs at least one intensity level");
    if (texture.contrast < 0.0 || texture.contrast > 1.0) throw ConfigError("texture contrast must be in [0, 1]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const int channels = texture.channels;
    const auto band = [&](int layer) {
        return texture.contrast * texture.levels[static_cast<std::size_t>(layer) % texture.levels.size()];
    };

    // Topmost layer per left pixel.
    std::vector<int> owner(static_cast<std::size_t>(height) * width, 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int k = static_cast<int>(layers.size()) - 1; k >= 0; --k) {
                if (contains(layers[static_cast<std::size_t>(k)].rect, y, x)) {
                    owner[static_cast<std::size_t>(y) * width + x] = k;
                    break;
                }
            }
        }
    }

    Grid left(channels, height, width);
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const int k = owner[static_cast<std::size_t>(y) * width + x];
                left(c, y, x) = (1.0 - texture.contrast) * uniform(rng) + band(k);
            }
        }
    }

    Grid disparity(1, height, width);
    Grid right(channels, height, width);
    // Layer index of the surface seen at each right pixel (-1 = nothing projects there).
    std::vector<int> zbuf(static_cast<std::size_t>(height) * width, -1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int k = owner[static_cast<std::size_t>(y) * width + x];
            const int d = layers[static_cast<std::size_t>(k)].disparity;
            disparity(0, y, x) = d;
            const int xt = x - d;
            if (xt < 0) continue;
            int& z = zbuf[static_cast<std::size_t>(y) * width + xt];
            if (k > z) {
                z = k;
                for (int c = 0; c < channels; ++c) right(c, y, xt) = left(c, y, x);
            }
        }
    }
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                if (zbuf[static_cast<std::size_t>(y) * width + x] < 0) {
                    right(c, y, x) = (1.0 - texture.contrast) * uniform(rng) + band(0);
                }
            }
        }
    }

    Mask valid(height, width, false);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int k = owner[static_cast<std::size_t>(y) * width + x];
            const int xt = x - layers[static_cast<std::size_t>(k)].disparity;
            valid.set(y, x, xt >= 0 && zbuf[static_cast<std::size_t>(y) * width + xt] == k);
        }
    }

    StereoSample sample;
    sample.gt_edges = disparity_discontinuities(disparity);
    sample.left = std::move(left);
    sample.right = std::move(right);
    sample.gt_disparity = DisparityMap(std::move(disparity), std::move(valid));
    return sample;
}

std::vector<Layer> random_layers(int height, int width, std::uint64_t seed) {
    if (width < 20 || height < 8) throw ConfigError("random layers need at least an 8x20 frame");
    std::mt19937_64 rng(seed);
    const auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const int max_disp = std::min(12, width / 4 - 1);
    const int bg = pick(2, std::min(5, max_disp - 2));
    std::vector<Layer> layers{{Rect{0, 0, height, width}, bg}};
    for (int i = 0; i < 2; ++i) {
        const int rh = pick(std::max(1, height / 4), std::max(1, height / 2));
        const int rw = pick(width / 4, width / 2);
        Rect r{pick(0, height - rh), pick(0, width - rw), rh, rw};
        layers.push_back({r, pick(bg + 2, max_disp)});
    }
    return layers;
}

StereoSample gen_default_sample(int height, int width, std::uint64_t seed, const TextureConfig& texture) {
    const auto layers = random_layers(height, width, derive_seed(seed, 1));
    return gen_random_dot_stereogram(height, width, derive_seed(seed, 2), layers, texture);
}

std::vector<StereoSample> make_dataset(int count, int height, int width, std::uint64_t seed,
                                       const TextureConfig& texture) {
    std::vector<StereoSample> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        out.push_back(gen_default_sample(height, width, derive_seed(seed, 1000 + static_cast<std::uint64_t>(i)),
                                         texture));
    }
    return out;
}

} // namespace edgestereo
