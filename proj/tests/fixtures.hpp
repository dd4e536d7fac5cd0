#pragma once

// Random fixtures and malformed-input corpora shared by the unit and acceptance tests.

#include "edgestereo/dataio.hpp"
#include "edgestereo/error.hpp"
#include "edgestereo/grid.hpp"

#include <png.h>

#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace fixture {

using edgestereo::DisparityMap;
using edgestereo::FormatErrorKind;
using edgestereo::Grid;
using edgestereo::Mask;
using edgestereo::io::Bytes;

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int integer(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Grid random_grid(Rng& rng, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
    Grid g(c, h, w);
    for (double& v : g.data()) v = uniform(rng, lo, hi);
    return g;
}

inline Mask random_mask(Rng& rng, int h, int w, double p_valid) {
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(y, x, uniform(rng, 0.0, 1.0) < p_valid);
    return m;
}

inline DisparityMap random_disparity(Rng& rng, int h, int w, double hi, double p_valid = 1.0) {
    return {random_grid(rng, 1, h, w, 0.0, hi), random_mask(rng, h, w, p_valid)};
}

inline Bytes text(const std::string& s) { return Bytes(s.begin(), s.end()); }

inline void append_f32(Bytes& b, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

/// PNG through libpng's simplified writer; `format` is a PNG_FORMAT_* value and `pixels`
/// holds bytes (8-bit formats) or native-endian uint16 samples (PNG_FORMAT_FLAG_LINEAR).
inline Bytes encode_png(int width, int height, png_uint_32 format, const void* pixels) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw std::runtime_error("fixture PNG sizing failed");
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw std::runtime_error("fixture PNG encoding failed");
    }
    out.resize(size);
    return out;
}

/// 4x4 disparity fixture: ground truth invalid at (0,0) and (3,3), prediction invalid at (1,1).
/// Over the 14 evaluated pixels the absolute errors sum to 10.75; two exceed 3 px (one of
/// them through the invalid prediction), four exceed 1 px.
struct MixedFixture {
    DisparityMap pred;
    DisparityMap gt;
};

inline MixedFixture mixed_fixture() {
    const std::vector<double> gt_v{1, 2, 3, 4, 5, 6, 7, 8, 1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> err{9, 0.5, 0, 4, 0, 0, 2, 0, 1, 0, 0, -3, 0, 0.25, 0, 100};
    Mask gt_valid(4, 4, true);
    gt_valid.set(0, 0, false);
    gt_valid.set(3, 3, false);
    Mask pred_valid(4, 4, true);
    pred_valid.set(1, 1, false);
    std::vector<double> p(16);
    for (std::size_t i = 0; i < 16; ++i) p[i] = gt_v[i] + err[i];
    return {DisparityMap(Grid(1, 4, 4, p), pred_valid), DisparityMap(Grid(1, 4, 4, gt_v), gt_valid)};
}

inline edgestereo::EdgeMap edges(int h, int w, const std::vector<std::tuple<int, int, double>>& px) {
    Grid g(1, h, w);
    for (const auto& [y, x, v] : px) g(0, y, x) = v;
    return edgestereo::EdgeMap(g);
}

/// Two 5x5 images scored at tolerance 0 (exact matches only).
/// Image A: ground truth at two pixels scored 0.8 and 0.3, plus a false positive at 0.6.
/// Image B: ground truth at one pixel scored 0.9, plus false positives at 0.5 and 0.4.
/// Per-image best F: A 0.8 (threshold <= 0.3), B 1.0 (0.5 < t <= 0.9), so OIS = 0.9.
/// Pooled counts peak for 0.6 < t <= 0.8 (2 matches, 2 predictions, 3 truths): ODS = 0.8 at 0.61.
struct EdgeSet {
    std::vector<edgestereo::EdgeMap> preds;
    std::vector<edgestereo::EdgeMap> gts;
};

inline EdgeSet two_image_edges() {
    return {{edges(5, 5, {{0, 0, 0.8}, {4, 4, 0.3}, {2, 0, 0.6}}), edges(5, 5, {{2, 2, 0.9}, {0, 4, 0.5}, {4, 0, 0.4}})},
            {edges(5, 5, {{0, 0, 1.0}, {4, 4, 1.0}}), edges(5, 5, {{2, 2, 1.0}})}};
}

struct MalformedCase {
    std::string name;
    Bytes bytes;
    FormatErrorKind expected;
};

inline std::vector<MalformedCase> malformed_pfm() {
    Bytes truncated = text("Pf\n2 2\n-1.0\n");
    for (int i = 0; i < 3; ++i) append_f32(truncated, 1.0f);
    truncated.push_back(0);
    Bytes nan_sample = text("Pf\n2 1\n-1.0\n");
    append_f32(nan_sample, 1.0f);
    append_f32(nan_sample, std::numeric_limits<float>::quiet_NaN());
    Bytes zero_scale = text("Pf\n1 1\n0.0\n");
    append_f32(zero_scale, 1.0f);
    return {
        {"empty file", {}, FormatErrorKind::MalformedHeader},
        {"bad magic", text("P7\n2 2\n-1.0\n"), FormatErrorKind::MalformedHeader},
        {"non-numeric width", text("Pf\nab 2\n-1.0\n"), FormatErrorKind::MalformedHeader},
        {"zero height", text("Pf\n2 0\n-1.0\n"), FormatErrorKind::MalformedHeader},
        {"header cut after width", text("Pf\n2"), FormatErrorKind::MalformedHeader},
        {"unparseable scale", text("Pf\n2 2\n-1.0x\n"), FormatErrorKind::MalformedHeader},
        {"zero scale", zero_scale, FormatErrorKind::ZeroScale},
        {"header without payload", text("PF\n3 3\n1.0\n"), FormatErrorKind::TruncatedPayload},
        {"short payload", truncated, FormatErrorKind::TruncatedPayload},
        {"non-finite sample", nan_sample, FormatErrorKind::CorruptData},
    };
}

/// A valid 4x3 KITTI disparity PNG, the source of the damaged cases.
inline Bytes valid_kitti_png() {
    std::vector<std::uint16_t> raw(12);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::uint16_t>(256 * (i + 1));
    return encode_png(4, 3, PNG_FORMAT_LINEAR_Y, raw.data());
}

inline std::vector<MalformedCase> malformed_kitti_png() {
    const Bytes good = valid_kitti_png();
    std::vector<std::uint8_t> gray8(12, 100), rgb8(36, 100);
    std::vector<std::uint16_t> rgb16(36, 1000), ya16(24, 1000);
    Bytes half(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() / 2));
    Bytes signature_only(good.begin(), good.begin() + 8);
    // Byte 29 is the last IHDR data byte (interlace method); flipping it breaks the CRC.
    Bytes bad_ihdr = good;
    bad_ihdr[28] ^= 0x01;
    // The image data starts after the signature, IHDR and gAMA chunks; damage the last data byte
    // before IEND so the IDAT CRC check fails.
    Bytes bad_idat = good;
    bad_idat[bad_idat.size() - 12 - 5] ^= 0xFF;
    return {
        {"empty file", {}, FormatErrorKind::MalformedHeader},
        {"not a PNG", text("Pf\n2 2\n-1.0\n"), FormatErrorKind::MalformedHeader},
        {"8-bit gray", encode_png(4, 3, PNG_FORMAT_GRAY, gray8.data()), FormatErrorKind::UnsupportedPixelFormat},
        {"8-bit RGB", encode_png(4, 3, PNG_FORMAT_RGB, rgb8.data()), FormatErrorKind::UnsupportedPixelFormat},
        {"16-bit RGB", encode_png(4, 3, PNG_FORMAT_LINEAR_RGB, rgb16.data()), FormatErrorKind::UnsupportedPixelFormat},
        {"16-bit gray+alpha", encode_png(4, 3, PNG_FORMAT_LINEAR_Y_ALPHA, ya16.data()),
         FormatErrorKind::UnsupportedPixelFormat},
        {"signature only", signature_only, FormatErrorKind::TruncatedPayload},
        {"cut in half", half, FormatErrorKind::TruncatedPayload},
        {"damaged IHDR", bad_ihdr, FormatErrorKind::MalformedHeader},
        {"damaged image data", bad_idat, FormatErrorKind::CorruptData},
    };
}

inline std::vector<MalformedCase> malformed_pnm() {
    Bytes above = text("P5\n1 1\n1000\n");
    above.push_back(0x07);
    above.push_back(0xD0);
    return {
        {"empty file", {}, FormatErrorKind::MalformedHeader},
        {"ascii magic", text("P2\n1 1\n255\n9"), FormatErrorKind::MalformedHeader},
        {"non-numeric width", text("P5\nx 1\n255\n\x01"), FormatErrorKind::MalformedHeader},
        {"zero width", text("P5\n0 1\n255\n"), FormatErrorKind::MalformedHeader},
        {"zero maxval", text("P5\n1 1\n0\n\x01"), FormatErrorKind::MalformedHeader},
        {"maxval above 16 bits", text("P5\n1 1\n70000\n\x01\x01"), FormatErrorKind::MalformedHeader},
        {"missing header terminator", text("P5\n1 1\n255"), FormatErrorKind::MalformedHeader},
        {"short 8-bit payload", text("P6\n2 1\n255\n\x01\x02\x03"), FormatErrorKind::TruncatedPayload},
        {"short 16-bit payload", text("P5\n2 1\n65535\n\x01\x02\x03"), FormatErrorKind::TruncatedPayload},
        {"sample above maxval", above, FormatErrorKind::CorruptData},
    };
}

} // namespace fixture
