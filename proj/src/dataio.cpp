#include "edgestereo/dataio.hpp"

#include "edgestereo/error.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace edgestereo::io {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading " + path.string());
    return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

constexpr long kMaxDimension = 1 << 15;

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Whitespace-separated header tokenizer shared by PFM and PNM; '#' comments are optional.
class HeaderReader {
public:
    HeaderReader(std::span<const std::uint8_t> bytes, bool comments)
        : bytes_(bytes), comments_(comments) {}

    std::string token(const char* what) {
        for (;;) {
            while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
            if (comments_ && pos_ < bytes_.size() && bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        std::string out;
        while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) {
            out.push_back(static_cast<char>(bytes_[pos_++]));
            if (out.size() > 32) fail(std::string("oversized ") + what);
        }
        if (out.empty()) fail(std::string("missing ") + what);
        return out;
    }

    long dimension(const char* what, long max_value = kMaxDimension) {
        const std::string t = token(what);
        if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            fail(std::string("non-numeric ") + what);
        }
        const long v = std::strtol(t.c_str(), nullptr, 10);
        if (t.size() > 9 || v <= 0 || v > max_value) fail(std::string("out-of-range ") + what);
        return v;
    }

    // Consumes the single whitespace byte that separates the header from the payload.
    std::size_t payload_start() {
        if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) fail("missing header terminator");
        return pos_ + 1;
    }

    [[noreturn]] static void fail(const std::string& msg) {
        throw FormatError(FormatErrorKind::MalformedHeader, msg);
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool comments_;
    std::size_t pos_ = 0;
};

std::uint32_t load_u32(const std::uint8_t* p, bool little) {
    std::uint32_t v = 0;
    if (little) {
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    } else {
        for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
    }
    return v;
}

void store_u32(std::uint32_t v, bool little, Bytes& out) {
    for (int i = 0; i < 4; ++i) {
        const int shift = little ? 8 * i : 8 * (3 - i);
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    }
}

} // namespace

Grid read_pfm(std::span<const std::uint8_t> bytes) {
    HeaderReader header(bytes, false);
    const std::string magic = header.token("magic");
    int channels = 0;
    if (magic == "Pf") {
        channels = 1;
    } else if (magic == "PF") {
        channels = 3;
    } else {
        HeaderReader::fail("bad PFM magic '" + magic + "'");
    }
    const long width = header.dimension("width");
    const long height = header.dimension("height");
    const std::string scale_text = header.token("scale");
    char* end = nullptr;
    const double scale = std::strtod(scale_text.c_str(), &end);
    if (end != scale_text.c_str() + scale_text.size() || !std::isfinite(scale)) {
        HeaderReader::fail("unparseable PFM scale '" + scale_text + "'");
    }
    if (scale == 0.0) throw FormatError(FormatErrorKind::ZeroScale, "PFM scale must be nonzero");
    const std::size_t start = header.payload_start();
    const bool little = scale < 0.0;

    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - start < count * 4) {
        throw FormatError(FormatErrorKind::TruncatedPayload,
                          "PFM payload has " + std::to_string(bytes.size() - start) + " bytes, need " +
                              std::to_string(count * 4));
    }
    Grid g(channels, static_cast<int>(height), static_cast<int>(width));
    const std::uint8_t* p = bytes.data() + start;
    for (long row = 0; row < height; ++row) {
        const int y = static_cast<int>(height - 1 - row);
        for (long x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                const float f = std::bit_cast<float>(load_u32(p, little));
                p += 4;
                if (!std::isfinite(f)) {
                    throw FormatError(FormatErrorKind::CorruptData, "non-finite PFM sample");
                }
                g(c, y, static_cast<int>(x)) = f;
            }
        }
    }
    return g;
}

Bytes write_pfm(const Grid& g, bool little_endian) {
    if (g.channels() != 1 && g.channels() != 3) throw ShapeError("PFM holds 1 or 3 channels");
    const std::string header = std::string(g.channels() == 1 ? "Pf" : "PF") + "\n" +
                               std::to_string(g.width()) + " " + std::to_string(g.height()) + "\n" +
                               (little_endian ? "-1.0" : "1.0") + "\n";
    Bytes out(header.begin(), header.end());
    out.reserve(out.size() + g.size() * 4);
    for (int y = g.height() - 1; y >= 0; --y) {
        for (int x = 0; x < g.width(); ++x) {
            for (int c = 0; c < g.channels(); ++c) {
                store_u32(std::bit_cast<std::uint32_t>(static_cast<float>(g(c, y, x))), little_endian, out);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// PNG (libpng). libpng reports errors through longjmp, so the functions that call setjmp
// keep only trivially destructible locals and work on caller-owned buffers.

namespace {

struct PngRaw {
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int bit_depth = 0;
    int color_type = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
};

struct PngSource {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

struct PngErrorSlot {
    char message[256];
};

void png_error_handler(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<PngErrorSlot*>(png_get_error_ptr(png));
    std::snprintf(slot->message, sizeof slot->message, "%s", msg);
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void png_read_source(png_structp png, png_bytep out, png_size_t n) {
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (src->size - src->pos < n) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, src->data + src->pos, n);
    src->pos += n;
}

enum class PngMode { Raw, Image };

// Returns 0 on success, 1 on a libpng error (message in slot), 2 when `raw_gray16` is
// requested and the file is not 16-bit single channel.
int decode_png(std::span<const std::uint8_t> bytes, PngMode mode, PngRaw* out, PngErrorSlot* slot) {
    PngSource src{bytes.data(), bytes.size(), 0};
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, slot, png_error_handler,
                                             png_warning_handler);
    if (png == nullptr) return 1;
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return 1;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return 1;
    }
    png_set_read_fn(png, &src, png_read_source);
    png_read_info(png, info);
    out->width = png_get_image_width(png, info);
    out->height = png_get_image_height(png, info);
    out->bit_depth = png_get_bit_depth(png, info);
    out->color_type = png_get_color_type(png, info);
    if (out->width > static_cast<png_uint_32>(kMaxDimension) ||
        out->height > static_cast<png_uint_32>(kMaxDimension)) {
        png_error(png, "PNG dimensions too large");
    }
    if (mode == PngMode::Raw) {
        if (out->bit_depth != 16 || out->color_type != PNG_COLOR_TYPE_GRAY) {
            png_destroy_read_struct(&png, &info, nullptr);
            return 2;
        }
    } else {
        png_set_expand(png);
        png_set_strip_alpha(png);
        if (out->bit_depth == 16) png_set_swap(png);
    }
    png_read_update_info(png, info);
    out->channels = png_get_channels(png, info);
    out->bit_depth = png_get_bit_depth(png, info);
    const png_size_t stride = png_get_rowbytes(png, info);
    out->pixels.resize(stride * out->height);
    out->rows.resize(out->height);
    for (png_uint_32 y = 0; y < out->height; ++y) out->rows[y] = out->pixels.data() + y * stride;
    png_read_image(png, out->rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return 0;
}

void png_write_sink(png_structp png, png_bytep data, png_size_t n) {
    auto* sink = static_cast<Bytes*>(png_get_io_ptr(png));
    sink->insert(sink->end(), data, data + n);
}

void png_flush_sink(png_structp) {}

int encode_png(int width, int height, int bit_depth, int color_type, std::vector<png_bytep>* rows,
               Bytes* sink, PngErrorSlot* slot) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, slot, png_error_handler,
                                              png_warning_handler);
    if (png == nullptr) return 1;
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        return 1;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return 1;
    }
    png_set_write_fn(png, sink, png_write_sink, png_flush_sink);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows->data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return 0;
}

FormatErrorKind classify_png_error(const char* msg) {
    const std::string m(msg);
    if (m.find("end of PNG data") != std::string::npos) return FormatErrorKind::TruncatedPayload;
    if (m.find("signature") != std::string::npos || m.find("IHDR") != std::string::npos) {
        return FormatErrorKind::MalformedHeader;
    }
    return FormatErrorKind::CorruptData;
}

PngRaw decode_or_throw(std::span<const std::uint8_t> bytes, PngMode mode) {
    PngRaw raw;
    PngErrorSlot slot{};
    if (bytes.size() < 8) throw FormatError(FormatErrorKind::MalformedHeader, "too short for a PNG");
    if (png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw FormatError(FormatErrorKind::MalformedHeader, "missing PNG signature");
    }
    const int status = decode_png(bytes, mode, &raw, &slot);
    if (status == 1) throw FormatError(classify_png_error(slot.message), slot.message);
    if (status == 2) {
        throw FormatError(FormatErrorKind::UnsupportedPixelFormat,
                          "KITTI disparity PNG must be 16-bit single-channel, got bit depth " +
                              std::to_string(raw.bit_depth) + " color type " +
                              std::to_string(raw.color_type));
    }
    return raw;
}

Bytes encode_or_throw(int width, int height, int bit_depth, int color_type,
                      std::vector<std::uint8_t>& pixels, std::size_t stride) {
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + y * stride;
    Bytes out;
    PngErrorSlot slot{};
    if (encode_png(width, height, bit_depth, color_type, &rows, &out, &slot) != 0) {
        throw FormatError(FormatErrorKind::CorruptData, std::string("PNG encoding failed: ") + slot.message);
    }
    return out;
}

} // namespace

DisparityMap read_kitti_disparity_png(std::span<const std::uint8_t> bytes) {
    const PngRaw raw = decode_or_throw(bytes, PngMode::Raw);
    const int h = static_cast<int>(raw.height);
    const int w = static_cast<int>(raw.width);
    Grid values(1, h, w);
    Mask valid(h, w, false);
    for (int y = 0; y < h; ++y) {
        const png_bytep row = raw.rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < w; ++x) {
            // PNG stores 16-bit samples big endian.
            const unsigned v = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
            if (v != 0) {
                values(0, y, x) = v / 256.0;
                valid.set(y, x, true);
            }
        }
    }
    return {std::move(values), std::move(valid)};
}

Bytes write_kitti_disparity_png(const DisparityMap& d) {
    const int h = d.height();
    const int w = d.width();
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h) * w * 2, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!d.valid(y, x)) continue;
            const double q = std::round(d(y, x) * 256.0);
            if (!(q >= 1.0 && q <= 65535.0)) {
                throw std::domain_error("disparity " + std::to_string(d(y, x)) +
                                        " is not representable in KITTI PNG encoding");
            }
            const auto v = static_cast<unsigned>(q);
            const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 2;
            pixels[i] = static_cast<std::uint8_t>(v >> 8);
            pixels[i + 1] = static_cast<std::uint8_t>(v & 0xFF);
        }
    }
    return encode_or_throw(w, h, 16, PNG_COLOR_TYPE_GRAY, pixels, static_cast<std::size_t>(w) * 2);
}

Grid read_png_image(std::span<const std::uint8_t> bytes) {
    const PngRaw raw = decode_or_throw(bytes, PngMode::Image);
    const int h = static_cast<int>(raw.height);
    const int w = static_cast<int>(raw.width);
    const int channels = raw.channels >= 3 ? 3 : 1;
    const double maxval = raw.bit_depth == 16 ? 65535.0 : 255.0;
    Grid g(channels, h, w);
    for (int y = 0; y < h; ++y) {
        const png_bytep row = raw.rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t i = static_cast<std::size_t>(x) * raw.channels + c;
                // 16-bit rows were byte-swapped to little endian by libpng.
                const unsigned v = raw.bit_depth == 16
                                       ? (static_cast<unsigned>(row[2 * i + 1]) << 8) | row[2 * i]
                                       : row[i];
                g(c, y, x) = v / maxval;
            }
        }
    }
    return g;
}

Bytes write_png_image(const Grid& g) {
    if (g.channels() != 1 && g.channels() != 3) throw ShapeError("PNG export holds 1 or 3 channels");
    const int c = g.channels();
    std::vector<std::uint8_t> pixels(g.size());
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            for (int k = 0; k < c; ++k) {
                const double v = std::clamp(g(k, y, x), 0.0, 1.0);
                pixels[(static_cast<std::size_t>(y) * g.width() + x) * c + k] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return encode_or_throw(g.width(), g.height(), 8, c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                           pixels, static_cast<std::size_t>(g.width()) * c);
}

Grid read_pnm(std::span<const std::uint8_t> bytes) {
    HeaderReader header(bytes, true);
    const std::string magic = header.token("magic");
    int channels = 0;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        HeaderReader::fail("unsupported PNM magic '" + magic + "'");
    }
    const long width = header.dimension("width");
    const long height = header.dimension("height");
    const long maxval = header.dimension("maxval", 65535);
    const std::size_t start = header.payload_start();
    const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(width) * height * channels * sample_bytes;
    if (bytes.size() - start < need) {
        throw FormatError(FormatErrorKind::TruncatedPayload, "PNM payload is truncated");
    }
    Grid g(channels, static_cast<int>(height), static_cast<int>(width));
    const std::uint8_t* p = bytes.data() + start;
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                unsigned v = *p++;
                if (sample_bytes == 2) v = (v << 8) | *p++;
                if (v > static_cast<unsigned>(maxval)) {
                    throw FormatError(FormatErrorKind::CorruptData, "PNM sample above maxval");
                }
                g(c, y, x) = static_cast<double>(v) / static_cast<double>(maxval);
            }
        }
    }
    return g;
}

Bytes write_pnm(const Grid& g, int maxval) {
    if (g.channels() != 1 && g.channels() != 3) throw ShapeError("PNM holds 1 or 3 channels");
    if (maxval < 1 || maxval > 65535) throw std::invalid_argument("PNM maxval must be in [1, 65535]");
    const std::string header = std::string(g.channels() == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(g.width()) + " " + std::to_string(g.height()) + "\n" +
                               std::to_string(maxval) + "\n";
    Bytes out(header.begin(), header.end());
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            for (int c = 0; c < g.channels(); ++c) {
                const auto v = static_cast<unsigned>(std::lround(std::clamp(g(c, y, x), 0.0, 1.0) * maxval));
                if (maxval > 255) out.push_back(static_cast<std::uint8_t>(v >> 8));
                out.push_back(static_cast<std::uint8_t>(v & 0xFF));
            }
        }
    }
    return out;
}

Grid load_image(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    const Bytes bytes = read_file(path);
    if (ext == ".png") return read_png_image(bytes);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(bytes);
    if (ext == ".pfm") return read_pfm(bytes);
    throw ConfigError("unsupported image extension '" + ext + "' for " + path.string());
}

Grid to_gray(const Grid& image) {
    if (image.channels() == 1) return image;
    Grid out(1, image.height(), image.width());
    for (int c = 0; c < image.channels(); ++c) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += image.plane(c)[i];
    }
    out *= 1.0 / image.channels();
    return out;
}

Grid colorize_disparity(const DisparityMap& d, double max_disp) {
    Grid rgb(3, d.height(), d.width());
    const double scale = max_disp > 0.0 ? 1.0 / max_disp : 0.0;
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(y, x)) continue;
            const double t = std::clamp(d(y, x) * scale, 0.0, 1.0);
            // Piecewise-linear blue -> cyan -> yellow -> red ramp.
            rgb(0, y, x) = std::clamp(2.0 * t - 0.5, 0.0, 1.0);
            rgb(1, y, x) = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
            rgb(2, y, x) = std::clamp(1.5 - 2.0 * t, 0.0, 1.0);
        }
    }
    return rgb;
}

} // namespace edgestereo::io
