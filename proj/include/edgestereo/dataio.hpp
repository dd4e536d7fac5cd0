#pragma once

#include "edgestereo/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace edgestereo::io {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// PFM: "Pf" (1 channel) or "PF" (3 channels), "<width> <height>", then a nonzero scale whose
/// sign selects the byte order (negative = little endian), one whitespace byte, and float32
/// samples stored bottom row first. Values are rounded to float32 on write.
/// Throws FormatError (MalformedHeader, ZeroScale, TruncatedPayload, CorruptData).
Grid read_pfm(std::span<const std::uint8_t> bytes);
Bytes write_pfm(const Grid& g, bool little_endian = true);

/// KITTI disparity PNG: 16-bit grayscale, disparity = value / 256, value 0 = invalid.
/// Valid disparities are rounded to 1/256 px and must lie in [1/256, 65535/256].
/// Throws FormatError (UnsupportedPixelFormat for 8-bit or multi-channel input).
DisparityMap read_kitti_disparity_png(std::span<const std::uint8_t> bytes);
Bytes write_kitti_disparity_png(const DisparityMap& d);

/// Binary PGM (P5) / PPM (P6) with maxval up to 65535; samples are scaled to [0, 1].
Grid read_pnm(std::span<const std::uint8_t> bytes);
/// Writes P5 for one channel, P6 for three; values are clamped to [0, 1] and quantized to maxval.
Bytes write_pnm(const Grid& g, int maxval = 255);

/// 8- or 16-bit gray/RGB(A) PNG to a [0, 1] grid (alpha dropped, palettes expanded).
Grid read_png_image(std::span<const std::uint8_t> bytes);
/// 8-bit PNG from a 1- or 3-channel grid in [0, 1].
Bytes write_png_image(const Grid& g);

/// Reads a PNG, PGM/PPM or PFM image based on the file extension.
Grid load_image(const std::filesystem::path& path);
/// Converts a multi-channel image to its channel mean.
Grid to_gray(const Grid& image);

/// Color-coded disparity preview (blue = near zero, red = max_disp; invalid pixels black).
Grid colorize_disparity(const DisparityMap& d, double max_disp);

} // namespace edgestereo::io
