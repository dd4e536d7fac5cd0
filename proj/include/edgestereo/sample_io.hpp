#pragma once

#include "edgestereo/synthetic.hpp"

#include <filesystem>
#include <vector>

namespace edgestereo::io {

/// Sample directory layout: left.pgm/right.pgm (left.ppm/right.ppm for color), 16-bit;
/// disparity.png (KITTI encoding); edges.pgm (8-bit, 0 or 255) when edge ground truth exists.
void write_sample_dir(const std::filesystem::path& dir, const StereoSample& sample);
StereoSample read_sample_dir(const std::filesystem::path& dir);

/// Reads every immediate subdirectory of `root` that holds a sample, in name order. Throws
/// IoError when none is found.
std::vector<StereoSample> read_dataset(const std::filesystem::path& root);

/// Loads a disparity map from a KITTI PNG or a PFM file (PFM pixels are all valid).
DisparityMap load_disparity(const std::filesystem::path& path);
/// Writes a disparity map as KITTI PNG (.png) or PFM (.pfm; invalid pixels are stored as 0).
void save_disparity(const std::filesystem::path& path, const DisparityMap& d);

} // namespace edgestereo::io
