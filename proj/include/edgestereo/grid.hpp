#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace edgestereo {

/// Dense channels x height x width array of doubles, row-major (channel, row, column).
/// Used for images, feature maps, cost volumes, disparity and edge maps alike.
class Grid {
public:
    Grid() = default;
    Grid(int channels, int height, int width, double fill = 0.0);
    Grid(int channels, int height, int width, std::vector<double> data);

    int channels() const noexcept { return channels_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t plane_size() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
    double operator()(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::span<double> plane(int c) noexcept { return {data_.data() + c * plane_size(), plane_size()}; }
    std::span<const double> plane(int c) const noexcept {
        return {data_.data() + c * plane_size(), plane_size()};
    }
    double* row(int c, int y) noexcept { return data_.data() + index(c, y, 0); }
    const double* row(int c, int y) const noexcept { return data_.data() + index(c, y, 0); }

    bool same_shape(const Grid& other) const noexcept {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    bool same_resolution(const Grid& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const noexcept;
    Grid& operator+=(const Grid& other);
    Grid& operator*=(double s) noexcept;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Per-pixel boolean mask (height x width).
class Mask {
public:
    Mask() = default;
    Mask(int height, int width, bool fill = true);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }

    bool operator()(int y, int x) const noexcept { return bits_[index(y, x)] != 0; }
    void set(int y, int x, bool v) noexcept { bits_[index(y, x)] = v ? 1 : 0; }
    bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }

    std::size_t count() const noexcept;
    bool same_resolution(const Grid& g) const noexcept {
        return height_ == g.height() && width_ == g.width();
    }
    bool same_resolution(const Mask& m) const noexcept {
        return height_ == m.height_ && width_ == m.width_;
    }

    friend Mask operator&(const Mask& a, const Mask& b);
    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t index(int y, int x) const noexcept {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Single-channel disparity (pixels, at the map's own resolution) plus validity.
/// Ground-truth disparities are nonnegative on valid pixels; residual maps may be
/// negative and carry an all-valid mask.
struct DisparityMap {
    Grid values;
    Mask valid;

    DisparityMap() = default;
    DisparityMap(Grid values, Mask valid);
    explicit DisparityMap(Grid values);

    int height() const noexcept { return values.height(); }
    int width() const noexcept { return values.width(); }
    double operator()(int y, int x) const noexcept { return values(0, y, x); }
};

/// Single-channel edge probabilities in [0, 1].
struct EdgeMap {
    Grid probabilities;

    EdgeMap() = default;
    explicit EdgeMap(Grid probabilities);

    int height() const noexcept { return probabilities.height(); }
    int width() const noexcept { return probabilities.width(); }
    double operator()(int y, int x) const noexcept { return probabilities(0, y, x); }
    bool is_binary() const noexcept;
};

/// Bilinear, corner-aligned 2x upsampling (H x W -> 2H x 2W). With scale_values every
/// output is additionally doubled, which converts disparities to the finer pixel unit.
Grid upsample2x(const Grid& g, bool scale_values);
/// Adjoint of upsample2x: maps an output-sized gradient back to the input resolution.
Grid upsample2x_backward(const Grid& grad_out, int in_height, int in_width, bool scale_values);
/// An upsampled pixel is valid iff every source pixel with nonzero bilinear weight is valid.
Mask upsample2x(const Mask& m);

/// Forward differences (d/dx, d/dy); the last column / last row is zero.
std::pair<Grid, Grid> spatial_gradient(const Grid& g);

Grid concat_channels(std::span<const Grid> gs);
Grid slice_channels(const Grid& g, int first, int count);

/// 2x2 average pooling; odd trailing rows/columns are dropped.
Grid avg_pool2x(const Grid& g);
Grid avg_pool2x_backward(const Grid& grad_out, int in_height, int in_width);

/// Halves a disparity map: each coarse pixel averages its valid children and is
/// valid when at least one child is; values are divided by two.
DisparityMap downsample_disparity(const DisparityMap& d);

} // namespace edgestereo
