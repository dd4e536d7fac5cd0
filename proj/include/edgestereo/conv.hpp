#pragma once

#include "edgestereo/grid.hpp"

namespace edgestereo {

/// Zero-padded 2-D convolution kernels behind ad::conv2d / ad::deconv2d.
/// Convolution weight layout: (out*in, k, k) indexed [out][in]. Transposed convolution:
/// (in*out, k, k) indexed [in][out]. Bias: (out, 1, 1).
struct ConvGeometry {
    int in_channels;
    int out_channels;
    int kernel;
    int stride;
    int pad;
};

ConvGeometry conv_geometry(const Grid& x, const Grid& weight, const Grid& bias, int stride, int pad);

Grid conv2d_forward(const Grid& x, const Grid& weight, const Grid& bias, int stride, int pad);

struct ConvGradients {
    Grid input;
    Grid weight;
    Grid bias;
};

/// Computes only the gradients flagged as needed; the others are left empty.
ConvGradients conv2d_backward(const Grid& x, const Grid& weight, const Grid& grad_out, int stride,
                              int pad, bool need_input, bool need_params);

Grid deconv2d_forward(const Grid& x, const Grid& weight, const Grid& bias, int stride, int pad);
ConvGradients deconv2d_backward(const Grid& x, const Grid& weight, const Grid& grad_out,
                                int stride, int pad, bool need_input, bool need_params);

} // namespace edgestereo
