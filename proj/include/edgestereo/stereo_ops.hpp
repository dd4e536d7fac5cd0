#pragma once

#include "edgestereo/grid.hpp"

#include <utility>

namespace edgestereo {

/// Cost volume: channel d holds the matching score at displacement d.
using CostVolume = Grid;

/// Leftward 1-D correlation, normalized by the channel count:
///   out(d, y, x) = (1/C) * sum_c left(c, y, x) * right(c, y, x - d),  d in [0, max_disp].
/// Displacements that leave the image score exactly 0.
CostVolume correlate_1d(const Grid& left, const Grid& right, int max_disp);

/// Vector-Jacobian product of correlate_1d: returns (grad_left, grad_right).
std::pair<Grid, Grid> correlate_1d_backward(const Grid& left, const Grid& right,
                                            const CostVolume& grad_out);

struct WarpResult {
    Grid values;
    Mask valid;
};

/// Synthesizes left-view features by sampling right_feat at (y, x - disp(y, x)) with linear
/// interpolation along x. Samples outside [0, W-1], and invalid disparities, produce 0 and an
/// invalid mask entry.
WarpResult warp_right_to_left(const Grid& right_feat, const DisparityMap& disp);

struct WarpGradients {
    Grid features;
    Grid disparity;
};

/// Adjoint of warp_right_to_left with respect to both the feature grid and the disparity.
WarpGradients warp_right_to_left_backward(const Grid& right_feat, const DisparityMap& disp,
                                          const Grid& grad_out);

/// d_s = u(d_{s+1}) + r_s, where u is value-scaled 2x upsampling. Validity follows the
/// upsampled coarse mask.
DisparityMap residual_compose(const DisparityMap& coarse, const DisparityMap& residual);

} // namespace edgestereo
