#pragma once

#include "edgestereo/autodiff.hpp"
#include "edgestereo/grid.hpp"
#include "edgestereo/losses.hpp"
#include "edgestereo/synthetic.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace edgestereo::model {

/// Channel widths of the toy network.
struct Widths {
    int stem_full = 8;        // full-resolution stem features
    int stem_half = 16;       // half-resolution stem features (shared descriptors)
    int edge = 8;             // edge-branch features
    int left_transform = 8;   // transformed left descriptor in the hybrid feature
    int edge_transform = 4;   // embedded edge features in the hybrid feature
    int encoder_quarter = 24; // encoder width at 1/4
    int encoder_eighth = 32;  // encoder width at 1/8
    int head = 16;            // hidden width of the initial disparity head
    int residual_full = 8;    // residual conv width at full resolution
    int residual_coarse = 16; // residual conv width at 1/2 and below
};

/// Residual-pyramid layout. initial_scale 2, 4 or 8 selects RP_2 / RP_4 / RP_8; num_scales is
/// then log2(initial_scale) + 1, and per_scale_max_disp holds the residual-stage correlation
/// range for scales 0 (full) .. num_scales - 2.
struct PyramidConfig {
    int initial_scale = 4;
    int num_scales = 3;
    std::vector<int> per_scale_max_disp{3, 3};
    int matching_max_disp = 16;
    bool edge_embedding = true;
    int image_channels = 1;
    Widths widths{};

    /// Throws ConfigError when the fields disagree.
    void validate() const;
    /// Config for RP_2 / RP_4 / RP_8 with the residual correlation range `residual_max_disp`.
    static PyramidConfig for_variant(int initial_scale, int residual_max_disp = 3);
};

/// Channels of the hybrid feature: cost volume + transformed left descriptor (+ edge features).
int hybrid_channels(const PyramidConfig& cfg);

enum class ParamGroup { SharedStem = 0, EdgeBranch = 1, DisparityBranch = 2 };
const char* to_string(ParamGroup g) noexcept;

struct Param {
    std::string name;
    ParamGroup group = ParamGroup::SharedStem;
    Grid value;
    friend bool operator==(const Param&, const Param&) = default;
};

struct ModelParams {
    std::vector<Param> params;

    const Param& at(const std::string& name) const;
    Param& at(const std::string& name);
    std::size_t count(ParamGroup g) const;
    /// Total number of scalar weights.
    std::size_t size() const;
    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Fan-in scaled centered uniform weights (bound sqrt(6 / fan_in)), zero biases, and
/// zero-initialized prediction heads.
ModelParams init_params(const PyramidConfig& cfg, std::uint64_t seed);

bool params_equal(const ModelParams& a, const ModelParams& b, ParamGroup g);

/// Taped network outputs. disparities[s] is the estimate at scale s (resolution 1/2^s),
/// covering s = 0 .. num_scales - 1; edges is the full-resolution edge map.
struct ForwardResult {
    std::vector<ad::DispVar> disparities;
    ad::Var edges;
    int hybrid_channels = 0;
};

/// Leaf per parameter (trainable ones require gradients), in ModelParams order.
std::vector<ad::Var> param_leaves(ad::Tape& tape, const ModelParams& params,
                                  const std::vector<ParamGroup>& trainable);

/// Image sides must be multiples of 8. With edges_only the disparity branch is skipped and
/// `disparities` stays empty.
ForwardResult forward(ad::Tape& tape, const ModelParams& params, std::span<const ad::Var> leaves,
                      const Grid& left, const Grid& right, const PyramidConfig& cfg, bool edges_only = false);

/// Untaped convenience: full-resolution disparity and edge map.
std::pair<DisparityMap, EdgeMap> infer(const ModelParams& params, const Grid& left, const Grid& right,
                                       const PyramidConfig& cfg);

// ---------------------------------------------------------------------------------------
// Training

struct Schedule {
    int iterations = 500;
    int batch_size = 4;
    double base_lr = 0.01;
    double power = 0.9;
    double momentum = 0.9;
    double weight_decay = 2e-4;
};

/// base_lr * (1 - iter / max_iter)^power.
double poly_lr(double base_lr, int iter, int max_iter, double power);

/// Groups updated by a stage: 1 -> edge branch, 2 -> disparity branch, 3 -> both.
std::vector<ParamGroup> trainable_groups(int stage);

struct LossLog {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void write_csv(std::ostream& out) const;
};

/// Multi-scale objective on one sample: ground truth is downsampled per scale and the
/// smoothness term at scale s uses the full-resolution edge map average-pooled s times.
struct StageObjective {
    ad::Var total;
    std::vector<ad::ScaleLossVar> per_scale;
};
StageObjective disparity_objective(const ForwardResult& out, const StereoSample& sample,
                                   const losses::LossWeights& weights);

/// Loss and parameter gradients of one sample for `stage` (gradients are zero for groups
/// that are not trainable in the stage).
struct SampleGradients {
    double loss = 0.0;
    std::vector<double> terms;
    std::vector<Grid> grads;
};
SampleGradients sample_gradients(int stage, const ModelParams& params, const StereoSample& sample,
                                 const PyramidConfig& cfg, const losses::LossWeights& weights);

using ProgressFn = std::function<void(int iter, const std::vector<double>& row)>;

/// SGD with momentum and weight decay under the poly schedule; samples are visited
/// cyclically in batches and per-sample gradients are averaged in a fixed order. Only the
/// stage's groups change. Throws NumericalError on a non-finite loss and ConfigError when the
/// data lacks required ground truth.
LossLog train_stage(int stage, std::span<const StereoSample> data, ModelParams& params, const PyramidConfig& cfg,
                    const losses::LossWeights& weights, const Schedule& schedule, const ProgressFn& progress = {});

/// Mean class-balanced BCE of the edge output over `data`.
double mean_edge_loss(const ModelParams& params, std::span<const StereoSample> data, const PyramidConfig& cfg);
/// Mean per-sample end-point error of the full-resolution output over `data`.
double mean_epe(const ModelParams& params, std::span<const StereoSample> data, const PyramidConfig& cfg);
/// Mean per-sample end-point error of the all-zero prediction.
double zero_baseline_epe(std::span<const StereoSample> data);

// ---------------------------------------------------------------------------------------
// Checkpoints

/// Layout (little endian): "ESCK", u32 version, config block, u32 parameter count, then per
/// parameter: u32 name length, name bytes, u8 group, i32 c, h, w, and c*h*w f64 values.
std::vector<std::uint8_t> save_checkpoint(const ModelParams& params, const PyramidConfig& cfg);
std::pair<ModelParams, PyramidConfig> load_checkpoint(std::span<const std::uint8_t> bytes);

inline constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace edgestereo::model
