#include "edgestereo/error.hpp"
#include "edgestereo/eval.hpp"
#include "edgestereo/losses.hpp"
#include "edgestereo/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <string>

namespace edgestereo::model {

double poly_lr(double base_lr, int iter, int max_iter, double power) {
    if (max_iter <= 0) throw ConfigError("max_iter must be positive");
    const double frac = std::clamp(static_cast<double>(iter) / max_iter, 0.0, 1.0);
    return base_lr * std::pow(1.0 - frac, power);
}

std::vector<ParamGroup> trainable_groups(int stage) {
    switch (stage) {
    case 1: return {ParamGroup::EdgeBranch};
    case 2: return {ParamGroup::DisparityBranch};
    case 3: return {ParamGroup::EdgeBranch, ParamGroup::DisparityBranch};
    default: throw ConfigError("training stage must be 1, 2 or 3, got " + std::to_string(stage));
    }
}

void LossLog::write_csv(std::ostream& out) const {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "");
            if (i == 0) {
                out << static_cast<long long>(row[i]);
            } else {
                out << std::setprecision(10) << row[i];
            }
        }
        out << '\n';
    }
}

StageObjective disparity_objective(const ForwardResult& out, const StereoSample& sample,
                                   const losses::LossWeights& weights) {
    const int scales = static_cast<int>(out.disparities.size());
    weights.validate(scales);
    StageObjective obj;
    DisparityMap gt = sample.gt_disparity;
    ad::Var edges = out.edges;
    for (int s = 0; s < scales; ++s) {
        if (s > 0) {
            gt = downsample_disparity(gt);
            edges = ad::avg_pool2x(edges);
        }
        const ad::DispVar& d = out.disparities[static_cast<std::size_t>(s)];
        obj.per_scale.push_back(
            {ad::l1_regression(d, gt), ad::edge_aware_smoothness(d, edges, weights.beta)});
    }
    obj.total = ad::multiscale_total(obj.per_scale, weights);
    return obj;
}

namespace {

void require_ground_truth(int stage, const StereoSample& sample) {
    if (stage == 1 && !sample.gt_edges) throw ConfigError("stage 1 needs edge ground truth");
    if (sample.gt_disparity.values.empty() && stage != 1) throw ConfigError("stages 2 and 3 need disparity ground truth");
}

std::vector<std::string> log_columns(int stage, int scales) {
    std::vector<std::string> cols{"iter", "lr"};
    if (stage == 1) {
        cols.push_back("L_edge");
    } else {
        for (int s = 0; s < scales; ++s) cols.push_back("L_r_" + std::to_string(s));
        for (int s = 0; s < scales; ++s) cols.push_back("L_sm_" + std::to_string(s));
    }
    cols.push_back("total");
    return cols;
}

} // namespace

SampleGradients sample_gradients(int stage, const ModelParams& params, const StereoSample& sample,
                                 const PyramidConfig& cfg, const losses::LossWeights& weights) {
    require_ground_truth(stage, sample);
    ad::Tape tape;
    const auto leaves = param_leaves(tape, params, trainable_groups(stage));
    const ForwardResult out = forward(tape, params, leaves, sample.left, sample.right, cfg, stage == 1);
    SampleGradients result;
    ad::Var root;
    if (stage == 1) {
        root = ad::class_balanced_bce(out.edges, *sample.gt_edges);
        result.terms.push_back(ad::scalar(root));
    } else {
        const StageObjective obj = disparity_objective(out, sample, weights);
        for (const auto& t : obj.per_scale) result.terms.push_back(ad::scalar(t.regression));
        for (const auto& t : obj.per_scale) result.terms.push_back(ad::scalar(t.smoothness));
        root = obj.total;
    }
    result.loss = ad::scalar(root);
    if (!std::isfinite(result.loss)) {
        throw NumericalError("non-finite stage " + std::to_string(stage) + " loss");
    }
    tape.backward(root);
    result.grads.reserve(leaves.size());
    for (const ad::Var& leaf : leaves) result.grads.push_back(tape.gradient(leaf));
    return result;
}

LossLog train_stage(int stage, std::span<const StereoSample> data, ModelParams& params, const PyramidConfig& cfg,
                    const losses::LossWeights& weights, const Schedule& schedule, const ProgressFn& progress) {
    const auto groups = trainable_groups(stage);
    cfg.validate();
    if (stage != 1) weights.validate(cfg.num_scales);
    if (data.empty()) throw ConfigError("training data is empty");
    if (schedule.iterations <= 0 || schedule.batch_size <= 0) throw ConfigError("iterations and batch size must be positive");
    if (schedule.base_lr < 0.0 || schedule.momentum < 0.0 || schedule.weight_decay < 0.0) {
        throw ConfigError("learning rate, momentum and weight decay must be nonnegative");
    }
    for (const auto& s : data) require_ground_truth(stage, s);

    std::vector<bool> trainable;
    std::vector<Grid> velocity;
    for (const Param& p : params.params) {
        trainable.push_back(std::find(groups.begin(), groups.end(), p.group) != groups.end());
        velocity.emplace_back(p.value.channels(), p.value.height(), p.value.width());
    }

    LossLog log;
    log.columns = log_columns(stage, cfg.num_scales);
    std::size_t cursor = 0;
    for (int it = 0; it < schedule.iterations; ++it) {
        const double lr = poly_lr(schedule.base_lr, it, schedule.iterations, schedule.power);
        std::vector<Grid> grad_sum;
        std::vector<double> terms;
        double loss = 0.0;
        for (int b = 0; b < schedule.batch_size; ++b) {
            const StereoSample& sample = data[cursor];
            cursor = (cursor + 1) % data.size();
            SampleGradients g = sample_gradients(stage, params, sample, cfg, weights);
            if (grad_sum.empty()) {
                grad_sum = std::move(g.grads);
                terms = g.terms;
            } else {
                for (std::size_t i = 0; i < grad_sum.size(); ++i) {
                    if (trainable[i]) grad_sum[i] += g.grads[i];
                }
                for (std::size_t i = 0; i < terms.size(); ++i) terms[i] += g.terms[i];
            }
            loss += g.loss;
        }
        const double inv = 1.0 / schedule.batch_size;
        std::vector<double> row{static_cast<double>(it), lr};
        for (double t : terms) row.push_back(t * inv);
        row.push_back(loss * inv);
        log.rows.push_back(row);
        if (progress) progress(it, row);

        for (std::size_t i = 0; i < params.params.size(); ++i) {
            if (!trainable[i]) continue;
            Grid& w = params.params[i].value;
            Grid& v = velocity[i];
            const Grid& g = grad_sum[i];
            for (std::size_t k = 0; k < w.size(); ++k) {
                v[k] = schedule.momentum * v[k] + lr * (g[k] * inv + schedule.weight_decay * w[k]);
                w[k] -= v[k];
            }
            if (!w.all_finite()) throw NumericalError("parameter " + params.params[i].name + " became non-finite");
        }
    }
    return log;
}

double mean_edge_loss(const ModelParams& params, std::span<const StereoSample> data, const PyramidConfig& cfg) {
    if (data.empty()) throw std::domain_error("mean_edge_loss: no samples");
    double sum = 0.0;
    for (const StereoSample& s : data) {
        if (!s.gt_edges) throw ConfigError("edge loss needs edge ground truth");
        ad::Tape tape;
        const auto leaves = param_leaves(tape, params, {});
        const ForwardResult out = forward(tape, params, leaves, s.left, s.right, cfg, true);
        sum += losses::class_balanced_bce(out.edges.value(), *s.gt_edges);
    }
    return sum / static_cast<double>(data.size());
}

double mean_epe(const ModelParams& params, std::span<const StereoSample> data, const PyramidConfig& cfg) {
    if (data.empty()) throw std::domain_error("mean_epe: no samples");
    double sum = 0.0;
    for (const StereoSample& s : data) sum += eval::epe(infer(params, s.left, s.right, cfg).first, s.gt_disparity);
    return sum / static_cast<double>(data.size());
}

double zero_baseline_epe(std::span<const StereoSample> data) {
    if (data.empty()) throw std::domain_error("zero_baseline_epe: no samples");
    double sum = 0.0;
    for (const StereoSample& s : data) {
        const DisparityMap zero(Grid(1, s.gt_disparity.height(), s.gt_disparity.width()));
        sum += eval::epe(zero, s.gt_disparity);
    }
    return sum / static_cast<double>(data.size());
}

} // namespace edgestereo::model
