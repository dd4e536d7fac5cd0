#include "edgestereo/model.hpp"

#include "edgestereo/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_map>

namespace edgestereo::model {

void PyramidConfig::validate() const {
    int expected = 0;
    switch (initial_scale) {
    case 2: expected = 2; break;
    case 4: expected = 3; break;
    case 8: expected = 4; break;
    default: throw ConfigError("initial_scale must be 2, 4 or 8, got " + std::to_string(initial_scale));
    }
    if (num_scales != expected) {
        throw ConfigError("initial_scale 1/" + std::to_string(initial_scale) + " implies " +
                          std::to_string(expected) + " scales, got " + std::to_string(num_scales));
    }
    if (static_cast<int>(per_scale_max_disp.size()) != num_scales - 1) {
        throw ConfigError("per_scale_max_disp needs one entry per residual scale (" +
                          std::to_string(num_scales - 1) + ")");
    }
    for (int d : per_scale_max_disp) {
        if (d < 0) throw ConfigError("per-scale max displacement must be >= 0");
    }
    if (matching_max_disp < 0) throw ConfigError("matching_max_disp must be >= 0");
    if (image_channels != 1 && image_channels != 3) throw ConfigError("image_channels must be 1 or 3");
    const Widths& w = widths;
    for (int v : {w.stem_full, w.stem_half, w.edge, w.left_transform, w.edge_transform, w.encoder_quarter,
                  w.encoder_eighth, w.head, w.residual_full, w.residual_coarse}) {
        if (v <= 0) throw ConfigError("channel widths must be positive");
    }
}

PyramidConfig PyramidConfig::for_variant(int initial_scale, int residual_max_disp) {
    PyramidConfig cfg;
    cfg.initial_scale = initial_scale;
    cfg.num_scales = initial_scale == 2 ? 2 : initial_scale == 4 ? 3 : initial_scale == 8 ? 4 : 0;
    cfg.per_scale_max_disp.assign(static_cast<std::size_t>(std::max(cfg.num_scales - 1, 0)), residual_max_disp);
    cfg.validate();
    return cfg;
}

int hybrid_channels(const PyramidConfig& cfg) {
    return cfg.matching_max_disp + 1 + cfg.widths.left_transform + (cfg.edge_embedding ? cfg.widths.edge_transform : 0);
}

const char* to_string(ParamGroup g) noexcept {
    switch (g) {
    case ParamGroup::SharedStem: return "shared_stem";
    case ParamGroup::EdgeBranch: return "edge_branch";
    case ParamGroup::DisparityBranch: return "disparity_branch";
    }
    return "unknown";
}

const Param& ModelParams::at(const std::string& name) const {
    for (const Param& p : params) {
        if (p.name == name) return p;
    }
    throw std::out_of_range("no parameter named " + name);
}

Param& ModelParams::at(const std::string& name) {
    return const_cast<Param&>(std::as_const(*this).at(name));
}

std::size_t ModelParams::count(ParamGroup g) const {
    std::size_t n = 0;
    for (const Param& p : params) n += p.group == g ? 1 : 0;
    return n;
}

std::size_t ModelParams::size() const {
    std::size_t n = 0;
    for (const Param& p : params) n += p.value.size();
    return n;
}

bool params_equal(const ModelParams& a, const ModelParams& b, ParamGroup g) {
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        const Param& pa = a.params[i];
        const Param& pb = b.params[i];
        if (pa.group != g && pb.group != g) continue;
        if (pa.name != pb.name || pa.group != pb.group || !(pa.value == pb.value)) return false;
    }
    return true;
}

namespace {

// Layer descriptions shared by init_params and forward.
struct LayerSpec {
    std::string name;
    ParamGroup group;
    int in;
    int out;
    int kernel;
    bool transposed;
    bool zero_init;
};

int residual_width(const PyramidConfig& cfg, int s) {
    return s == 0 ? cfg.widths.residual_full : cfg.widths.residual_coarse;
}

int stem_width(const PyramidConfig& cfg, int s) { return s == 0 ? cfg.widths.stem_full : cfg.widths.stem_half; }

int num_up_blocks(const PyramidConfig& cfg) { return cfg.initial_scale == 2 ? 2 : cfg.initial_scale == 4 ? 1 : 0; }

std::vector<LayerSpec> layer_specs(const PyramidConfig& cfg) {
    const Widths& w = cfg.widths;
    using G = ParamGroup;
    std::vector<LayerSpec> specs{
        {"stem.conv0", G::SharedStem, cfg.image_channels, w.stem_full, 3, false, false},
        {"stem.conv1", G::SharedStem, w.stem_full, w.stem_half, 3, false, false},
        {"edge.conv0", G::EdgeBranch, w.stem_half, w.edge, 3, false, false},
        {"edge.conv1", G::EdgeBranch, w.edge, w.edge, 3, false, false},
        {"edge.head", G::EdgeBranch, w.edge, 1, 1, false, true},
        {"disp.left_transform", G::DisparityBranch, w.stem_half, w.left_transform, 1, false, false},
    };
    if (cfg.edge_embedding) {
        specs.push_back({"disp.edge_transform", G::DisparityBranch, w.edge, w.edge_transform, 1, false, false});
    }
    specs.push_back({"disp.enc0", G::DisparityBranch, hybrid_channels(cfg), w.encoder_quarter, 3, false, false});
    specs.push_back({"disp.enc1", G::DisparityBranch, w.encoder_quarter, w.encoder_quarter, 3, false, false});
    specs.push_back({"disp.enc2", G::DisparityBranch, w.encoder_quarter, w.encoder_eighth, 3, false, false});
    specs.push_back({"disp.enc3", G::DisparityBranch, w.encoder_eighth, w.encoder_eighth, 3, false, false});
    int width = w.encoder_eighth;
    for (int u = 0; u < num_up_blocks(cfg); ++u) {
        specs.push_back({"disp.up" + std::to_string(u), G::DisparityBranch, width, w.encoder_quarter, 4, true, false});
        width = w.encoder_quarter;
    }
    specs.push_back({"disp.head0", G::DisparityBranch, width, w.head, 3, false, false});
    specs.push_back({"disp.head1", G::DisparityBranch, w.head, 1, 3, false, true});
    for (int s = cfg.num_scales - 2; s >= 0; --s) {
        const std::string p = "disp.res" + std::to_string(s);
        const int rw = residual_width(cfg, s);
        const int cost = 2 * (cfg.per_scale_max_disp[static_cast<std::size_t>(s)] + 1);
        specs.push_back({p + ".conv0", G::DisparityBranch, stem_width(cfg, s) + 1 + cost, rw, 3, false, false});
        specs.push_back({p + ".conv1", G::DisparityBranch, rw, rw, 3, false, false});
        specs.push_back({p + ".out", G::DisparityBranch, rw, 1, 3, false, true});
    }
    return specs;
}

} // namespace

ModelParams init_params(const PyramidConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ModelParams params;
    for (const LayerSpec& spec : layer_specs(cfg)) {
        Grid weight(spec.in * spec.out, spec.kernel, spec.kernel);
        if (!spec.zero_init) {
            // A stride-2 transposed convolution sees a quarter of its taps per output pixel.
            const double fan_in = spec.in * spec.kernel * spec.kernel / (spec.transposed ? 4.0 : 1.0);
            std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
            for (double& v : weight.data()) v = dist(rng);
        }
        params.params.push_back({spec.name + ".w", spec.group, std::move(weight)});
        params.params.push_back({spec.name + ".b", spec.group, Grid(spec.out, 1, 1)});
    }
    return params;
}

std::vector<ad::Var> param_leaves(ad::Tape& tape, const ModelParams& params, const std::vector<ParamGroup>& trainable) {
    std::vector<ad::Var> leaves;
    leaves.reserve(params.params.size());
    for (const Param& p : params.params) {
        const bool train = std::find(trainable.begin(), trainable.end(), p.group) != trainable.end();
        leaves.push_back(tape.leaf(p.value, train));
    }
    return leaves;
}

namespace {

class Net {
public:
    Net(const ModelParams& params, std::span<const ad::Var> leaves) : leaves_(leaves) {
        if (leaves.size() != params.params.size()) throw ShapeError("one leaf per parameter is required");
        for (std::size_t i = 0; i < params.params.size(); ++i) index_[params.params[i].name] = i;
    }

    ad::Var conv(const std::string& layer, ad::Var x, int stride, int pad) const {
        return ad::conv2d(x, leaf(layer + ".w"), leaf(layer + ".b"), stride, pad);
    }
    ad::Var conv_relu(const std::string& layer, ad::Var x, int stride = 1) const {
        const int k = leaf(layer + ".w").value().height();
        return ad::relu(conv(layer, x, stride, k / 2));
    }
    ad::Var deconv_relu(const std::string& layer, ad::Var x) const {
        return ad::relu(ad::deconv2d(x, leaf(layer + ".w"), leaf(layer + ".b"), 2, 1));
    }

private:
    ad::Var leaf(const std::string& name) const {
        const auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("checkpoint lacks parameter " + name);
        return leaves_[it->second];
    }

    std::span<const ad::Var> leaves_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace

ForwardResult forward(ad::Tape& tape, const ModelParams& params, std::span<const ad::Var> leaves, const Grid& left,
                      const Grid& right, const PyramidConfig& cfg, bool edges_only) {
    cfg.validate();
    if (!left.same_shape(right)) throw ShapeError("left and right images differ in shape");
    if (left.channels() != cfg.image_channels) throw ShapeError("image channel count differs from the config");
    if (left.height() % 8 != 0 || left.width() % 8 != 0) throw ShapeError("image sides must be multiples of 8");
    const Net net(params, leaves);
    ForwardResult out;

    // Shared stem, applied to both views with the same weights.
    const ad::Var il = tape.constant(left);
    const ad::Var ir = tape.constant(right);
    const ad::Var f0l = net.conv_relu("stem.conv0", il);
    const ad::Var f0r = net.conv_relu("stem.conv0", ir);
    const ad::Var f1l = net.conv_relu("stem.conv1", f0l, 2);
    const ad::Var f1r = net.conv_relu("stem.conv1", f0r, 2);

    // Edge branch on the left view.
    const ad::Var e1 = net.conv_relu("edge.conv1", net.conv_relu("edge.conv0", f1l));
    const ad::Var logits = net.conv("edge.head", e1, 1, 0);
    out.edges = ad::upsample2x(ad::sigmoid(logits), false);
    if (edges_only) return out;

    // Hybrid feature at 1/2 resolution.
    std::vector<ad::Var> hybrid{ad::correlate_1d(f1l, f1r, cfg.matching_max_disp),
                                net.conv_relu("disp.left_transform", f1l)};
    if (cfg.edge_embedding) hybrid.push_back(net.conv_relu("disp.edge_transform", e1));
    const ad::Var fh = ad::concat_channels(hybrid);
    out.hybrid_channels = fh.value().channels();

    // Encoder to 1/8, up-blocks to the initial scale, initial disparity head.
    ad::Var x = net.conv_relu("disp.enc0", fh, 2);
    x = net.conv_relu("disp.enc1", x);
    x = net.conv_relu("disp.enc2", x, 2);
    x = net.conv_relu("disp.enc3", x);
    for (int u = 0; u < num_up_blocks(cfg); ++u) x = net.deconv_relu("disp.up" + std::to_string(u), x);
    x = net.conv_relu("disp.head0", x);
    const ad::Var initial = ad::clamp_nonneg(net.conv("disp.head1", x, 1, 1));

    // Stem-pyramid features: full, half, then average-pooled halves.
    std::vector<std::pair<ad::Var, ad::Var>> features{{f0l, f0r}, {f1l, f1r}};
    while (static_cast<int>(features.size()) < cfg.num_scales - 1) {
        const auto& [fl, fr] = features.back();
        features.emplace_back(ad::avg_pool2x(fl), ad::avg_pool2x(fr));
    }

    out.disparities.resize(static_cast<std::size_t>(cfg.num_scales));
    const int h0 = initial.value().height();
    const int w0 = initial.value().width();
    out.disparities.back() = ad::DispVar{initial, Mask(h0, w0, true)};
    for (int s = cfg.num_scales - 2; s >= 0; --s) {
        const ad::DispVar& coarse = out.disparities[static_cast<std::size_t>(s) + 1];
        const auto& [fl, fr] = features[static_cast<std::size_t>(s)];
        const int ds = cfg.per_scale_max_disp[static_cast<std::size_t>(s)];
        const ad::DispVar up{ad::upsample2x(coarse.values, true), upsample2x(coarse.valid)};
        const ad::WarpVar warped = ad::warp_right_to_left(fr, up);
        // Residuals may have either sign, so the warped features are correlated both ways.
        const std::vector<ad::Var> parts{fl, up.values, ad::correlate_1d(fl, warped.values, ds),
                                         ad::correlate_1d(warped.values, fl, ds)};
        const std::string p = "disp.res" + std::to_string(s);
        ad::Var r = net.conv_relu(p + ".conv0", ad::concat_channels(parts));
        r = net.conv_relu(p + ".conv1", r);
        r = net.conv(p + ".out", r, 1, 1);
        out.disparities[static_cast<std::size_t>(s)] = ad::residual_compose(coarse, r);
    }
    return out;
}

std::pair<DisparityMap, EdgeMap> infer(const ModelParams& params, const Grid& left, const Grid& right,
                                       const PyramidConfig& cfg) {
    ad::Tape tape;
    const auto leaves = param_leaves(tape, params, {});
    const ForwardResult out = forward(tape, params, leaves, left, right, cfg);
    const ad::DispVar& d0 = out.disparities.front();
    Grid edges = out.edges.value();
    for (double& v : edges.data()) v = std::clamp(v, 0.0, 1.0);
    return {DisparityMap(d0.values.value(), d0.valid), EdgeMap(std::move(edges))};
}

} // namespace edgestereo::model
