#include "doctest.h"
#include "fixtures.hpp"

#include "edgestereo/error.hpp"
#include "edgestereo/eval.hpp"
#include "edgestereo/model.hpp"
#include "edgestereo/synthetic.hpp"

#include <cmath>
#include <sstream>

using namespace edgestereo;
using namespace edgestereo::model;

namespace {

int count_prefix(const ModelParams& p, const std::string& prefix) {
    int n = 0;
    for (const Param& q : p.params) n += q.name.rfind(prefix, 0) == 0 && q.name.ends_with(".w") ? 1 : 0;
    return n;
}

StereoSample constant_sample(int h, int w, int d, std::uint64_t seed) {
    const std::vector<Layer> layers{{Rect{0, 0, h, w}, d}};
    return gen_random_dot_stereogram(h, w, seed, layers);
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("pyramid variants") {
    CHECK_NOTHROW(PyramidConfig{}.validate());
    for (int s : {2, 4, 8}) {
        const PyramidConfig cfg = PyramidConfig::for_variant(s);
        CHECK_NOTHROW(cfg.validate());
        CHECK(cfg.num_scales == static_cast<int>(std::log2(s)) + 1);
        const ModelParams p = init_params(cfg, 1);
        CHECK(count_prefix(p, "disp.up") == (s == 2 ? 2 : s == 4 ? 1 : 0));
        CHECK(count_prefix(p, "disp.res") == 3 * (cfg.num_scales - 1));
    }
    PyramidConfig bad;
    bad.num_scales = 2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = PyramidConfig{};
    bad.per_scale_max_disp = {3};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(PyramidConfig::for_variant(16), ConfigError);
}

TEST_CASE("hybrid feature channels and the edge-embedding ablation") {
    PyramidConfig cfg;
    CHECK(hybrid_channels(cfg) == 17 + 8 + 4);
    PyramidConfig ablated = cfg;
    ablated.edge_embedding = false;
    CHECK(hybrid_channels(cfg) - hybrid_channels(ablated) == cfg.widths.edge_transform);
    ad::Tape tape;
    const ModelParams p = init_params(ablated, 3);
    const auto leaves = param_leaves(tape, p, {});
    const StereoSample s = gen_default_sample(32, 64, 1);
    CHECK(forward(tape, p, leaves, s.left, s.right, ablated).hybrid_channels == hybrid_channels(ablated));
}

TEST_CASE("parameter groups and initialization") {
    const PyramidConfig cfg;
    const ModelParams p = init_params(cfg, 5);
    CHECK(p.count(ParamGroup::SharedStem) == 4);
    CHECK(p.count(ParamGroup::EdgeBranch) == 6);
    CHECK(p.count(ParamGroup::DisparityBranch) > 10);
    CHECK(p == init_params(cfg, 5));
    CHECK_FALSE(p == init_params(cfg, 6));
    for (const char* head : {"edge.head.w", "disp.head1.w", "disp.res0.out.w", "disp.res1.out.w"}) {
        for (double v : p.at(head).value.data()) CHECK(v == 0.0);
    }
    const Grid& w = p.at("disp.enc0.w").value;
    const double bound = std::sqrt(6.0 / (hybrid_channels(cfg) * 9));
    for (double v : w.data()) CHECK(std::abs(v) <= bound);
    CHECK_THROWS(p.at("nope"));
}

TEST_CASE("forward shapes at every scale") {
    const PyramidConfig cfg;
    const ModelParams p = init_params(cfg, 2);
    const StereoSample s = gen_default_sample(32, 64, 2);
    ad::Tape tape;
    const auto leaves = param_leaves(tape, p, {});
    const ForwardResult out = forward(tape, p, leaves, s.left, s.right, cfg);
    REQUIRE(out.disparities.size() == 3);
    for (int sc = 0; sc < 3; ++sc) {
        CHECK(out.disparities[sc].values.value().height() == 32 >> sc);
        CHECK(out.disparities[sc].values.value().width() == 64 >> sc);
    }
    CHECK(out.edges.value().height() == 32);
    for (double v : out.edges.value().data()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK_THROWS_AS(forward(tape, p, leaves, Grid(1, 30, 64), Grid(1, 30, 64), cfg), ShapeError);
    CHECK(forward(tape, p, leaves, s.left, s.right, cfg, true).disparities.empty());
}

TEST_CASE("zero heads on identical views give zero disparity at every scale") {
    const PyramidConfig cfg;
    const ModelParams p = init_params(cfg, 4);
    fixture::Rng rng(81);
    const Grid img = fixture::random_grid(rng, 1, 32, 64, 0, 1);
    ad::Tape tape;
    const auto leaves = param_leaves(tape, p, {});
    const ForwardResult out = forward(tape, p, leaves, img, img, cfg);
    for (const auto& d : out.disparities)
        for (double v : d.values.value().data()) CHECK(v == 0.0);
}

TEST_CASE("inference is deterministic and the untrained model is the zero predictor") {
    const PyramidConfig cfg;
    const ModelParams p = init_params(cfg, 4);
    const auto data = make_dataset(3, 32, 64, 8);
    const auto [d1, e1] = infer(p, data[0].left, data[0].right, cfg);
    const auto [d2, e2] = infer(p, data[0].left, data[0].right, cfg);
    CHECK(d1.values == d2.values);
    CHECK(e1.probabilities == e2.probabilities);
    double gt_mean = 0.0;
    for (const auto& s : data) {
        double sum = 0.0;
        int n = 0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 64; ++x)
                if (s.gt_disparity.valid(y, x)) {
                    sum += s.gt_disparity(y, x);
                    ++n;
                }
        gt_mean += sum / n / 3;
    }
    CHECK(mean_epe(p, data, cfg) == doctest::Approx(gt_mean).epsilon(1e-12));
    CHECK(zero_baseline_epe(data) == doctest::Approx(gt_mean).epsilon(1e-12));
}

TEST_CASE("poly schedule endpoints and stage groups") {
    CHECK(poly_lr(0.01, 0, 100, 0.9) == 0.01);
    CHECK(poly_lr(0.01, 100, 100, 0.9) == 0.0);
    CHECK(poly_lr(0.01, 50, 100, 1.0) == doctest::Approx(0.005));
    CHECK(trainable_groups(1) == std::vector<ParamGroup>{ParamGroup::EdgeBranch});
    CHECK(trainable_groups(2) == std::vector<ParamGroup>{ParamGroup::DisparityBranch});
    CHECK(trainable_groups(3).size() == 2);
    CHECK_THROWS_AS(trainable_groups(4), ConfigError);
}

TEST_CASE("stage 2 at a perfect fixed point stays at zero loss") {
    PyramidConfig cfg;
    std::vector<StereoSample> data;
    for (std::uint64_t i = 0; i < 2; ++i) data.push_back(constant_sample(16, 64, 4, i));
    ModelParams p = init_params(cfg, 9);
    // Zero weights and a bias of d / 4 make the 1/4-scale head output the downsampled truth.
    p.at("disp.head1.b").value[0] = 1.0;
    losses::LossWeights w;
    w.lambda_sm = {0.0, 0.0, 0.0};
    Schedule sch{5, 2, 0.01, 0.9, 0.9, 0.0};
    const LossLog log = train_stage(2, data, p, cfg, w, sch);
    REQUIRE(log.rows.size() == 5);
    CHECK(log.rows.front().back() <= 1e-12);
    CHECK(log.rows.back().back() <= 1e-12);
}

TEST_CASE("training changes only the stage's groups") {
    const PyramidConfig cfg;
    const auto data = make_dataset(2, 16, 64, 3);
    const losses::LossWeights w;
    for (int stage : {1, 2, 3}) {
        ModelParams p = init_params(cfg, 10);
        const ModelParams before = p;
        const LossLog log = train_stage(stage, data, p, cfg, w, Schedule{2, 2, 1e-3, 0.9, 0.9, 1e-4});
        CHECK(log.rows.size() == 2);
        const auto groups = trainable_groups(stage);
        for (ParamGroup g : {ParamGroup::SharedStem, ParamGroup::EdgeBranch, ParamGroup::DisparityBranch}) {
            const bool trainable = std::find(groups.begin(), groups.end(), g) != groups.end();
            CAPTURE(stage);
            CAPTURE(to_string(g));
            CHECK(params_equal(before, p, g) == !trainable);
        }
    }
    ModelParams fresh = init_params(cfg, 1);
    CHECK(train_stage(1, data, fresh, cfg, w, Schedule{1, 1}).columns ==
          std::vector<std::string>{"iter", "lr", "L_edge", "total"});
}

TEST_CASE("training rejects missing edge ground truth") {
    const PyramidConfig cfg;
    auto data = make_dataset(1, 16, 64, 3);
    data[0].gt_edges.reset();
    ModelParams p = init_params(cfg, 1);
    CHECK_THROWS_AS(train_stage(1, data, p, cfg, losses::LossWeights{}, Schedule{1, 1}), ConfigError);
}

TEST_CASE("loss log csv") {
    LossLog log{{"iter", "total"}, {{0, 1.5}, {1, 0.25}}};
    std::ostringstream out;
    log.write_csv(out);
    CHECK(out.str() == "iter,total\n0,1.5\n1,0.25\n");
}

TEST_CASE("checkpoint round trip and corruption") {
    const PyramidConfig cfg = PyramidConfig::for_variant(2);
    const ModelParams p = init_params(cfg, 12);
    const auto bytes = save_checkpoint(p, cfg);
    const auto [q, qcfg] = load_checkpoint(bytes);
    CHECK(q == p);
    CHECK(qcfg.initial_scale == 2);
    CHECK(qcfg.per_scale_max_disp == cfg.per_scale_max_disp);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(load_checkpoint(bad_magic), FormatError);
    CHECK_THROWS_AS(load_checkpoint(std::span(bytes).first(bytes.size() - 3)), FormatError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(load_checkpoint(trailing), FormatError);
}

} // TEST_SUITE
