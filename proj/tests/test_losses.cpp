#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "edgestereo/error.hpp"
#include "edgestereo/losses.hpp"

#include <cmath>

using namespace edgestereo;
using namespace edgestereo::losses;

TEST_SUITE("losses") {

TEST_CASE("edge-aware smoothness examples") {
    fixture::Rng rng(41);
    const Grid e = fixture::random_grid(rng, 1, 4, 5, 0, 1);
    CHECK(edge_aware_smoothness(DisparityMap(Grid(1, 4, 5, 3.0)), e, 2.0) == 0.0);

    const DisparityMap d(Grid(1, 2, 2, std::vector<double>{0, 1, 0, 1}));
    const Grid ed(1, 2, 2, std::vector<double>{0, 1, 0, 1});
    CHECK(edge_aware_smoothness(d, ed, 2.0) == doctest::Approx(0.25 * 2 * std::exp(-2.0)).epsilon(1e-15));

    const DisparityMap r = fixture::random_disparity(rng, 4, 5, 4.0);
    const auto [gx, gy] = oracle::spatial_gradient(r.values);
    double plain = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) plain += std::abs(gx[i]) + std::abs(gy[i]);
    CHECK(edge_aware_smoothness(r, e, 0.0) == doctest::Approx(plain / 20).epsilon(1e-14));

    CHECK_THROWS_AS(edge_aware_smoothness(d, Grid(1, 2, 3), 2.0), ShapeError);
    CHECK_THROWS(edge_aware_smoothness(DisparityMap(Grid(1, 2, 2), Mask(2, 2, false)), ed, 2.0));
}

TEST_CASE("l1 regression examples") {
    const DisparityMap gt(Grid(1, 2, 2, std::vector<double>{1, 2, 3, 4}));
    CHECK(l1_regression(gt, gt) == 0.0);
    CHECK(l1_regression(DisparityMap(Grid(1, 2, 2, std::vector<double>{2, 3, 4, 5})), gt) == 1.0);
    Mask m(2, 2, false);
    m.set(0, 0, true);
    m.set(1, 1, true);
    const DisparityMap sparse(gt.values, m);
    CHECK(l1_regression(DisparityMap(Grid(1, 2, 2, std::vector<double>{2, 9, 9, 7})), sparse) == 2.0);
    CHECK_THROWS(l1_regression(gt, DisparityMap(gt.values, Mask(2, 2, false))));
}

TEST_CASE("charbonnier examples") {
    const double ce = charbonnier_smoothness(DisparityMap(Grid(1, 3, 3, 1.0)), 0.45, 1e-3);
    CHECK(ce == doctest::Approx(2 * std::pow(1e-3, 0.9)).epsilon(1e-14));
    fixture::Rng rng(42);
    const DisparityMap d = fixture::random_disparity(rng, 3, 3, 4.0);
    const auto [gx, gy] = oracle::spatial_gradient(d.values);
    double l1_mean = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) l1_mean += std::abs(gx[i]) + std::abs(gy[i]);
    CHECK(charbonnier_smoothness(d, 0.5, 0.0) == doctest::Approx(l1_mean / 9).epsilon(1e-14));
    CHECK(std::abs(charbonnier_smoothness(d, 0.45, 1e-3) - oracle::charbonnier(d, 0.45, 1e-3)) <= 1e-12);
}

TEST_CASE("second-order smoothness examples") {
    Grid ramp(1, 4, 5);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) ramp(0, y, x) = 2.0 * x - y + 1;
    fixture::Rng rng(43);
    CHECK(second_order_smoothness(DisparityMap(ramp), fixture::random_grid(rng, 1, 4, 5, 0, 1)) == 0.0);
    // [0 0 1 1]: second differences at x = 1, 2 are 1 and -1, constant image.
    const DisparityMap step(Grid(1, 1, 4, std::vector<double>{0, 0, 1, 1}));
    CHECK(second_order_smoothness(step, Grid(1, 1, 4, 0.3)) == 0.5);
    CHECK_THROWS(second_order_smoothness(DisparityMap(Grid(1, 2, 2)), Grid(1, 2, 2)));
}

TEST_CASE("class-balanced bce examples") {
    const EdgeMap gt(Grid(1, 2, 2, std::vector<double>{1, 0, 0, 0}));
    const Grid exact = gt.probabilities;
    CHECK(class_balanced_bce(exact, gt) <= 4 * 1e-7 * (1 + kBceBalance) + 1e-12);
    const Grid p(1, 2, 2, std::vector<double>{0.7, 0.2, 0.1, 0.4});
    const double hand = -(0.75 * std::log(0.7) + 1.1 * 0.25 * (std::log(0.8) + std::log(0.9) + std::log(0.6)));
    CHECK(class_balanced_bce(p, gt) == doctest::Approx(hand).epsilon(1e-14));
    const EdgeMap none(Grid(1, 2, 2));
    // No positives: w+ = 1 but never used, w- = 0, so the loss vanishes.
    CHECK(class_balanced_bce(p, none) == 0.0);
    const EdgeMap all(Grid(1, 2, 2, 1.0));
    CHECK(std::isfinite(class_balanced_bce(p, all)));
    CHECK_THROWS(class_balanced_bce(p, EdgeMap(Grid(1, 2, 2, 0.5))));
}

TEST_CASE("multiscale total") {
    const LossWeights w;
    const std::vector<ScaleLoss> ones(3, ScaleLoss{1.0, 1.0});
    CHECK(multiscale_total(ones, w) == doctest::Approx(2.64).epsilon(1e-15));
    CHECK(multiscale_total(std::vector<ScaleLoss>(3), w) == 0.0);
    LossWeights single;
    single.lambda_r = {1.0};
    single.lambda_sm = {1.0};
    CHECK(multiscale_total(std::vector<ScaleLoss>{{0.25, 0.5}}, single) == 0.75);
    CHECK_THROWS(multiscale_total(std::vector<ScaleLoss>(2), w));
    CHECK_THROWS_AS(w.validate(2), ConfigError);
    LossWeights negative;
    negative.lambda_sm[1] = -0.1;
    CHECK_THROWS_AS(negative.validate(3), ConfigError);
}

TEST_CASE("losses match brute-force oracles on random fixtures") {
    fixture::Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = fixture::integer(rng, 3, 6), w = fixture::integer(rng, 3, 6);
        const DisparityMap d = fixture::random_disparity(rng, h, w, 5.0, 0.8);
        if (d.valid.count() == 0) continue;
        const DisparityMap gt(fixture::random_grid(rng, 1, h, w, 0, 5), d.valid);
        const Grid e = fixture::random_grid(rng, 1, h, w, 0, 1);
        const Grid img = fixture::random_grid(rng, 2, h, w, 0, 1);
        CHECK(std::abs(edge_aware_smoothness(d, e, 2.0) - oracle::edge_aware(d, e, 2.0)) <= 1e-12);
        CHECK(std::abs(l1_regression(d, gt) - oracle::l1(d, gt)) <= 1e-12);
        CHECK(std::abs(charbonnier_smoothness(d) - oracle::charbonnier(d, 0.45, 1e-3)) <= 1e-12);
        CHECK(std::abs(second_order_smoothness(d, img) - oracle::second_order(d, img)) <= 1e-12);
    }
}

} // TEST_SUITE
