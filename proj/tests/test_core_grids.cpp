#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "edgestereo/error.hpp"
#include "edgestereo/grid.hpp"

#include <cmath>

using namespace edgestereo;

namespace {

double max_abs_diff(const Grid& a, const Grid& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_SUITE("core_grids") {

TEST_CASE("grid shape and storage") {
    Grid g(2, 3, 4, 1.5);
    CHECK(g.size() == 24);
    CHECK(g.plane_size() == 12);
    g(1, 2, 3) = 7.0;
    CHECK(g[23] == 7.0);
    CHECK_THROWS_AS(Grid(0, 2, 2), ShapeError);
    CHECK_THROWS_AS(Grid(1, 2, 2, std::vector<double>(3)), ShapeError);
    CHECK(g.all_finite());
    g(0, 0, 0) = std::nan("");
    CHECK_FALSE(g.all_finite());
}

TEST_CASE("disparity and edge map invariants") {
    CHECK_THROWS_AS(DisparityMap(Grid(2, 2, 2)), ShapeError);
    CHECK_THROWS_AS(DisparityMap(Grid(1, 2, 2), Mask(2, 3)), ShapeError);
    CHECK_THROWS(EdgeMap(Grid(1, 1, 1, 1.5)));
    CHECK(EdgeMap(Grid(1, 1, 2, std::vector<double>{0.0, 1.0})).is_binary());
    CHECK_FALSE(EdgeMap(Grid(1, 1, 1, 0.5)).is_binary());
}

TEST_CASE("upsample2x of a single pixel") {
    const Grid g(1, 1, 1, 5.0);
    CHECK(upsample2x(g, false) == Grid(1, 2, 2, 5.0));
    CHECK(upsample2x(g, true) == Grid(1, 2, 2, 10.0));
}

TEST_CASE("upsample2x ramp matches direct bilinear evaluation") {
    const Grid ramp(1, 2, 2, std::vector<double>{0, 1, 0, 1});
    const Grid up = upsample2x(ramp, false);
    CHECK(up.height() == 4);
    CHECK(up.width() == 4);
    // Corner-aligned: output column i samples source x = i / 3.
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(up(0, y, x) == doctest::Approx(x / 3.0).epsilon(1e-15));
    CHECK(max_abs_diff(up, oracle::upsample2x(ramp, false)) <= 1e-12);
}

TEST_CASE("upsample2x random grids match the oracle") {
    fixture::Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = fixture::random_grid(rng, fixture::integer(rng, 1, 3), fixture::integer(rng, 1, 6),
                                            fixture::integer(rng, 1, 6));
        CHECK(max_abs_diff(upsample2x(g, true), oracle::upsample2x(g, true)) <= 1e-12);
    }
}

TEST_CASE("upsample2x backward is the adjoint") {
    fixture::Rng rng(12);
    const Grid x = fixture::random_grid(rng, 2, 3, 5);
    const Grid gy = fixture::random_grid(rng, 2, 6, 10);
    const Grid y = upsample2x(x, true);
    const Grid gx = upsample2x_backward(gy, 3, 5, true);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * gy[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * gx[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("mask upsampling needs every contributing source") {
    Mask m(2, 2, true);
    m.set(0, 0, false);
    const Mask up = upsample2x(m);
    CHECK_FALSE(up(0, 0));
    CHECK_FALSE(up(1, 1));
    CHECK(up(3, 3));
    // Column 3 of a 4-wide output sits exactly on source column 1; column 2 blends both.
    CHECK(up(0, 3));
    CHECK_FALSE(up(0, 2));
}

TEST_CASE("spatial_gradient") {
    CHECK_THROWS_AS(spatial_gradient(Grid(1, 1, 4)), ShapeError);
    const auto [cx, cy] = spatial_gradient(Grid(1, 3, 3, 2.0));
    CHECK(cx == Grid(1, 3, 3));
    CHECK(cy == Grid(1, 3, 3));
    const auto [gx, gy] = spatial_gradient(Grid(1, 2, 2, std::vector<double>{0, 3, 0, 3}));
    CHECK(gx == Grid(1, 2, 2, std::vector<double>{3, 0, 3, 0}));
    CHECK(gy == Grid(1, 2, 2));
    fixture::Rng rng(13);
    const Grid r = fixture::random_grid(rng, 1, 4, 4);
    const auto [rx, ry] = spatial_gradient(r);
    const auto [ox, oy] = oracle::spatial_gradient(r);
    CHECK(rx == ox);
    CHECK(ry == oy);
}

TEST_CASE("concat_channels") {
    const Grid a(1, 2, 2, 1.0), b(1, 2, 2, 2.0);
    const Grid ab = concat_channels(std::vector<Grid>{a, b});
    CHECK(ab.channels() == 2);
    CHECK(ab(0, 1, 1) == 1.0);
    CHECK(ab(1, 0, 0) == 2.0);
    CHECK(concat_channels(std::vector<Grid>{a}) == a);
    CHECK(concat_channels(std::vector<Grid>{Grid(3, 5, 7), Grid(97, 5, 7), Grid(4, 5, 7)}).channels() == 104);
    CHECK_THROWS_AS(concat_channels(std::vector<Grid>{a, Grid(1, 2, 3)}), ShapeError);
    CHECK(slice_channels(ab, 1, 1) == b);
}

TEST_CASE("avg_pool2x and downsample_disparity") {
    const Grid g(1, 3, 4, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 9});
    const Grid p = avg_pool2x(g);
    CHECK(p.height() == 1);
    CHECK(p.width() == 2);
    CHECK(p(0, 0, 0) == 3.5);
    CHECK(p(0, 0, 1) == 5.5);

    Mask valid(2, 2, false);
    valid.set(0, 1, true);
    valid.set(1, 1, true);
    const DisparityMap d(Grid(1, 2, 2, std::vector<double>{100, 4, 100, 8}), valid);
    const DisparityMap half = downsample_disparity(d);
    CHECK(half(0, 0) == 3.0);
    CHECK(half.valid(0, 0));
    const DisparityMap none(Grid(1, 2, 2), Mask(2, 2, false));
    CHECK_FALSE(downsample_disparity(none).valid(0, 0));
}

TEST_CASE("property: exported operations keep values finite and shapes consistent") {
    fixture::Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const int c = fixture::integer(rng, 1, 3), h = fixture::integer(rng, 2, 7), w = fixture::integer(rng, 2, 7);
        const Grid g = fixture::random_grid(rng, c, h, w, -100, 100);
        const Grid up = upsample2x(g, true);
        CHECK(up.size() == static_cast<std::size_t>(c) * 4 * h * w);
        CHECK(up.all_finite());
        const auto [gx, gy] = spatial_gradient(g);
        CHECK((gx.all_finite() && gy.all_finite()));
        CHECK(avg_pool2x(g).all_finite());
    }
}

} // TEST_SUITE
