#include <doctest.h>

#include <cmath>

#include "driftreg/error.hpp"
#include "driftreg/warp.hpp"
#include "support.hpp"

using namespace driftreg;

namespace {

Volume ramp_x(Dims d) {
    Volume v(d);
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x) v(x, y, z) = double(x);
    return v;
}

// Fractional coordinates kept away from integers so a small central
// difference never crosses a trilinear cell boundary.
DeformationField off_grid_field(Dims d, std::uint64_t seed) {
    DeformationField u = test::random_field(d, seed, 1.0);
    for (double& c : u.components()) c = std::round(c * 4.0) / 4.0 + 0.125;
    return u;
}

}  // namespace

TEST_CASE("zero field reproduces the input exactly") {
    const Volume m = test::random_volume(Dims{5, 6, 7}, 1);
    const Volume w = warp_trilinear(m, DeformationField(m.dims()));
    CHECK(test::bitwise_equal(w.data(), m.data()));
}

TEST_CASE("ramp shifted by whole and half voxels") {
    const Dims d{8, 5, 4};
    const Volume m = ramp_x(d);
    SUBCASE("+1") {
        const Volume w = warp_trilinear(m, test::constant_field(d, 1.0, 0.0, 0.0));
        for (std::size_t z = 0; z < d.z; ++z)
            for (std::size_t y = 0; y < d.y; ++y) {
                for (std::size_t x = 0; x + 1 < d.x; ++x) CHECK(w(x, y, z) == double(x + 1));
                CHECK(w(d.x - 1, y, z) == double(d.x - 1));
            }
    }
    SUBCASE("+0.5") {
        const Volume w = warp_trilinear(m, test::constant_field(d, 0.5, 0.0, 0.0));
        for (std::size_t x = 0; x + 1 < d.x; ++x) CHECK(std::abs(w(x, 2, 1) - (double(x) + 0.5)) < 1e-12);
    }
    SUBCASE("shift along a constant axis changes nothing in the interior") {
        const Volume w = warp_trilinear(m, test::constant_field(d, 0.0, 0.7, -0.3));
        for (std::size_t i = 0; i < m.size(); ++i) CHECK(std::abs(w[i] - m[i]) < 1e-12);
    }
}

TEST_CASE("warp rejects a field on another grid") {
    CHECK_THROWS_AS(warp_trilinear(Volume(Dims{4, 4, 4}), DeformationField(Dims{4, 4, 5})), ValidationError);
}

TEST_CASE("warp_gradient") {
    const Dims d{6, 6, 6};
    SUBCASE("constant image gives zero") {
        const Volume m(d, std::vector<double>(d.count(), 3.0));
        const WarpGradient g = warp_gradient(m, test::random_field(d, 2, 1.5), test::random_volume(d, 3));
        for (double x : g.components()) CHECK(x == 0.0);
    }
    SUBCASE("zero upstream gives zero") {
        const WarpGradient g = warp_gradient(test::random_volume(d, 4), test::random_field(d, 5, 1.5), Volume(d));
        for (double x : g.components()) CHECK(x == 0.0);
    }
    SUBCASE("central differences") {
        const Volume m = test::random_volume(d, 6);
        const Volume up = test::random_volume(d, 7, -1.0, 1.0);
        DeformationField u = off_grid_field(d, 8);
        const WarpGradient g = warp_gradient(m, u, up);
        auto objective = [&](const DeformationField& f) {
            const Volume w = warp_trilinear(m, f);
            double s = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) s += up[i] * w[i];
            return s;
        };
        const double h = 1e-4;
        double worst = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < u.components().size(); k += 7) {
            const double keep = u.components()[k];
            u.components()[k] = keep + h;
            const double fp = objective(u);
            u.components()[k] = keep - h;
            const double fm = objective(u);
            u.components()[k] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - g.components()[k]));
            scale = std::max(scale, std::abs(fd));
        }
        CHECK(scale > 0.0);
        CHECK(worst / scale < 1e-4);
    }
}

TEST_CASE("compose") {
    const Dims d{6, 6, 6};
    const DeformationField u = test::random_field(d, 9, 1.2);
    const DeformationField zero(d);
    CHECK(test::bitwise_equal(compose(zero, u).components(), u.components()));
    CHECK(test::bitwise_equal(compose(u, zero).components(), u.components()));

    const DeformationField c = compose(test::constant_field(d, 1.0, 0.0, 0.0), test::constant_field(d, 0.0, 1.0, 0.0));
    for (std::size_t z = 1; z + 1 < d.z; ++z)
        for (std::size_t y = 1; y + 1 < d.y; ++y)
            for (std::size_t x = 1; x + 1 < d.x; ++x) {
                const std::size_t v = d.index(x, y, z);
                CHECK(c(0, v) == 1.0);
                CHECK(c(1, v) == 1.0);
                CHECK(c(2, v) == 0.0);
            }
}

TEST_CASE("warp_labels uses the nearest voxel") {
    const Dims d{4, 1, 1};
    const LabelMap l(d, {0, 1, 2, 3});
    const LabelMap w = warp_labels(l, test::constant_field(d, 0.6, 0.0, 0.0));
    CHECK(w[0] == 1);
    CHECK(w[1] == 2);
    CHECK(w[2] == 3);
    CHECK(w[3] == 3);
}
