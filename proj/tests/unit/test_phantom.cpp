#include <doctest.h>

#include <cmath>

#include "driftreg/error.hpp"
#include "driftreg/losses.hpp"
#include "driftreg/phantom.hpp"
#include "driftreg/warp.hpp"
#include "support.hpp"

using namespace driftreg;

TEST_CASE("spec validation") {
    PhantomSpec s;
    CHECK_NOTHROW(s.validate());
    s.size = 15;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = {};
    s.max_displacement = 8.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.max_displacement = -1.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = {};
    s.kind = DeformationKind::uniform_shift;
    s.shift = {0.0, 9.0, 0.0};
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK_THROWS_AS(make_phantom(PhantomSpec{.size = 8}), ValidationError);
    CHECK(deformation_kind_from_string(to_string(DeformationKind::uniform_shift)) == DeformationKind::uniform_shift);
    CHECK_THROWS_AS(deformation_kind_from_string("twist"), ValidationError);
}

TEST_CASE("make_phantom") {
    const PhantomSpec spec;
    const Phantom a = make_phantom(spec);
    const Phantom b = make_phantom(spec);
    CHECK(test::bitwise_equal(a.image.data(), b.image.data()));
    CHECK(std::equal(a.labels.labels().begin(), a.labels.labels().end(), b.labels.labels().begin()));
    CHECK(a.image.dims() == Dims{32, 32, 32});

    std::array<double, 4> sum{};
    std::array<std::size_t, 4> count{};
    for (std::size_t i = 0; i < a.image.size(); ++i) {
        const auto l = std::size_t(a.labels[i]);
        REQUIRE(l < 4);
        sum[l] += a.image[i];
        ++count[l];
    }
    for (std::size_t l = 0; l < 4; ++l) CHECK(count[l] > 0);
    for (std::size_t l = 1; l < 4; ++l) CHECK(sum[l] / double(count[l]) > sum[l - 1] / double(count[l - 1]));

    PhantomSpec other = spec;
    other.seed = 1;
    CHECK_FALSE(test::bitwise_equal(make_phantom(other).image.data(), a.image.data()));
}

TEST_CASE("make_deformation") {
    SUBCASE("zero displacement") {
        const DeformationField u = make_deformation(PhantomSpec{.max_displacement = 0.0});
        for (double x : u.components()) CHECK(x == 0.0);
    }
    SUBCASE("uniform shift") {
        const DeformationField u =
            make_deformation(PhantomSpec{.kind = DeformationKind::uniform_shift, .shift = {1.0, 0.0, 0.0}});
        for (double x : u.channel(0)) CHECK(x == 1.0);
        for (double x : u.channel(1)) CHECK(x == 0.0);
        for (double x : u.channel(2)) CHECK(x == 0.0);
    }
    SUBCASE("bumps scaled to the requested peak") {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            const PhantomSpec spec{.size = 24, .seed = seed, .max_displacement = 2.5};
            const DeformationField u = make_deformation(spec);
            double peak = 0.0;
            for (std::size_t i = 0; i < u.voxels(); ++i) peak = std::max(peak, std::hypot(u(0, i), u(1, i), u(2, i)));
            CHECK(std::abs(peak - 2.5) < 1e-9);
        }
    }
}

TEST_CASE("invert_field") {
    const DeformationField u = make_deformation(PhantomSpec{.size = 24, .seed = 3, .max_displacement = 2.0});
    const DeformationField v = invert_field(u);
    // warping by v then by u returns to the start: v(x) + u(x + v(x)) = 0
    const DeformationField round = compose(u, v);
    double worst = 0.0;
    for (double x : round.components()) worst = std::max(worst, std::abs(x));
    CHECK(worst < 1e-6);
}

TEST_CASE("make_pair") {
    SUBCASE("zero deformation leaves the image alone") {
        const PhantomPair p = make_pair(PhantomSpec{.max_displacement = 0.0});
        CHECK(test::bitwise_equal(p.fixed.data(), p.moving.data()));
    }
    SUBCASE("nonzero deformation changes the image") {
        const PhantomPair p = make_pair(PhantomSpec{});
        CHECK(ncc(p.fixed, p.moving).value < 1.0);
        // registration target: warping moving by gt approximately restores fixed
        const double before = ncc(p.fixed, p.moving).value;
        const double after = ncc(p.fixed, warp_trilinear(p.moving, p.gt)).value;
        CHECK(after > before);
        CHECK(after > 0.99);
    }
    SUBCASE("uniform shift is undone by its negation") {
        const PhantomSpec spec{.kind = DeformationKind::uniform_shift, .shift = {1.0, 0.0, 0.0}};
        const PhantomPair p = make_pair(spec);
        const Volume back = warp_trilinear(p.moving, p.gt);
        const Dims d = p.fixed.dims();
        for (std::size_t z = 0; z < d.z; ++z)
            for (std::size_t y = 0; y < d.y; ++y)
                for (std::size_t x = 1; x + 2 < d.x; ++x) CHECK(std::abs(back(x, y, z) - p.fixed(x, y, z)) < 1e-9);
    }
}

TEST_CASE("remap_intensity") {
    const Volume v(Dims{2, 1, 1}, std::vector<double>{2.0, 4.0});
    const Volume r = remap_intensity(test::random_volume(Dims{4, 4, 4}, 1, 3.0, 9.0), 2.0);
    double lo = 1.0, hi = 0.0;
    for (double x : r.data()) lo = std::min(lo, x), hi = std::max(hi, x);
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
    const Volume three(Dims{3, 1, 1}, std::vector<double>{0.0, 1.0, 2.0});
    CHECK(remap_intensity(three, 2.0)[1] == 0.25);
    CHECK_THROWS_AS(remap_intensity(v, 0.0), ValidationError);
    CHECK_THROWS_AS(remap_intensity(Volume(Dims{2, 2, 2}), 1.0), ValidationError);
}

TEST_CASE("dvf_endpoint_error") {
    const Dims d{8, 8, 8};
    const DeformationField a = test::constant_field(d, 3.0, 4.0, 0.0);
    const EndpointError e = dvf_endpoint_error(a, DeformationField(d));
    CHECK(e.mean == 5.0);
    CHECK(e.max == 5.0);
    DeformationField b(d);
    b(0, d.index(0, 0, 0)) = 100.0;  // inside the excluded margin
    CHECK(dvf_endpoint_error(b, DeformationField(d)).max == 0.0);
    CHECK_THROWS_AS(dvf_endpoint_error(DeformationField(Dims{4, 4, 4}), DeformationField(Dims{4, 4, 4})),
                    ValidationError);
}
