#include <doctest.h>

#include <cmath>
#include <limits>

#include "driftreg/error.hpp"
#include "driftreg/volume.hpp"
#include "support.hpp"

using namespace driftreg;

TEST_CASE("dims index is x-fastest") {
    const Dims d{3, 4, 5};
    CHECK(d.count() == 60);
    CHECK(d.index(0, 0, 0) == 0);
    CHECK(d.index(1, 0, 0) == 1);
    CHECK(d.index(0, 1, 0) == 3);
    CHECK(d.index(0, 0, 1) == 12);
    CHECK(d.index(2, 3, 4) == 59);
}

TEST_CASE("volume construction validates its invariants") {
    CHECK_THROWS_AS(Volume(Dims{2, 2, 2}, std::vector<double>(7, 0.0)), ValidationError);
    CHECK_THROWS_AS(Volume(Dims{0, 2, 2}), ValidationError);
    CHECK_THROWS_AS(Volume(Dims{2, 2, 2}, Spacing{1.0, 0.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(Volume(Dims{2, 2, 2}, Spacing{1.0, -1.0, 1.0}), ValidationError);
    std::vector<double> bad(8, 0.0);
    bad[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Volume(Dims{2, 2, 2}, bad), ValidationError);
    bad[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Volume(Dims{2, 2, 2}, bad), ValidationError);

    Volume v(Dims{2, 3, 4}, Spacing{1.0, 2.0, 3.0});
    CHECK(v.size() == 24);
    CHECK(v.spacing()[2] == 3.0);
}

TEST_CASE("label maps reject negative labels and count classes") {
    CHECK_THROWS_AS(LabelMap(Dims{2, 1, 1}, {0, -1}), ValidationError);
    LabelMap l(Dims{2, 2, 1}, {0, 3, 1, 1});
    CHECK(l.class_count() == 4);
}

TEST_CASE("deformation fields are channel-planar") {
    std::vector<double> c(3 * 8);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = double(i);
    DeformationField u(Dims{2, 2, 2}, c);
    CHECK(u(0, 5) == 5.0);
    CHECK(u(1, 5) == 13.0);
    CHECK(u(2, 5) == 21.0);
    CHECK(u.channel(2)[0] == 16.0);
    CHECK_THROWS_AS(DeformationField(Dims{2, 2, 2}, std::vector<double>(8)), ValidationError);
}

TEST_CASE("normalize_zscore") {
    SUBCASE("ramp") {
        std::vector<double> r(27);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = double(i + 1);
        const Volume z = normalize_zscore(Volume(Dims{3, 3, 3}, r));
        double m = 0.0, s = 0.0;
        for (double x : z.data()) m += x;
        m /= 27.0;
        for (double x : z.data()) s += (x - m) * (x - m);
        CHECK(std::abs(m) < 1e-6);
        CHECK(std::sqrt(s / 27.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("constant volume is rejected") {
        CHECK_THROWS_AS(normalize_zscore(Volume(Dims{2, 2, 2}, std::vector<double>(8, 4.2))), ValidationError);
    }
    SUBCASE("random volume against a two-pass loop") {
        const Volume v = test::random_volume(Dims{8, 8, 8}, 11, -3.0, 5.0);
        const Volume z = normalize_zscore(v);
        double mean = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) mean += v[i];
        mean /= double(v.size());
        double var = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) var += (v[i] - mean) * (v[i] - mean);
        const double sd = std::sqrt(var / double(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(z[i] - (v[i] - mean) / sd) < 1e-9);
    }
}

TEST_CASE("downsample2x") {
    SUBCASE("2x2x2 block mean") {
        const Volume v(Dims{2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
        const Volume d = downsample2x(v);
        CHECK(d.dims() == Dims{1, 1, 1});
        CHECK(d[0] == 3.5);
        CHECK(d.spacing()[0] == 2.0);
    }
    SUBCASE("constant stays constant") {
        const Volume d = downsample2x(Volume(Dims{4, 6, 2}, std::vector<double>(48, 2.5)));
        for (double x : d.data()) CHECK(x == 2.5);
    }
    SUBCASE("random against an explicit triple loop") {
        const Volume v = test::random_volume(Dims{8, 8, 8}, 5);
        const Volume d = downsample2x(v);
        for (std::size_t z = 0; z < 4; ++z)
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 4; ++x) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < 8; ++k) s += v(2 * x + (k & 1), 2 * y + ((k >> 1) & 1), 2 * z + (k >> 2));
                    CHECK(std::abs(d(x, y, z) - s / 8.0) < 1e-12);
                }
    }
    SUBCASE("odd dims are rejected") { CHECK_THROWS_AS(downsample2x(Volume(Dims{3, 2, 2})), ValidationError); }
}

TEST_CASE("downsample_dvf") {
    const Dims d{4, 4, 6};
    SUBCASE("zero stays zero") {
        const DeformationField h = downsample_dvf(DeformationField(d));
        CHECK(h.dims() == Dims{2, 2, 3});
        for (double x : h.components()) CHECK(x == 0.0);
    }
    SUBCASE("+2 voxel shift becomes +1") {
        const DeformationField h = downsample_dvf(test::constant_field(d, 2.0, 0.0, 0.0));
        for (double x : h.channel(0)) CHECK(x == 1.0);
        for (double x : h.channel(1)) CHECK(x == 0.0);
    }
    SUBCASE("random against block mean x 0.5") {
        const DeformationField u = test::random_field(d, 3, 2.0);
        const DeformationField h = downsample_dvf(u);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t z = 0; z < 3; ++z)
                for (std::size_t y = 0; y < 2; ++y)
                    for (std::size_t x = 0; x < 2; ++x) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < 8; ++k)
                            s += u(c, d.index(2 * x + (k & 1), 2 * y + ((k >> 1) & 1), 2 * z + (k >> 2)));
                        CHECK(std::abs(h(c, h.dims().index(x, y, z)) - 0.5 * s / 8.0) < 1e-12);
                    }
    }
    SUBCASE("adjoint identity <D u, w> = <u, D^T w>") {
        const DeformationField u = test::random_field(d, 8, 1.0);
        const DeformationField w = test::random_field(Dims{2, 2, 3}, 9, 1.0);
        const DeformationField du = downsample_dvf(u);
        const DeformationField dtw = downsample_dvf_adjoint(w, d);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < du.components().size(); ++i) lhs += du.components()[i] * w.components()[i];
        for (std::size_t i = 0; i < u.components().size(); ++i) rhs += u.components()[i] * dtw.components()[i];
        CHECK(std::abs(lhs - rhs) < 1e-12);
    }
    SUBCASE("odd dims are rejected") {
        CHECK_THROWS_AS(downsample_dvf(DeformationField(Dims{4, 4, 5})), ValidationError);
    }
}
