#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "driftreg/error.hpp"
#include "driftreg/metrics.hpp"
#include "support.hpp"
#include "welch_reference.hpp"

using namespace driftreg;

namespace {

Volume affine(const Volume& v, double scale, double offset) {
    Volume out = v;
    for (double& x : out.data()) x = scale * x + offset;
    return out;
}

// Straight 7^3 windowed SSIM with two-pass window statistics.
double ssim_reference(const Volume& a, const Volume& b) {
    const Dims& d = a.dims();
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < a.size(); ++i) {
        lo = std::min({lo, a[i], b[i]});
        hi = std::max({hi, a[i], b[i]});
    }
    const double L = hi - lo, c1 = 1e-4 * L * L, c2 = 9e-4 * L * L;
    const std::size_t w = 7;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t z = 0; z + w <= d.z; ++z)
        for (std::size_t y = 0; y + w <= d.y; ++y)
            for (std::size_t x = 0; x + w <= d.x; ++x) {
                double ma = 0.0, mb = 0.0;
                for (std::size_t k = 0; k < w; ++k)
                    for (std::size_t j = 0; j < w; ++j)
                        for (std::size_t i = 0; i < w; ++i) ma += a(x + i, y + j, z + k), mb += b(x + i, y + j, z + k);
                ma /= 343.0;
                mb /= 343.0;
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (std::size_t k = 0; k < w; ++k)
                    for (std::size_t j = 0; j < w; ++j)
                        for (std::size_t i = 0; i < w; ++i) {
                            const double ea = a(x + i, y + j, z + k) - ma, eb = b(x + i, y + j, z + k) - mb;
                            va += ea * ea, vb += eb * eb, cov += ea * eb;
                        }
                va /= 342.0, vb /= 342.0, cov /= 342.0;
                acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    return acc / double(count);
}

}  // namespace

TEST_CASE("pcc") {
    const Dims d{6, 6, 6};
    const Volume a = test::random_volume(d, 1);
    const Volume b = test::random_volume(d, 2);
    CHECK(pcc(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pcc(a, affine(a, -1.0, 0.0)) == doctest::Approx(-1.0).epsilon(1e-12));

    const double n = double(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n, mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    const double ref = (sab / (n - 1.0)) / (std::sqrt(saa / (n - 1.0)) * std::sqrt(sbb / (n - 1.0)));
    CHECK(std::abs(pcc(a, b) - ref) < 1e-12);
    CHECK(std::abs(pcc(affine(a, 3.0, -7.0), affine(b, 0.25, 100.0)) - pcc(a, b)) < 1e-9);
    CHECK_THROWS_AS(pcc(a, Volume(d)), NumericalError);
}

TEST_CASE("dice") {
    const Dims d{8, 1, 1};
    SUBCASE("identical maps") {
        const LabelMap x(d, {0, 1, 2, 3, 3, 2, 1, 0});
        const DiceScores s = dice(x, x);
        CHECK(s.per_class.size() == 4);
        for (const auto& [label, v] : s.per_class) CHECK(v == 1.0);
        CHECK(s.mean == 1.0);
    }
    SUBCASE("overlapping runs") {
        const LabelMap x(d, {0, 1, 1, 1, 1, 0, 0, 0});
        const LabelMap y(d, {0, 0, 0, 1, 1, 1, 1, 0});
        const DiceScores s = dice(x, y);
        CHECK(s.per_class.at(1) == 0.5);
        // background: x has {0,5,6,7}, y has {0,1,2,7}; overlap {0,7}
        CHECK(s.per_class.at(0) == 0.5);
        CHECK(s.mean == 0.5);
        const DiceScores r = dice(y, x);
        CHECK(r.mean == s.mean);
    }
    SUBCASE("disjoint masks") {
        const LabelMap x(d, {1, 1, 1, 1, 0, 0, 0, 0});
        const LabelMap y(d, {0, 0, 0, 0, 1, 1, 1, 1});
        CHECK(dice(x, y).per_class.at(1) == 0.0);
    }
    SUBCASE("alphabets must match") {
        CHECK_THROWS_AS(dice(LabelMap(d, {0, 1, 2, 0, 0, 0, 0, 0}), LabelMap(d, {0, 1, 0, 0, 0, 0, 0, 0})),
                        ValidationError);
    }
}

TEST_CASE("kld") {
    SUBCASE("two-bin hand case") {
        const JointHistogram po{2, {0.5, 0.0, 0.0, 0.5}};
        const JointHistogram pe{2, {0.25, 0.0, 0.0, 0.75}};
        CHECK(std::abs(kld_from_joint(po, pe) - 0.14384103622589042) < 1e-8);
    }
    SUBCASE("identical distributions") {
        const Volume a = test::random_volume(Dims{8, 8, 8}, 3);
        const Volume b = test::random_volume(Dims{8, 8, 8}, 4);
        CHECK(std::abs(kld_joint(a, b, b, 16)) < 1e-12);
    }
    SUBCASE("non-negative") {
        for (std::uint64_t s = 0; s < 10; ++s) {
            const Volume a = test::random_volume(Dims{6, 6, 6}, s);
            const Volume b = test::random_volume(Dims{6, 6, 6}, s + 100);
            const Volume c = test::random_volume(Dims{6, 6, 6}, s + 200, -1.0, 2.0);
            CHECK(kld_joint(a, b, c, 8) >= -1e-12);
        }
    }
    CHECK_THROWS_AS(kld_joint(Volume(Dims{2, 2, 2}), Volume(Dims{2, 2, 2}), Volume(Dims{2, 2, 2}), 1),
                    ValidationError);
}

TEST_CASE("ssim") {
    const Dims d{12, 12, 12};
    const Volume a = test::random_volume(d, 5);
    const Volume b = test::random_volume(d, 6, 0.2, 1.4);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(ssim(a, b) - ssim_reference(a, b)) < 1e-9);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12);

    const double L = 3.0;
    const double c1 = (0.01 * L) * (0.01 * L);
    CHECK(ssim(Volume(Dims{7, 7, 7}), Volume(Dims{7, 7, 7}, std::vector<double>(343, L))) ==
          doctest::Approx(c1 / (L * L + c1)).epsilon(1e-12));
    CHECK(ssim(Volume(Dims{7, 7, 7}), Volume(Dims{7, 7, 7})) == 1.0);
    CHECK_THROWS_AS(ssim(Volume(Dims{6, 7, 7}), Volume(Dims{6, 7, 7})), ValidationError);
}

TEST_CASE("mse_metric") {
    const Dims d{5, 5, 5};
    CHECK(mse_metric(Volume(d), Volume(d, std::vector<double>(125, 2.0))) == 4.0);
    const Volume a = test::random_volume(d, 7), b = test::random_volume(d, 8);
    CHECK(mse_metric(a, a) == 0.0);
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ref += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::abs(mse_metric(a, b) - ref / 125.0) < 1e-12);
}

TEST_CASE("welch_ttest") {
    SUBCASE("equal samples") {
        const std::vector<double> x{1, 2, 3};
        const TTest t = welch_ttest(x, x);
        CHECK(t.t == 0.0);
        CHECK(t.p == 1.0);
    }
    SUBCASE("shifted ramps") {
        const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 3, 4, 5, 6};
        const TTest t = welch_ttest(x, y);
        CHECK(std::abs(t.t - -1.0) < 1e-12);
        CHECK(std::abs(t.df - 8.0) < 1e-12);
        CHECK(std::abs(t.p - 0.34659350708733416) < 1e-6);
    }
    SUBCASE("reference implementation") {
        for (const WelchCase& c : kWelchCases) {
            const TTest t = welch_ttest(c.x, c.y);
            CHECK(std::abs(t.t - c.t) < 1e-9);
            CHECK(std::abs(t.p - c.p) < 1e-6);
        }
    }
    SUBCASE("errors") {
        const std::vector<double> zeros{0, 0, 0, 0}, ones{1, 1, 1, 1}, one{1};
        CHECK_THROWS_AS(welch_ttest(zeros, ones), NumericalError);
        CHECK_THROWS_AS(welch_ttest(one, ones), ValidationError);
    }
}

TEST_CASE("segment_intensity") {
    SUBCASE("binary volume") {
        std::vector<double> v(64);
        for (std::size_t i = 0; i < 64; ++i) v[i] = (i * 7) % 3 == 0 ? 5.0 : 1.0;
        const LabelMap l = segment_intensity(Volume(Dims{4, 4, 4}, v), 2);
        for (std::size_t i = 0; i < 64; ++i) CHECK(l[i] == (v[i] > 3.0 ? 1 : 0));
    }
    SUBCASE("three separated clusters") {
        std::mt19937_64 rng(9);
        std::normal_distribution<double> noise(0.0, 0.3);
        const double centres[3] = {10.0, 0.0, 20.0};
        std::vector<double> v(216);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = centres[i % 3] + noise(rng);
        const Volume vol(Dims{6, 6, 6}, v);
        const LabelMap l = segment_intensity(vol, 3, 4);
        // nearest-mean oracle with centres in ascending order
        const double sorted[3] = {0.0, 10.0, 20.0};
        for (std::size_t i = 0; i < v.size(); ++i) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (std::abs(v[i] - sorted[k]) < std::abs(v[i] - sorted[best])) best = k;
            CHECK(l[i] == best);
        }
        CHECK(segment_intensity(vol, 3, 4).labels()[5] == l[5]);
        const LabelMap other = segment_intensity(vol, 3, 99);
        CHECK(std::equal(other.labels().begin(), other.labels().end(), l.labels().begin()));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(segment_intensity(Volume(Dims{2, 2, 2}, std::vector<double>(8, 1.0)), 2), ValidationError);
        CHECK_THROWS_AS(segment_intensity(test::random_volume(Dims{2, 2, 2}, 1), 1), ValidationError);
    }
}

TEST_CASE("evaluate_metrics") {
    const Dims d{8, 8, 8};
    std::vector<double> v(d.count());
    std::vector<std::int32_t> lab(d.count());
    for (std::size_t i = 0; i < v.size(); ++i) {
        lab[i] = std::int32_t(i % 4);
        v[i] = double(lab[i]) + 0.01 * double(i % 7);
    }
    const Volume f(d, v);
    const LabelMap l(d, lab);
    const Volume g = affine(f, 1.0, 0.05);

    const MetricReport r = evaluate_metrics(f, g, &l, &l);
    for (const char* k : {"pcc", "kld", "dice", "ssim", "mse"}) CHECK(r.values.count(k) == 1);
    CHECK(r.values.at("dice") == 1.0);
    CHECK(r.notes.empty());
    CHECK(r.dice_per_class.size() == 4);

    const MetricReport inter = evaluate_metrics(f, g, nullptr, nullptr, {.intermodal = true});
    CHECK(inter.values.size() == 3);
    CHECK(inter.values.count("ssim") == 0);
    CHECK(inter.notes.size() == 1);

    const MetricReport self = evaluate_metrics(f, f, nullptr, nullptr);
    CHECK(self.values.at("pcc") == doctest::Approx(1.0));
    CHECK(self.values.at("kld") == 0.0);
    CHECK(self.values.at("mse") == 0.0);
    CHECK(self.values.at("ssim") == doctest::Approx(1.0));
}
