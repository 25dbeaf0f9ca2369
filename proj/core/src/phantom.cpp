#include "driftreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "driftreg/error.hpp"
#include "driftreg/warp.hpp"

namespace driftreg {

std::string to_string(DeformationKind k) {
    return k == DeformationKind::gaussian_bumps ? "gaussian_bumps" : "uniform_shift";
}

DeformationKind deformation_kind_from_string(const std::string& name) {
    if (name == "gaussian_bumps") return DeformationKind::gaussian_bumps;
    if (name == "uniform_shift") return DeformationKind::uniform_shift;
    throw ValidationError("phantom", "unknown deformation kind '" + name + "' (expected gaussian_bumps or uniform_shift)");
}

void PhantomSpec::validate() const {
    if (size < 16) throw ValidationError("phantom", "size must be >= 16, got " + std::to_string(size));
    const double limit = double(size) / 4.0;
    if (!(max_displacement >= 0.0) || !(max_displacement < limit))
        throw ValidationError("phantom", "max_displacement must lie in [0, size/4), got " + std::to_string(max_displacement));
    if (kind == DeformationKind::gaussian_bumps && bump_count < 1)
        throw ValidationError("phantom", "bump_count must be >= 1");
    if (kind == DeformationKind::uniform_shift) {
        const double n = std::hypot(shift[0], shift[1], shift[2]);
        if (!std::isfinite(n) || !(n < limit))
            throw ValidationError("phantom", "shift norm must be < size/4");
    }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// A closed surface |x - centre| = radius * (1 + sum of low-frequency waves),
// with a soft inside indicator.
struct Blob {
    std::array<double, 3> centre{};
    double radius = 0.0;
    struct Wave {
        std::array<double, 3> k{};
        double phase = 0.0;
        double amp = 0.0;
    };
    std::array<Wave, 3> waves{};

    double signed_depth(double x, double y, double z) const {
        const double dx = x - centre[0], dy = y - centre[1], dz = z - centre[2];
        const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
        double mod = 1.0;
        for (const auto& w : waves) mod += w.amp * std::cos(w.k[0] * x + w.k[1] * y + w.k[2] * z + w.phase);
        return radius * mod - r;
    }
};

Blob random_blob(std::mt19937_64& rng, std::array<double, 3> centre, double radius, double size, double wobble) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Blob b;
    b.centre = centre;
    b.radius = radius;
    for (auto& w : b.waves) {
        for (double& k : w.k) k = kTwoPi * u(rng) * 1.5 / size;
        w.phase = std::numbers::pi * u(rng);
        w.amp = wobble * (0.5 + 0.5 * std::abs(u(rng)));
    }
    return b;
}

double soft_step(double depth) { return 1.0 / (1.0 + std::exp(-depth / 0.6)); }

// Smooth random field in [-1, 1] built from a few plane waves of wavelength
// between size/6 and size/2.
struct Texture {
    std::array<Blob::Wave, 6> waves{};

    double operator()(double x, double y, double z) const {
        double acc = 0.0;
        for (const auto& w : waves) acc += std::cos(w.k[0] * x + w.k[1] * y + w.k[2] * z + w.phase);
        return acc / double(waves.size());
    }
};

Texture random_texture(std::mt19937_64& rng, double size) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    Texture t;
    for (auto& w : t.waves) {
        std::array<double, 3> dir{g(rng), g(rng), g(rng)};
        const double norm = std::hypot(dir[0], dir[1], dir[2]);
        const double k = kTwoPi / (size / (4.0 + 2.0 * u(rng)));
        for (std::size_t a = 0; a < 3; ++a) w.k[a] = k * dir[a] / norm;
        w.phase = std::numbers::pi * u(rng);
    }
    return t;
}

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t n = spec.size;
    const double s = double(n);
    const Dims d{n, n, n};
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);

    const double c = (s - 1.0) / 2.0;
    const std::array<double, 3> c0{c + jitter(rng), c + jitter(rng), c + jitter(rng)};
    const Blob shell = random_blob(rng, c0, 0.40 * s, s, 0.04);
    const std::array<double, 3> c1{c0[0] + 0.05 * s * jitter(rng), c0[1] + 0.05 * s * jitter(rng),
                                   c0[2] + 0.05 * s * jitter(rng)};
    const Blob blob = random_blob(rng, c1, 0.27 * s, s, 0.06);
    const std::array<double, 3> c2{c1[0] + 0.04 * s * jitter(rng), c1[1] + 0.04 * s * jitter(rng),
                                   c1[2] + 0.04 * s * jitter(rng)};
    const Blob core = random_blob(rng, c2, 0.12 * s, s, 0.08);
    const Texture texture = random_texture(rng, s);

    constexpr double kShell = 0.4, kBlob = 0.3, kCore = 0.3, kTexture = 0.06;
    std::vector<double> img(d.count());
    std::vector<std::int32_t> lab(d.count());
    for (std::size_t z = 0; z < n; ++z)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                const double px = double(x), py = double(y), pz = double(z);
                const double d1 = shell.signed_depth(px, py, pz);
                const double d2 = blob.signed_depth(px, py, pz);
                const double d3 = core.signed_depth(px, py, pz);
                const double s1 = soft_step(d1), s2 = s1 * soft_step(d2), s3 = s2 * soft_step(d3);
                const std::size_t i = d.index(x, y, z);
                img[i] = kShell * s1 + kBlob * s2 + kCore * s3 + kTexture * (1.0 + texture(px, py, pz));
                lab[i] = d1 > 0.0 ? (d2 > 0.0 ? (d3 > 0.0 ? 3 : 2) : 1) : 0;
            }

    const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
    std::normal_distribution<double> noise(0.0, 0.02 * (*hi - *lo));
    for (double& v : img) v += noise(rng);
    return {Volume(d, std::move(img)), LabelMap(d, std::move(lab))};
}

DeformationField make_deformation(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t n = spec.size;
    const Dims d{n, n, n};
    DeformationField u(d);
    if (spec.kind == DeformationKind::uniform_shift) {
        for (std::size_t c = 0; c < 3; ++c)
            std::fill(u.channel(c).begin(), u.channel(c).end(), spec.shift[c]);
        return u;
    }
    if (spec.max_displacement == 0.0) return u;

    // Separate stream from make_phantom's so the two can be varied independently.
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const double s = double(n);
    std::uniform_real_distribution<double> centre(0.25 * (s - 1.0), 0.75 * (s - 1.0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma = s / 6.0;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

    for (int b = 0; b < spec.bump_count; ++b) {
        const std::array<double, 3> cb{centre(rng), centre(rng), centre(rng)};
        std::array<double, 3> dir{gauss(rng), gauss(rng), gauss(rng)};
        const double norm = std::hypot(dir[0], dir[1], dir[2]);
        for (double& x : dir) x /= norm;
        for (std::size_t z = 0; z < n; ++z)
            for (std::size_t y = 0; y < n; ++y)
                for (std::size_t x = 0; x < n; ++x) {
                    const double dx = double(x) - cb[0], dy = double(y) - cb[1], dz = double(z) - cb[2];
                    const double g = std::exp(-(dx * dx + dy * dy + dz * dz) * inv2s2);
                    const std::size_t i = d.index(x, y, z);
                    for (std::size_t c = 0; c < 3; ++c) u(c, i) += g * dir[c];
                }
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < d.count(); ++i) peak = std::max(peak, std::hypot(u(0, i), u(1, i), u(2, i)));
    if (!(peak > 0.0)) throw NumericalError("phantom", "degenerate bump field");
    const double k = spec.max_displacement / peak;
    for (double& x : u.components()) x *= k;
    return u;
}

DeformationField invert_field(const DeformationField& u, int iterations) {
    DeformationField v(u.dims());
    for (int it = 0; it < iterations; ++it) {
        // compose(u, v) = v + u(x + v(x)); the fixed point of v <- v - compose(u, v) is v = -u(x + v).
        const DeformationField c = compose(u, v);
        auto vc = v.components();
        const auto cc = c.components();
        for (std::size_t i = 0; i < vc.size(); ++i) vc[i] -= cc[i];
    }
    return v;
}

PhantomPair make_pair(const PhantomSpec& spec) {
    Phantom p = make_phantom(spec);
    DeformationField gt = make_deformation(spec);
    PhantomPair out;
    const DeformationField inv = invert_field(gt);
    out.moving = warp_trilinear(p.image, inv);
    out.labels_moving = warp_labels(p.labels, inv);
    out.fixed = std::move(p.image);
    out.labels_fixed = std::move(p.labels);
    out.gt = std::move(gt);
    return out;
}

Volume remap_intensity(const Volume& v, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("phantom", "remap gamma must be positive");
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw ValidationError("phantom", "remap of a constant volume");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::pow((v[i] - *lo) / range, gamma);
    return Volume(v.dims(), std::move(out), v.spacing());
}

EndpointError dvf_endpoint_error(const DeformationField& est, const DeformationField& gt, std::size_t margin) {
    require_same_dims(est.dims(), gt.dims(), "phantom", "dvf_endpoint_error");
    const Dims& d = est.dims();
    if (d.x <= 2 * margin || d.y <= 2 * margin || d.z <= 2 * margin)
        throw ValidationError("phantom", "field " + d.str() + " has no voxels inside the margin");
    EndpointError e;
    std::size_t count = 0;
    for (std::size_t z = margin; z < d.z - margin; ++z)
        for (std::size_t y = margin; y < d.y - margin; ++y)
            for (std::size_t x = margin; x < d.x - margin; ++x) {
                const std::size_t i = d.index(x, y, z);
                const double n = std::hypot(est(0, i) - gt(0, i), est(1, i) - gt(1, i), est(2, i) - gt(2, i));
                e.mean += n;
                e.max = std::max(e.max, n);
                ++count;
            }
    e.mean /= double(count);
    return e;
}

}  // namespace driftreg
