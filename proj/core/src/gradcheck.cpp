#include "driftreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "driftreg/error.hpp"
#include "driftreg/losses.hpp"
#include "driftreg/warp.hpp"

namespace driftreg {

bool GradcheckReport::passed() const {
    return std::all_of(terms.begin(), terms.end(), [&](const GradcheckTerm& t) {
        return std::isfinite(t.max_rel_error) && t.max_rel_error < tolerance;
    });
}

namespace {

Volume random_volume(Dims d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(d.count());
    for (double& x : v) x = u(rng);
    return Volume(d, std::move(v));
}

DeformationField random_field(Dims d, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> u(-amp, amp);
    DeformationField f(d);
    for (double& x : f.components()) x = u(rng);
    return f;
}

std::size_t axis_coord(const Dims& d, std::size_t v, std::size_t axis) {
    return axis == 0 ? v % d.x : (axis == 1 ? (v / d.x) % d.y : v / (d.x * d.y));
}

// True when moving component (c, v) of u by +-h keeps the sample coordinate
// inside one trilinear cell and off the clamp.
bool smooth_at(const DeformationField& u, std::size_t c, std::size_t v, double h) {
    const Dims& d = u.dims();
    const double p = double(axis_coord(d, v, c)) + u(c, v);
    const double hi = double(d[c] - 1);
    if (p - h <= 0.0 || p + h >= hi) return false;
    return std::floor(p - h) == std::floor(p + h);
}

// Same check at half resolution for the coarse component a fine component
// feeds through downsample_dvf.
bool smooth_at_coarse(const DeformationField& coarse, const Dims& fine, std::size_t c, std::size_t v, double h) {
    const std::size_t x = axis_coord(fine, v, 0) / 2, y = axis_coord(fine, v, 1) / 2, z = axis_coord(fine, v, 2) / 2;
    return smooth_at(coarse, c, coarse.dims().index(x, y, z), h * 0.5 / 8.0);
}

struct Accumulator {
    GradcheckTerm term;

    // analytic and numeric over the components listed in `use`.
    void add(const std::vector<double>& analytic, const std::vector<double>& numeric, const std::vector<bool>& use) {
        double scale = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i)
            if (use[i]) scale = std::max(scale, std::abs(numeric[i]));
        if (!(scale > 0.0)) return;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            if (!use[i] || std::abs(numeric[i]) < 1e-3 * scale) continue;
            const double rel = std::abs(analytic[i] - numeric[i]) / std::abs(numeric[i]);
            term.max_rel_error = std::max(term.max_rel_error, std::isfinite(rel) ? rel : INFINITY);
            ++term.components;
        }
    }
};

// Central differences of f over every entry of x (restored afterwards).
std::vector<double> central(std::span<double> x, double h, const std::function<double()>& f,
                            const std::vector<bool>& use) {
    std::vector<double> g(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!use[i]) continue;
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f();
        x[i] = x0 - h;
        const double fm = f();
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

std::vector<bool> warp_mask(const DeformationField& u, double h) {
    std::vector<bool> use(u.components().size());
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t v = 0; v < u.voxels(); ++v) use[c * u.voxels() + v] = smooth_at(u, c, v, h);
    return use;
}

std::vector<bool> warp_mask_multiscale(const DeformationField& u, double h, bool mss) {
    std::vector<bool> use = warp_mask(u, h);
    if (!mss) return use;
    const DeformationField ud = downsample_dvf(u);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t v = 0; v < u.voxels(); ++v)
            if (!smooth_at_coarse(ud, u.dims(), c, v, h)) use[c * u.voxels() + v] = false;
    return use;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
    if (opts.instances < 1 || opts.sizes.empty()) throw ValidationError("gradcheck", "need instances and sizes");
    for (std::size_t s : opts.sizes)
        if (s < 4) throw ValidationError("gradcheck", "sizes must be >= 4");
    const double h = opts.step;
    const double flip = opts.inject_fault ? -1.0 : 1.0;

    Accumulator warp_adj{{"warp_adjoint"}}, ncc_t{{"ncc"}}, wncc_t{{"ncc_windowed"}}, mse_t{{"mse"}}, nmi_t{{"nmi"}},
        smooth_t{{"smoothness"}}, direct_t{{"direct_loss"}}, micdir_t{{"micdir_loss"}};
    const Similarity kinds[3] = {Similarity::ncc, Similarity::mse, Similarity::nmi};

    for (int inst = 0; inst < opts.instances; ++inst) {
        std::mt19937_64 rng(opts.seed * 1000003ULL + std::uint64_t(inst));
        const std::size_t n = opts.sizes[std::size_t(inst) % opts.sizes.size()];
        const Dims d{n, n, n};
        const Volume a = random_volume(d, rng);
        Volume b = random_volume(d, rng);
        DeformationField u = random_field(d, rng, 1.5);
        DeformationField u2 = random_field(d, rng, 1.5);
        const Volume r = random_volume(d, rng);
        const std::vector<bool> all_img(d.count(), true);
        const std::vector<bool> all_dvf(3 * d.count(), true);

        {
            const auto an = warp_gradient(b, u, r);
            const auto use = warp_mask(u, h);
            const auto nu = central(u.components(), h, [&] {
                const Volume w = warp_trilinear(b, u);
                double s = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) s += r[i] * w[i];
                return s;
            }, use);
            warp_adj.add(to_vec(an.components()), nu, use);
        }
        {
            auto an = to_vec(ncc(a, b).grad.data());
            for (double& x : an) x *= flip;
            ncc_t.add(an, central(b.data(), h, [&] { return ncc(a, b).value; }, all_img), all_img);
        }
        wncc_t.add(to_vec(windowed_ncc(a, b, 3).grad.data()),
                   central(b.data(), h, [&] { return windowed_ncc(a, b, 3).value; }, all_img), all_img);
        mse_t.add(to_vec(mse_sim(a, b).grad.data()), central(b.data(), h, [&] { return mse_sim(a, b).value; }, all_img),
                  all_img);
        nmi_t.add(to_vec(nmi(a, b, 16).grad.data()), central(b.data(), h, [&] { return nmi(a, b, 16).value; }, all_img),
                  all_img);
        smooth_t.add(to_vec(smoothness(u).grad.components()),
                     central(u.components(), h, [&] { return smoothness(u).value; }, all_dvf), all_dvf);

        SimilarityOptions sim;
        sim.kind = kinds[inst % 3];
        sim.nmi_bins = 16;
        const LossWeights w = LossWeights::micdir_defaults();
        {
            const auto an = direct_loss(a, b, u, sim, w.alpha, w.beta).grad;
            const auto use = warp_mask(u, h);
            const auto nu =
                central(u.components(), h, [&] { return direct_loss(a, b, u, sim, w.alpha, w.beta).loss.total; }, use);
            direct_t.add(to_vec(an.components()), nu, use);
        }
        {
            ObjectiveFlags flags{n % 2 == 0, true, false};
            const MicdirObjective obj(a, b, w, flags, sim);
            const MicdirLoss an = obj.evaluate(u2, u);
            const auto use_mf = warp_mask_multiscale(u, h, flags.mss);
            const auto use_fm = warp_mask_multiscale(u2, h, flags.mss);
            const auto total = [&] { return obj.evaluate(u2, u).loss.total; };
            micdir_t.add(to_vec(an.grad_mf.components()), central(u.components(), h, total, use_mf), use_mf);
            micdir_t.add(to_vec(an.grad_fm.components()), central(u2.components(), h, total, use_fm), use_fm);
        }
    }

    GradcheckReport rep;
    rep.tolerance = opts.tolerance;
    for (auto* acc : {&warp_adj, &ncc_t, &wncc_t, &mse_t, &nmi_t, &smooth_t, &direct_t, &micdir_t})
        rep.terms.push_back(acc->term);
    return rep;
}

}  // namespace driftreg
