#include "driftreg/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "driftreg/error.hpp"
#include "driftreg/parallel.hpp"

namespace driftreg {

std::string to_string(Similarity s) {
    switch (s) {
        case Similarity::ncc: return "ncc";
        case Similarity::nmi: return "nmi";
        case Similarity::mse: return "mse";
    }
    return "?";
}

Similarity similarity_from_string(const std::string& name) {
    if (name == "ncc") return Similarity::ncc;
    if (name == "nmi") return Similarity::nmi;
    if (name == "mse") return Similarity::mse;
    throw ValidationError("losses", "unknown similarity '" + name + "' (expected ncc, nmi, or mse)");
}

LossWeights LossWeights::direct_defaults(Similarity s) {
    LossWeights w;
    w.alpha = s == Similarity::mse ? 1.0 : -1.0;
    // NMI on a dense field overfits noise through interpolation at 0.5.
    w.beta = s == Similarity::nmi ? 5.0 : 0.5;
    return w;
}

double LossValue::weighted_sum() const {
    double acc = 0.0;
    for (const auto& [_, t] : terms) acc += t.weight * t.value;
    return acc;
}

// ---------------------------------------------------------------------------
// NCC

ScoreGrad ncc(const Volume& a, const Volume& b) {
    require_same_dims(a.dims(), b.dims(), "losses", "ncc");
    const std::size_t n = a.size();
    const auto da = a.data(), db = b.data();
    const auto means = parallel::sums<2>(n, [&](std::size_t i, std::array<double, 2>& acc) {
        acc[0] += da[i];
        acc[1] += db[i];
    });
    const double ma = means[0] / double(n), mb = means[1] / double(n);
    const auto s = parallel::sums<3>(n, [&](std::size_t i, std::array<double, 3>& acc) {
        const double x = da[i] - ma, y = db[i] - mb;
        acc[0] += x * y;
        acc[1] += x * x;
        acc[2] += y * y;
    });
    const double sab = s[0], saa = s[1], sbb = s[2];
    if (!(saa > 0.0) || !(sbb > 0.0)) throw NumericalError("losses", "ncc of a zero-variance volume");

    const double denom = std::sqrt(saa * sbb);
    const double score = sab / denom;
    // d/db_i = (a'_i - (sab / sbb) b'_i) / sqrt(saa sbb); the centring terms
    // vanish because the deviations sum to zero.
    const double k = sab / sbb;
    std::vector<double> g(n);
    parallel::for_range(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) g[i] = ((da[i] - ma) - k * (db[i] - mb)) / denom;
    });
    return {score, Volume(a.dims(), std::move(g), b.spacing())};
}

namespace {

// Sum over the cubic window of half-width r centred on each voxel; windows are
// truncated at the border, which makes the operator self-adjoint.
std::vector<double> box_sum(std::span<const double> in, const Dims& d, std::size_t r) {
    std::vector<double> cur(in.begin(), in.end()), next(in.size());
    std::vector<double> line, prefix;
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const std::size_t len = d[axis];
        const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? d.x : d.x * d.y);
        line.resize(len);
        prefix.resize(len + 1);
        const std::size_t lines = d.count() / len;
        for (std::size_t l = 0; l < lines; ++l) {
            // Base offset of the l-th line along this axis.
            std::size_t base;
            if (axis == 0) {
                base = l * d.x;
            } else if (axis == 1) {
                base = (l % d.x) + (l / d.x) * d.x * d.y;
            } else {
                base = l;
            }
            prefix[0] = 0.0;
            for (std::size_t t = 0; t < len; ++t) prefix[t + 1] = prefix[t] + cur[base + t * stride];
            for (std::size_t t = 0; t < len; ++t) {
                const std::size_t lo = t >= r ? t - r : 0;
                const std::size_t hi = std::min(len - 1, t + r);
                next[base + t * stride] = prefix[hi + 1] - prefix[lo];
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

}  // namespace

ScoreGrad windowed_ncc(const Volume& a, const Volume& b, int window) {
    require_same_dims(a.dims(), b.dims(), "losses", "windowed_ncc");
    if (window < 3 || window % 2 == 0)
        throw ValidationError("losses", "ncc window must be an odd size >= 3");
    constexpr double eps = 1e-5;
    const Dims& d = a.dims();
    const std::size_t n = d.count();
    const std::size_t r = std::size_t(window / 2);
    const auto I = a.data(), J = b.data();

    std::vector<double> ones(n, 1.0), ii(n), jj(n), ij(n);
    for (std::size_t v = 0; v < n; ++v) {
        ii[v] = I[v] * I[v];
        jj[v] = J[v] * J[v];
        ij[v] = I[v] * J[v];
    }
    const auto cnt = box_sum(ones, d, r);
    const auto si = box_sum(I, d, r), sj = box_sum(J, d, r);
    const auto sii = box_sum(ii, d, r), sjj = box_sum(jj, d, r), sij = box_sum(ij, d, r);

    std::vector<double> A(n), AI(n), B(n), BJ(n), cc(n);
    for (std::size_t v = 0; v < n; ++v) {
        const double inv = 1.0 / cnt[v];
        const double ibar = si[v] * inv, jbar = sj[v] * inv;
        const double cross = sij[v] - si[v] * sj[v] * inv;
        const double ivar = sii[v] - si[v] * si[v] * inv;
        const double jvar = sjj[v] - sj[v] * sj[v] * inv;
        const double den = ivar * jvar + eps;
        cc[v] = cross * cross / den;
        A[v] = 2.0 * cross / den;
        B[v] = -cross * cross * ivar / (den * den);
        AI[v] = A[v] * ibar;
        BJ[v] = B[v] * jbar;
    }
    double score = 0.0;
    for (double c : cc) score += c;
    score /= double(n);

    const auto bA = box_sum(A, d, r), bAI = box_sum(AI, d, r);
    const auto bB = box_sum(B, d, r), bBJ = box_sum(BJ, d, r);
    std::vector<double> g(n);
    for (std::size_t v = 0; v < n; ++v)
        g[v] = (I[v] * bA[v] - bAI[v] + 2.0 * (J[v] * bB[v] - bBJ[v])) / double(n);
    return {score, Volume(d, std::move(g), b.spacing())};
}

// ---------------------------------------------------------------------------
// MSE

ScoreGrad mse_sim(const Volume& a, const Volume& b) {
    require_same_dims(a.dims(), b.dims(), "losses", "mse_sim");
    const std::size_t n = a.size();
    const auto da = a.data(), db = b.data();
    const double sum = parallel::sum(n, [&](std::size_t i) {
        const double e = db[i] - da[i];
        return e * e;
    });
    std::vector<double> g(n);
    const double k = 2.0 / double(n);
    parallel::for_range(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) g[i] = k * (db[i] - da[i]);
    });
    return {sum / double(n), Volume(a.dims(), std::move(g), b.spacing())};
}

// ---------------------------------------------------------------------------
// NMI

namespace {

double bspline3(double x) {
    x = std::abs(x);
    if (x < 1.0) return 2.0 / 3.0 - x * x + 0.5 * x * x * x;
    if (x < 2.0) {
        const double t = 2.0 - x;
        return t * t * t / 6.0;
    }
    return 0.0;
}

double bspline3_deriv(double x) {
    const double ax = std::abs(x);
    if (ax < 1.0) return -2.0 * x + 1.5 * x * ax;
    if (ax < 2.0) {
        const double t = 2.0 - ax;
        return x > 0.0 ? -0.5 * t * t : 0.5 * t * t;
    }
    return 0.0;
}

// Two bins of padding on each side hold the spline tails of values at the
// ends of the range.
constexpr int kPad = 2;

struct BinMap {
    double lo = 0.0;
    double range = 0.0;
    double scale = 0.0;  // (bins - 1) / range
    std::size_t argmin = 0;
    std::size_t argmax = 0;
};

BinMap bin_map(std::span<const double> v, int bins, const char* which) {
    BinMap m;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    m.lo = *lo;
    m.range = *hi - *lo;
    if (!(m.range > 0.0))
        throw NumericalError("losses", std::string("nmi: ") + which + " has zero intensity range");
    m.scale = double(bins - 1) / m.range;
    m.argmin = std::size_t(lo - v.begin());
    m.argmax = std::size_t(hi - v.begin());
    return m;
}

// First of the four bins (in padded coordinates) touched by position t, and
// the spline weights for those bins.
struct Spread {
    int first = 0;
    std::array<double, 4> w{};
};

Spread spread(double t) {
    Spread s;
    const int base = static_cast<int>(std::floor(t));
    s.first = base - 1 + kPad;
    for (int q = 0; q < 4; ++q) s.w[q] = bspline3(double(base - 1 + q) - t);
    return s;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

}  // namespace

ScoreGrad nmi(const Volume& a, const Volume& b, int bins) {
    require_same_dims(a.dims(), b.dims(), "losses", "nmi");
    if (bins < 2) throw ValidationError("losses", "nmi needs at least 2 bins");
    const std::size_t n = a.size();
    const auto da = a.data(), db = b.data();
    const BinMap ma = bin_map(da, bins, "fixed image");
    const BinMap mb = bin_map(db, bins, "moving image");

    const std::size_t P = std::size_t(bins + 2 * kPad);
    std::vector<double> ta(n), tb(n);
    for (std::size_t i = 0; i < n; ++i) {
        ta[i] = (da[i] - ma.lo) * ma.scale;
        tb[i] = (db[i] - mb.lo) * mb.scale;
    }

    // Joint histogram accumulated per chunk, merged in chunk order.
    std::vector<std::vector<double>> partial(parallel::chunk_count(n));
    parallel::for_chunks(n, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        std::vector<double> h(P * P, 0.0);
        for (std::size_t i = lo; i < hi; ++i) {
            const Spread sa = spread(ta[i]), sb = spread(tb[i]);
            for (int p = 0; p < 4; ++p)
                for (int q = 0; q < 4; ++q)
                    h[std::size_t(sa.first + p) * P + std::size_t(sb.first + q)] += sa.w[p] * sb.w[q];
        }
        partial[c] = std::move(h);
    });
    std::vector<double> joint(P * P, 0.0);
    for (const auto& h : partial)
        for (std::size_t k = 0; k < joint.size(); ++k) joint[k] += h[k];
    const double inv_n = 1.0 / double(n);
    for (double& x : joint) x *= inv_n;

    std::vector<double> pa(P, 0.0), pb(P, 0.0);
    for (std::size_t k = 0; k < P; ++k)
        for (std::size_t l = 0; l < P; ++l) {
            pa[k] += joint[k * P + l];
            pb[l] += joint[k * P + l];
        }
    const double ha = entropy(pa), hb = entropy(pb), hab = entropy(joint);
    if (!(hab > 0.0)) throw NumericalError("losses", "nmi: degenerate joint histogram");
    const double score = (ha + hb) / hab;

    // d score / d p(k,l), dropping the constant parts of d(-p log p)/dp that
    // cancel because each voxel's spline weights sum to one.
    std::vector<double> G(P * P, 0.0);
    const double inv_hab2 = 1.0 / (hab * hab);
    for (std::size_t k = 0; k < P; ++k)
        for (std::size_t l = 0; l < P; ++l) {
            const double p = joint[k * P + l];
            if (p > 0.0) G[k * P + l] = (-std::log(pb[l]) * hab + (ha + hb) * std::log(p)) * inv_hab2;
        }

    // d score / d t_i.
    std::vector<double> gt(n);
    parallel::for_range(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const Spread sa = spread(ta[i]);
            const int base = static_cast<int>(std::floor(tb[i]));
            const int first = base - 1 + kPad;
            double acc = 0.0;
            for (int q = 0; q < 4; ++q) {
                const double dw = -bspline3_deriv(double(base - 1 + q) - tb[i]);
                if (dw == 0.0) continue;
                double row = 0.0;
                for (int p = 0; p < 4; ++p) row += sa.w[p] * G[std::size_t(sa.first + p) * P + std::size_t(first + q)];
                acc += dw * row;
            }
            gt[i] = acc * inv_n;
        }
    });

    // Chain through t_i = (b_i - min b) * (bins-1) / (max b - min b).
    double sum_g = 0.0, sum_gt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_g += gt[i];
        sum_gt += gt[i] * tb[i];
    }
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = gt[i] * mb.scale;
    g[mb.argmax] += -sum_gt / mb.range;
    g[mb.argmin] += -mb.scale * sum_g + sum_gt / mb.range;
    return {score, Volume(a.dims(), std::move(g), b.spacing())};
}

ScoreGrad similarity(const Volume& a, const Volume& b, const SimilarityOptions& opts) {
    switch (opts.kind) {
        case Similarity::ncc:
            return opts.ncc_window > 0 ? windowed_ncc(a, b, opts.ncc_window) : ncc(a, b);
        case Similarity::nmi: return nmi(a, b, opts.nmi_bins);
        case Similarity::mse: return mse_sim(a, b);
    }
    throw ValidationError("losses", "unknown similarity");
}

// ---------------------------------------------------------------------------
// Smoothness

Smoothness smoothness(const DeformationField& u) {
    const Dims& d = u.dims();
    if (d.x < 2 || d.y < 2 || d.z < 2)
        throw ValidationError("losses", "smoothness needs at least 2 voxels per axis, got " + d.str());
    const std::size_t n = d.count();
    const std::array<std::size_t, 3> stride{1, d.x, d.x * d.y};
    const double norm = 1.0 / (9.0 * double(n));

    auto coord = [&](std::size_t v, std::size_t axis) {
        return axis == 0 ? v % d.x : (axis == 1 ? (v / d.x) % d.y : v / (d.x * d.y));
    };

    double value = 0.0;
    Smoothness out{0.0, WarpGradient(d)};
    for (std::size_t c = 0; c < 3; ++c) {
        const auto uc = u.channel(c);
        value += parallel::sum(n, [&](std::size_t v) {
            double acc = 0.0;
            for (std::size_t axis = 0; axis < 3; ++axis) {
                if (coord(v, axis) + 1 < d[axis]) {
                    const double diff = uc[v + stride[axis]] - uc[v];
                    acc += diff * diff;
                }
            }
            return acc;
        });
        auto gc = out.grad.channel(c);
        parallel::for_range(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t v = lo; v < hi; ++v) {
                double acc = 0.0;
                for (std::size_t axis = 0; axis < 3; ++axis) {
                    const std::size_t p = coord(v, axis);
                    if (p > 0) acc += uc[v] - uc[v - stride[axis]];
                    if (p + 1 < d[axis]) acc -= uc[v + stride[axis]] - uc[v];
                }
                gc[v] = 2.0 * norm * acc;
            }
        });
    }
    out.value = value * norm;
    return out;
}

// ---------------------------------------------------------------------------
// Objectives

DirectLoss direct_loss(const Volume& f, const Volume& m, const DeformationField& u,
                       const SimilarityOptions& sim, double alpha, double beta) {
    require_same_dims(f.dims(), m.dims(), "losses", "direct_loss (fixed vs moving)");
    require_same_dims(f.dims(), u.dims(), "losses", "direct_loss (image vs field)");
    if (!std::isfinite(alpha) || !std::isfinite(beta))
        throw ValidationError("losses", "direct_loss weights must be finite");

    const WarpSample ws = warp_with_derivatives(m, u);
    const ScoreGrad s = similarity(f, ws.warped, sim);
    const Smoothness sm = smoothness(u);

    DirectLoss out{{}, WarpGradient(u.dims())};
    out.loss.terms["sim_mf"] = {s.value, alpha};
    out.loss.terms["smooth_mf"] = {sm.value, beta};
    out.loss.total = alpha * s.value + beta * sm.value;

    const auto sg = s.grad.data();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto jc = ws.jacobian.channel(c);
        const auto smc = sm.grad.channel(c);
        auto gc = out.grad.channel(c);
        for (std::size_t v = 0; v < gc.size(); ++v) gc[v] = alpha * sg[v] * jc[v] + beta * smc[v];
    }
    return out;
}

namespace {

struct DirectionTerms {
    double sim = 0.0, smooth = 0.0, sim_d = 0.0, smooth_d = 0.0;
    WarpGradient grad;
};

// Similarity of `fixed` against `moving` warped by u, plus smoothness of u,
// at full and (optionally) half resolution. grad is the weighted gradient of
// all four terms with respect to u.
DirectionTerms direction_terms(const Volume& fixed, const Volume& moving, const Volume* fixed_d,
                               const Volume* moving_d, const DeformationField& u, const LossWeights& w,
                               const SimilarityOptions& sim) {
    const DirectLoss full = direct_loss(fixed, moving, u, sim, w.alpha, w.beta);
    DirectionTerms t;
    t.sim = full.loss.terms.at("sim_mf").value;
    t.smooth = full.loss.terms.at("smooth_mf").value;
    t.grad = full.grad;
    if (fixed_d != nullptr) {
        const DeformationField u_d = downsample_dvf(u);
        const DirectLoss half = direct_loss(*fixed_d, *moving_d, u_d, sim, w.alpha_d, w.beta_d);
        t.sim_d = half.loss.terms.at("sim_mf").value;
        t.smooth_d = half.loss.terms.at("smooth_mf").value;
        const DeformationField back = downsample_dvf_adjoint(half.grad, u.dims());
        auto g = t.grad.components();
        const auto b = back.components();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += b[i];
    }
    return t;
}

}  // namespace

MicdirObjective::MicdirObjective(Volume fixed, Volume moving, LossWeights weights, ObjectiveFlags flags,
                                 SimilarityOptions sim)
    : f_(std::move(fixed)), m_(std::move(moving)), w_(weights), flags_(flags), sim_(sim) {
    require_same_dims(f_.dims(), m_.dims(), "losses", "micdir objective (fixed vs moving)");
    for (double x : {w_.alpha, w_.alpha_d, w_.beta, w_.beta_d, w_.lambda})
        if (!std::isfinite(x)) throw ValidationError("losses", "loss weights must be finite");
    if (flags_.mss) {
        f_d_ = downsample2x(f_);
        m_d_ = downsample2x(m_);
    }
}

MicdirLoss MicdirObjective::evaluate(const DeformationField& u_fm, const DeformationField& u_mf,
                                     std::optional<std::pair<double, double>> scg_terms) const {
    require_same_dims(f_.dims(), u_mf.dims(), "losses", "micdir_loss (u_mf)");
    if (flags_.ic) require_same_dims(f_.dims(), u_fm.dims(), "losses", "micdir_loss (u_fm)");
    if (flags_.scg && !scg_terms)
        throw ValidationError("losses", "micdir_loss: scg flag set but no scg terms supplied");

    if (!flags_.mss && !flags_.ic && !flags_.scg) {
        DirectLoss d = direct_loss(f_, m_, u_mf, sim_, w_.alpha, w_.beta);
        return {std::move(d.loss), std::move(d.grad), WarpGradient(f_.dims())};
    }

    const Volume* fd = flags_.mss ? &f_d_ : nullptr;
    const Volume* md = flags_.mss ? &m_d_ : nullptr;
    DirectionTerms mf = direction_terms(f_, m_, fd, md, u_mf, w_, sim_);
    DirectionTerms fm;
    if (flags_.ic) fm = direction_terms(m_, f_, md, fd, u_fm, w_, sim_);

    MicdirLoss out;
    auto& terms = out.loss.terms;
    terms["sim_mf"] = {mf.sim, w_.alpha};
    terms["smooth_mf"] = {mf.smooth, w_.beta};
    if (flags_.mss) {
        terms["sim_d_mf"] = {mf.sim_d, w_.alpha_d};
        terms["smooth_d_mf"] = {mf.smooth_d, w_.beta_d};
    }
    if (flags_.ic) {
        terms["sim_fm"] = {fm.sim, w_.alpha};
        terms["smooth_fm"] = {fm.smooth, w_.beta};
        if (flags_.mss) {
            terms["sim_d_fm"] = {fm.sim_d, w_.alpha_d};
            terms["smooth_d_fm"] = {fm.smooth_d, w_.beta_d};
        }
    }
    double scg_fm = 0.0, scg_mf = 0.0;
    if (flags_.scg) {
        scg_fm = scg_terms->first;
        scg_mf = scg_terms->second;
        terms["scg_mf"] = {scg_mf, w_.lambda};
        if (flags_.ic) terms["scg_fm"] = {scg_fm, w_.lambda};
    }

    // Grouped per coefficient; a + b == b + a exactly, so swapping the two
    // directions leaves the total bitwise unchanged.
    double total = w_.alpha * (mf.sim + fm.sim) + w_.beta * (mf.smooth + fm.smooth);
    if (flags_.mss) total += w_.alpha_d * (mf.sim_d + fm.sim_d) + w_.beta_d * (mf.smooth_d + fm.smooth_d);
    if (flags_.scg) total += w_.lambda * (flags_.ic ? scg_fm + scg_mf : scg_mf);
    out.loss.total = total;

    out.grad_mf = std::move(mf.grad);
    out.grad_fm = flags_.ic ? std::move(fm.grad) : WarpGradient(f_.dims());
    return out;
}

MicdirLoss micdir_loss(const Volume& f, const Volume& m, const DeformationField& u_fm,
                       const DeformationField& u_mf, const LossWeights& w, const ObjectiveFlags& flags,
                       const SimilarityOptions& sim, std::optional<std::pair<double, double>> scg_terms) {
    return MicdirObjective(f, m, w, flags, sim).evaluate(u_fm, u_mf, scg_terms);
}

}  // namespace driftreg
