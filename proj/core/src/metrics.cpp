#include "driftreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <boost/math/special_functions/beta.hpp>

#include "driftreg/error.hpp"

namespace driftreg {

double pcc(const Volume& a, const Volume& b) {
    require_same_dims(a.dims(), b.dims(), "metrics", "pcc");
    const std::size_t n = a.size();
    if (n < 2) throw ValidationError("metrics", "pcc needs at least 2 voxels");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= double(n);
    mb /= double(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i] - ma, y = b[i] - mb;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) throw NumericalError("metrics", "pcc of a constant volume");
    const double k = 1.0 / double(n - 1);
    return (k * sab) / std::sqrt((k * saa) * (k * sbb));
}

DiceScores dice(const LabelMap& x, const LabelMap& y) {
    require_same_dims(x.dims(), y.dims(), "metrics", "dice");
    const std::int32_t kx = x.class_count(), ky = y.class_count();
    if (kx != ky)
        throw ValidationError("metrics", "dice label alphabets differ: 0.." + std::to_string(kx - 1) + " vs 0.." +
                                             std::to_string(ky - 1));
    std::vector<std::size_t> inter(std::size_t(kx), 0), cx(std::size_t(kx), 0), cy(std::size_t(kx), 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        ++cx[std::size_t(x[i])];
        ++cy[std::size_t(y[i])];
        if (x[i] == y[i]) ++inter[std::size_t(x[i])];
    }
    DiceScores out;
    double acc = 0.0;
    for (std::int32_t c = 0; c < kx; ++c) {
        const std::size_t s = cx[std::size_t(c)] + cy[std::size_t(c)];
        const double d = s == 0 ? 1.0 : 2.0 * double(inter[std::size_t(c)]) / double(s);
        out.per_class[c] = d;
        acc += d;
    }
    out.mean = kx > 0 ? acc / double(kx) : 1.0;
    return out;
}

double kld_from_joint(const JointHistogram& po, const JointHistogram& pe) {
    if (po.bins < 2 || po.bins != pe.bins || po.p.size() != pe.p.size() ||
        po.p.size() != std::size_t(po.bins) * std::size_t(po.bins))
        throw ValidationError("metrics", "kld needs two joint histograms with the same bins >= 2");
    constexpr double eps = 1e-10;
    double so = 0.0, se = 0.0;
    for (std::size_t i = 0; i < po.p.size(); ++i) {
        so += po.p[i] + eps;
        se += pe.p[i] + eps;
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < po.p.size(); ++i) {
        const double o = (po.p[i] + eps) / so;
        const double e = (pe.p[i] + eps) / se;
        kl += o * std::log(o / e);
    }
    return kl;
}

namespace {

struct Edges {
    double lo = 0.0;
    double width = 0.0;  // 0 when the range is empty
    int bins = 0;

    int bin(double v) const {
        if (width == 0.0) return 0;
        const int k = static_cast<int>((v - lo) / width);
        return std::clamp(k, 0, bins - 1);
    }
};

Edges edges_over(std::initializer_list<std::span<const double>> values, int bins) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto v : values)
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    return {lo, hi > lo ? (hi - lo) / double(bins) : 0.0, bins};
}

JointHistogram joint(const Volume& a, const Volume& b, const Edges& ea, const Edges& eb) {
    JointHistogram h{ea.bins, std::vector<double>(std::size_t(ea.bins) * std::size_t(ea.bins), 0.0)};
    for (std::size_t i = 0; i < a.size(); ++i)
        h.p[std::size_t(ea.bin(a[i])) * std::size_t(ea.bins) + std::size_t(eb.bin(b[i]))] += 1.0;
    for (double& x : h.p) x /= double(a.size());
    return h;
}

}  // namespace

double kld_joint(const Volume& a, const Volume& b_obs, const Volume& b_exp, int bins) {
    if (bins < 2) throw ValidationError("metrics", "kld_joint needs bins >= 2");
    require_same_dims(a.dims(), b_obs.dims(), "metrics", "kld_joint (a vs b_obs)");
    require_same_dims(a.dims(), b_exp.dims(), "metrics", "kld_joint (a vs b_exp)");
    const Edges ea = edges_over({a.data()}, bins);
    const Edges eb = edges_over({b_obs.data(), b_exp.data()}, bins);
    return kld_from_joint(joint(a, b_obs, ea, eb), joint(a, b_exp, ea, eb));
}

namespace {

// Sums over every window of edge w lying inside the grid ("valid" box sums),
// computed one axis at a time with running sums.
std::vector<double> valid_box_sum(std::vector<double> cur, Dims d, std::size_t w) {
    for (std::size_t axis = 0; axis < 3; ++axis) {
        Dims o = d;
        if (axis == 0) o.x -= w - 1;
        if (axis == 1) o.y -= w - 1;
        if (axis == 2) o.z -= w - 1;
        std::vector<double> next(o.count());
        for (std::size_t z = 0; z < o.z; ++z)
            for (std::size_t y = 0; y < o.y; ++y)
                for (std::size_t x = 0; x < o.x; ++x) {
                    double acc = 0.0;
                    for (std::size_t t = 0; t < w; ++t) {
                        const std::size_t xx = x + (axis == 0 ? t : 0);
                        const std::size_t yy = y + (axis == 1 ? t : 0);
                        const std::size_t zz = z + (axis == 2 ? t : 0);
                        acc += cur[d.index(xx, yy, zz)];
                    }
                    next[o.index(x, y, z)] = acc;
                }
        cur = std::move(next);
        d = o;
    }
    return cur;
}

}  // namespace

double ssim(const Volume& a, const Volume& b) {
    require_same_dims(a.dims(), b.dims(), "metrics", "ssim");
    const Dims& d = a.dims();
    const std::size_t w = kSsimWindow;
    if (d.x < w || d.y < w || d.z < w)
        throw ValidationError("metrics", "ssim needs at least " + std::to_string(w) + " voxels per axis, got " + d.str());
    const auto [a_lo, a_hi] = std::minmax_element(a.data().begin(), a.data().end());
    const auto [b_lo, b_hi] = std::minmax_element(b.data().begin(), b.data().end());
    const double L = std::max(*a_hi, *b_hi) - std::min(*a_lo, *b_lo);
    if (L == 0.0) return 1.0;
    const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);

    // Centre on the global means first so the one-pass window moments do not
    // lose precision to large offsets.
    const std::size_t n = d.count();
    double ga = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ga += a[i];
        gb += b[i];
    }
    ga /= double(n);
    gb /= double(n);
    std::vector<double> xa(n), xb(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        xa[i] = a[i] - ga;
        xb[i] = b[i] - gb;
        aa[i] = xa[i] * xa[i];
        bb[i] = xb[i] * xb[i];
        ab[i] = xa[i] * xb[i];
    }
    const auto sa = valid_box_sum(std::move(xa), d, w), sb = valid_box_sum(std::move(xb), d, w);
    const auto saa = valid_box_sum(std::move(aa), d, w), sbb = valid_box_sum(std::move(bb), d, w);
    const auto sab = valid_box_sum(std::move(ab), d, w);

    const double N = double(w * w * w);
    double acc = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) {
        const double ma = sa[k] / N, mb = sb[k] / N;
        const double va = (saa[k] - N * ma * ma) / (N - 1.0);
        const double vb = (sbb[k] - N * mb * mb) / (N - 1.0);
        const double cov = (sab[k] - N * ma * mb) / (N - 1.0);
        const double mua = ma + ga, mub = mb + gb;
        acc += ((2.0 * mua * mub + c1) * (2.0 * cov + c2)) / ((mua * mua + mub * mub + c1) * (va + vb + c2));
    }
    return acc / double(sa.size());
}

double mse_metric(const Volume& a, const Volume& b) {
    require_same_dims(a.dims(), b.dims(), "metrics", "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = a[i] - b[i];
        acc += e * e;
    }
    return acc / double(a.size());
}

TTest welch_ttest(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() < 2 || ys.size() < 2) throw ValidationError("metrics", "welch_ttest needs at least 2 samples per group");
    auto moments = [](std::span<const double> s) {
        double m = 0.0;
        for (double x : s) m += x;
        m /= double(s.size());
        double v = 0.0;
        for (double x : s) v += (x - m) * (x - m);
        return std::pair{m, v / double(s.size() - 1)};
    };
    const auto [mx, vx] = moments(xs);
    const auto [my, vy] = moments(ys);
    if (vx == 0.0 && vy == 0.0) throw NumericalError("metrics", "welch_ttest: both samples have zero variance");
    const double qx = vx / double(xs.size()), qy = vy / double(ys.size());
    TTest r;
    r.t = (mx - my) / std::sqrt(qx + qy);
    r.df = (qx + qy) * (qx + qy) / (qx * qx / double(xs.size() - 1) + qy * qy / double(ys.size() - 1));
    // Two-tailed p = I_{df / (df + t^2)}(df / 2, 1 / 2).
    r.p = boost::math::ibeta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

namespace {

struct KMeans {
    std::vector<double> centres;
    double inertia = 0.0;
};

std::size_t nearest(const std::vector<double>& c, double x) {
    std::size_t best = 0;
    double bd = std::abs(x - c[0]);
    for (std::size_t j = 1; j < c.size(); ++j) {
        const double dj = std::abs(x - c[j]);
        if (dj < bd) {
            bd = dj;
            best = j;
        }
    }
    return best;
}

KMeans kmeans_1d(std::span<const double> v, int k, std::mt19937_64& rng) {
    // k-means++ seeding.
    std::vector<double> c;
    std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
    c.push_back(v[pick(rng)]);
    std::vector<double> d2(v.size());
    while (c.size() < std::size_t(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - c[nearest(c, v[i])];
            d2[i] = d * d;
            total += d2[i];
        }
        if (!(total > 0.0)) break;
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng), acc = 0.0;
        std::size_t chosen = v.size() - 1;
        for (std::size_t i = 0; i < v.size(); ++i) {
            acc += d2[i];
            if (acc >= r && d2[i] > 0.0) {
                chosen = i;
                break;
            }
        }
        c.push_back(v[chosen]);
    }

    std::vector<double> sum(c.size());
    std::vector<std::size_t> cnt(c.size());
    for (int it = 0; it < 100; ++it) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(cnt.begin(), cnt.end(), 0);
        for (double x : v) {
            const std::size_t j = nearest(c, x);
            sum[j] += x;
            ++cnt[j];
        }
        double shift = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (cnt[j] == 0) continue;
            const double nc = sum[j] / double(cnt[j]);
            shift = std::max(shift, std::abs(nc - c[j]));
            c[j] = nc;
        }
        if (shift < 1e-6) break;
    }
    KMeans out{c, 0.0};
    for (double x : v) {
        const double d = x - c[nearest(c, x)];
        out.inertia += d * d;
    }
    return out;
}

}  // namespace

LabelMap segment_intensity(const Volume& v, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("metrics", "segment_intensity needs k >= 2");
    if (v.empty()) throw ValidationError("metrics", "segment_intensity of an empty volume");
    std::set<double> distinct;
    for (double x : v.data()) {
        distinct.insert(x);
        if (distinct.size() >= std::size_t(k)) break;
    }
    if (distinct.size() < std::size_t(k))
        throw ValidationError("metrics", "segment_intensity: fewer than " + std::to_string(k) + " distinct intensities");

    std::mt19937_64 rng(seed);
    KMeans best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 5; ++restart) {
        KMeans r = kmeans_1d(v.data(), k, rng);
        if (r.centres.size() == std::size_t(k) && r.inertia < best.inertia) best = std::move(r);
    }
    std::sort(best.centres.begin(), best.centres.end());

    LabelMap out(v.dims());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::int32_t(nearest(best.centres, v[i]));
    return out;
}

MetricReport evaluate_metrics(const Volume& fixed, const Volume& registered, const LabelMap* labels_fixed,
                              const LabelMap* labels_registered, const EvalOptions& opts) {
    require_same_dims(fixed.dims(), registered.dims(), "metrics", "evaluate (fixed vs registered)");
    MetricReport r;
    r.counts["voxels"] = fixed.size();
    r.values["pcc"] = pcc(fixed, registered);
    r.values["kld"] = kld_joint(fixed, registered, fixed, opts.kld_bins);

    DiceScores d;
    if (labels_fixed != nullptr && labels_registered != nullptr) {
        d = dice(*labels_fixed, *labels_registered);
    } else {
        const LabelMap sf = segment_intensity(fixed, opts.segment_classes, opts.seed);
        const LabelMap sr = segment_intensity(registered, opts.segment_classes, opts.seed);
        d = dice(sf, sr);
        r.notes.push_back("dice computed on segment_intensity labels (k=" + std::to_string(opts.segment_classes) + ")");
    }
    r.values["dice"] = d.mean;
    r.dice_per_class = d.per_class;
    r.counts["classes"] = d.per_class.size();

    if (!opts.intermodal && opts.include_ssim_mse) {
        r.values["ssim"] = ssim(fixed, registered);
        r.values["mse"] = mse_metric(fixed, registered);
    }
    return r;
}

}  // namespace driftreg
