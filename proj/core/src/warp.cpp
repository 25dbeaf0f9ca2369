#include "driftreg/warp.hpp"

#include <algorithm>
#include <cmath>

#include "driftreg/error.hpp"
#include "driftreg/parallel.hpp"

namespace driftreg {
namespace {

// Linear interpolation stencil along one axis.
struct AxisStencil {
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    double frac = 0.0;
    double active = 1.0;  // 0 when the coordinate was clamped
};

AxisStencil stencil(double p, std::size_t n) {
    AxisStencil s;
    if (n == 1) {
        s.active = 0.0;
        return s;
    }
    const double hi = double(n - 1);
    if (p < 0.0) {
        p = 0.0;
        s.active = 0.0;
    } else if (p > hi) {
        p = hi;
        s.active = 0.0;
    }
    const double fl = std::floor(p);
    s.i0 = std::min(static_cast<std::size_t>(fl), n - 2);
    s.i1 = s.i0 + 1;
    s.frac = p - double(s.i0);
    return s;
}

struct Corners {
    double c000, c100, c010, c110, c001, c101, c011, c111;
};

Corners gather(std::span<const double> f, const Dims& d, const AxisStencil& sx, const AxisStencil& sy,
               const AxisStencil& sz) {
    return {f[d.index(sx.i0, sy.i0, sz.i0)], f[d.index(sx.i1, sy.i0, sz.i0)],
            f[d.index(sx.i0, sy.i1, sz.i0)], f[d.index(sx.i1, sy.i1, sz.i0)],
            f[d.index(sx.i0, sy.i0, sz.i1)], f[d.index(sx.i1, sy.i0, sz.i1)],
            f[d.index(sx.i0, sy.i1, sz.i1)], f[d.index(sx.i1, sy.i1, sz.i1)]};
}

// (1-f)*a + f*b is exact at f = 0 and f = 1, so integer positions reproduce
// grid values bitwise.
double lerp(double a, double b, double f) { return (1.0 - f) * a + f * b; }

double blend(const Corners& c, double fx, double fy, double fz) {
    const double c00 = lerp(c.c000, c.c100, fx);
    const double c10 = lerp(c.c010, c.c110, fx);
    const double c01 = lerp(c.c001, c.c101, fx);
    const double c11 = lerp(c.c011, c.c111, fx);
    return lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
}

// Samples a scalar array at continuous index position (px, py, pz).
double sample(std::span<const double> f, const Dims& d, double px, double py, double pz) {
    const AxisStencil sx = stencil(px, d.x), sy = stencil(py, d.y), sz = stencil(pz, d.z);
    return blend(gather(f, d, sx, sy, sz), sx.frac, sy.frac, sz.frac);
}

template <class Fn>
void for_each_voxel(const Dims& d, Fn&& fn) {
    parallel::for_range(d.count(), [&](std::size_t b, std::size_t e) {
        std::size_t i = b % d.x;
        std::size_t j = (b / d.x) % d.y;
        std::size_t k = b / (d.x * d.y);
        for (std::size_t v = b; v < e; ++v) {
            fn(v, i, j, k);
            if (++i == d.x) {
                i = 0;
                if (++j == d.y) {
                    j = 0;
                    ++k;
                }
            }
        }
    });
}

}  // namespace

Volume warp_trilinear(const Volume& m, const DeformationField& u) {
    require_same_dims(m.dims(), u.dims(), "warp", "warp_trilinear");
    const Dims& d = m.dims();
    const auto src = m.data();
    const auto ux = u.channel(0), uy = u.channel(1), uz = u.channel(2);
    std::vector<double> out(d.count());
    for_each_voxel(d, [&](std::size_t v, std::size_t i, std::size_t j, std::size_t k) {
        out[v] = sample(src, d, double(i) + ux[v], double(j) + uy[v], double(k) + uz[v]);
    });
    return Volume(d, std::move(out), m.spacing());
}

WarpSample warp_with_derivatives(const Volume& m, const DeformationField& u) {
    require_same_dims(m.dims(), u.dims(), "warp", "warp_with_derivatives");
    const Dims& d = m.dims();
    const auto src = m.data();
    const auto ux = u.channel(0), uy = u.channel(1), uz = u.channel(2);
    std::vector<double> out(d.count());
    DeformationField jac(d);
    auto jx = jac.channel(0), jy = jac.channel(1), jz = jac.channel(2);

    for_each_voxel(d, [&](std::size_t v, std::size_t i, std::size_t j, std::size_t k) {
        const AxisStencil sx = stencil(double(i) + ux[v], d.x);
        const AxisStencil sy = stencil(double(j) + uy[v], d.y);
        const AxisStencil sz = stencil(double(k) + uz[v], d.z);
        const Corners c = gather(src, d, sx, sy, sz);
        const double fx = sx.frac, fy = sy.frac, fz = sz.frac;
        out[v] = blend(c, fx, fy, fz);

        const double gx00 = c.c100 - c.c000, gx10 = c.c110 - c.c010;
        const double gx01 = c.c101 - c.c001, gx11 = c.c111 - c.c011;
        jx[v] = sx.active * ((1 - fz) * ((1 - fy) * gx00 + fy * gx10) + fz * ((1 - fy) * gx01 + fy * gx11));

        const double gy00 = c.c010 - c.c000, gy10 = c.c110 - c.c100;
        const double gy01 = c.c011 - c.c001, gy11 = c.c111 - c.c101;
        jy[v] = sy.active * ((1 - fz) * ((1 - fx) * gy00 + fx * gy10) + fz * ((1 - fx) * gy01 + fx * gy11));

        const double gz00 = c.c001 - c.c000, gz10 = c.c101 - c.c100;
        const double gz01 = c.c011 - c.c010, gz11 = c.c111 - c.c110;
        jz[v] = sz.active * ((1 - fy) * ((1 - fx) * gz00 + fx * gz10) + fy * ((1 - fx) * gz01 + fx * gz11));
    });
    return {Volume(d, std::move(out), m.spacing()), std::move(jac)};
}

WarpGradient warp_gradient(const WarpSample& sample, const Volume& upstream) {
    const Dims& d = sample.warped.dims();
    require_same_dims(d, upstream.dims(), "warp", "warp_gradient");
    WarpGradient g(d);
    const auto up = upstream.data();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto jc = sample.jacobian.channel(c);
        auto gc = g.channel(c);
        parallel::for_range(d.count(), [&](std::size_t b, std::size_t e) {
            for (std::size_t v = b; v < e; ++v) gc[v] = up[v] * jc[v];
        });
    }
    return g;
}

WarpGradient warp_gradient(const Volume& m, const DeformationField& u, const Volume& upstream) {
    require_same_dims(m.dims(), upstream.dims(), "warp", "warp_gradient");
    return warp_gradient(warp_with_derivatives(m, u), upstream);
}

DeformationField compose(const DeformationField& u_ab, const DeformationField& u_ba) {
    require_same_dims(u_ab.dims(), u_ba.dims(), "warp", "compose");
    const Dims& d = u_ab.dims();
    const auto bx = u_ba.channel(0), by = u_ba.channel(1), bz = u_ba.channel(2);
    DeformationField out(d);
    for_each_voxel(d, [&](std::size_t v, std::size_t i, std::size_t j, std::size_t k) {
        const double px = double(i) + bx[v], py = double(j) + by[v], pz = double(k) + bz[v];
        const AxisStencil sx = stencil(px, d.x), sy = stencil(py, d.y), sz = stencil(pz, d.z);
        for (std::size_t c = 0; c < 3; ++c) {
            const double s = blend(gather(u_ab.channel(c), d, sx, sy, sz), sx.frac, sy.frac, sz.frac);
            out(c, v) = u_ba(c, v) + s;
        }
    });
    return out;
}

LabelMap warp_labels(const LabelMap& labels, const DeformationField& u) {
    require_same_dims(labels.dims(), u.dims(), "warp", "warp_labels");
    const Dims& d = labels.dims();
    const auto src = labels.labels();
    const auto ux = u.channel(0), uy = u.channel(1), uz = u.channel(2);
    auto nearest = [](double p, std::size_t n) {
        const double r = std::round(p);
        if (r <= 0.0) return std::size_t{0};
        return std::min(static_cast<std::size_t>(r), n - 1);
    };
    std::vector<std::int32_t> out(d.count());
    for_each_voxel(d, [&](std::size_t v, std::size_t i, std::size_t j, std::size_t k) {
        out[v] = src[d.index(nearest(double(i) + ux[v], d.x), nearest(double(j) + uy[v], d.y),
                             nearest(double(k) + uz[v], d.z))];
    });
    return LabelMap(d, std::move(out));
}

}  // namespace driftreg
