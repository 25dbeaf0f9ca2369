#include "driftreg/scg.hpp"

#include <cmath>
#include <random>

#include "driftreg/error.hpp"

namespace driftreg::scg {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw ValidationError("scg", std::string(what) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                                         std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                         std::to_string(b.cols));
}

// log(softplus(x)) without underflow for very negative x.
double log_softplus(double x) {
    if (x < -30.0) return x;
    const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    return std::log(sp);
}

}  // namespace

FeatureMap stack(const std::vector<const Volume*>& channels) {
    if (channels.empty()) throw ValidationError("scg", "stack needs at least one channel");
    const Dims d = channels.front()->dims();
    FeatureMap fm(d, channels.size());
    for (std::size_t c = 0; c < channels.size(); ++c) {
        require_same_dims(d, channels[c]->dims(), "scg", "stack");
        const auto src = channels[c]->data();
        std::copy(src.begin(), src.end(), fm.data.begin() + std::ptrdiff_t(c * d.count()));
    }
    return fm;
}

Params::Params(std::size_t in, std::size_t out)
    : in_channels(in),
      out_channels(out),
      conv3(out * in * 27, 0.0),
      bias3(out, 0.0),
      conv1(out * in, 0.0),
      bias1(out, 0.0) {}

double& Params::w3(std::size_t o, std::size_t i, int dz, int dy, int dx) {
    return conv3[((o * in_channels + i) * 27) + std::size_t((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1))];
}

double Params::w3(std::size_t o, std::size_t i, int dz, int dy, int dx) const {
    return conv3[((o * in_channels + i) * 27) + std::size_t((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1))];
}

Params Params::random(std::size_t in, std::size_t out, std::uint64_t seed) {
    Params p(in, out);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n3(0.0, std::sqrt(2.0 / double(27 * in)));
    for (double& w : p.conv3) w = n3(rng);
    std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / double(in)));
    for (double& w : p.conv1) w = n1(rng);
    return p;
}

FeatureMap adaptive_pool(const FeatureMap& fm, Dims target) {
    const Dims& s = fm.dims;
    if (target.x == 0 || target.y == 0 || target.z == 0)
        throw ValidationError("scg", "adaptive_pool target must be positive");
    if (target.x > s.x || target.y > s.y || target.z > s.z)
        throw ValidationError("scg", "adaptive_pool target " + target.str() + " larger than source " + s.str());

    auto edges = [](std::size_t b, std::size_t n, std::size_t t) {
        const std::size_t lo = (b * n) / t;
        const std::size_t hi = ((b + 1) * n + t - 1) / t;
        return std::pair{lo, hi};
    };

    FeatureMap out(target, fm.channels);
    for (std::size_t c = 0; c < fm.channels; ++c)
        for (std::size_t bz = 0; bz < target.z; ++bz) {
            const auto [z0, z1] = edges(bz, s.z, target.z);
            for (std::size_t by = 0; by < target.y; ++by) {
                const auto [y0, y1] = edges(by, s.y, target.y);
                for (std::size_t bx = 0; bx < target.x; ++bx) {
                    const auto [x0, x1] = edges(bx, s.x, target.x);
                    double acc = 0.0;
                    for (std::size_t z = z0; z < z1; ++z)
                        for (std::size_t y = y0; y < y1; ++y)
                            for (std::size_t x = x0; x < x1; ++x) acc += fm.at(c, s.index(x, y, z));
                    out.at(c, target.index(bx, by, bz)) = acc / double((z1 - z0) * (y1 - y0) * (x1 - x0));
                }
            }
        }
    return out;
}

Latent latent_params(const FeatureMap& fm, const Params& p) {
    if (fm.channels != p.in_channels)
        throw ValidationError("scg", "feature map has " + std::to_string(fm.channels) + " channels, params expect " +
                                         std::to_string(p.in_channels));
    const Dims& d = fm.dims;
    const std::size_t nodes = d.count();
    Latent out{Matrix(nodes, p.out_channels), Matrix(nodes, p.out_channels)};

    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x) {
                const std::size_t node = d.index(x, y, z);
                for (std::size_t o = 0; o < p.out_channels; ++o) {
                    double m = p.bias3[o];
                    double s = p.bias1[o];
                    for (std::size_t i = 0; i < p.in_channels; ++i) {
                        s += p.conv1[o * p.in_channels + i] * fm.at(i, node);
                        for (int dz = -1; dz <= 1; ++dz)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const long xx = long(x) + dx, yy = long(y) + dy, zz = long(z) + dz;
                                    if (xx < 0 || yy < 0 || zz < 0 || xx >= long(d.x) || yy >= long(d.y) ||
                                        zz >= long(d.z))
                                        continue;
                                    m += p.w3(o, i, dz, dy, dx) *
                                         fm.at(i, d.index(std::size_t(xx), std::size_t(yy), std::size_t(zz)));
                                }
                    }
                    out.mean(node, o) = m;
                    out.log_sigma(node, o) = log_softplus(s);
                }
            }
    return out;
}

Matrix reparameterize(const Matrix& mean, const Matrix& log_sigma, const Matrix& noise) {
    require_same_shape(mean, log_sigma, "reparameterize");
    require_same_shape(mean, noise, "reparameterize");
    Matrix z(mean.rows, mean.cols);
    for (std::size_t i = 0; i < z.data.size(); ++i)
        z.data[i] = mean.data[i] + std::exp(log_sigma.data[i]) * noise.data[i];
    return z;
}

Matrix adjacency(const Matrix& z) {
    Matrix a(z.rows, z.rows);
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t j = i; j < z.rows; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < z.cols; ++k) dot += z(i, k) * z(j, k);
            const double v = dot > 0.0 ? dot : 0.0;
            a(i, j) = v;
            a(j, i) = v;
        }
    return a;
}

double kl_loss(const Matrix& mean, const Matrix& log_sigma, KlVariant variant) {
    require_same_shape(mean, log_sigma, "kl_loss");
    if (mean.rows == 0 || mean.cols == 0) throw ValidationError("scg", "kl_loss of an empty latent");
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.data.size(); ++i) {
        const double m = mean.data[i];
        const double ls = log_sigma.data[i];
        const double s = std::exp(ls);
        if (variant == KlVariant::standard)
            acc += 1.0 + 2.0 * ls - m * m - s * s;
        else
            acc += 1.0 + ls * ls * m * m * s * s;
    }
    return -acc / (2.0 * double(mean.rows * mean.cols));
}

Matrix residual_embedding(const Matrix& mean, const Matrix& log_sigma) {
    require_same_shape(mean, log_sigma, "residual_embedding");
    Matrix r(mean.rows, mean.cols);
    for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = mean.data[i] * (1.0 - log_sigma.data[i]);
    return r;
}

Matrix standard_normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& x : m.data) x = n(rng);
    return m;
}

Evaluation evaluate(const Volume& f, const Volume& m, const Params& p, Dims pool_target, std::uint64_t seed) {
    require_same_dims(f.dims(), m.dims(), "scg", "scg_term");
    const FeatureMap pooled = adaptive_pool(stack({&f, &m}), pool_target);
    Evaluation e;
    e.latent = latent_params(pooled, p);
    e.kl = kl_loss(e.latent.mean, e.latent.log_sigma, KlVariant::standard);
    e.z = reparameterize(e.latent.mean, e.latent.log_sigma,
                         standard_normal(e.latent.mean.rows, e.latent.mean.cols, seed));
    e.adjacency = adjacency(e.z);
    e.residual = residual_embedding(e.latent.mean, e.latent.log_sigma);
    return e;
}

double scg_term(const Volume& f, const Volume& m, const Params& p, Dims pool_target, std::uint64_t seed) {
    return evaluate(f, m, p, pool_target, seed).kl;
}

}  // namespace driftreg::scg
