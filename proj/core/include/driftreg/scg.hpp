#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "driftreg/volume.hpp"

namespace driftreg::scg {

// Row-major real matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// Multi-channel 3D feature map, channel-planar: data[c * dims.count() + voxel].
struct FeatureMap {
    Dims dims{};
    std::size_t channels = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(Dims d, std::size_t c) : dims(d), channels(c), data(d.count() * c, 0.0) {}

    double at(std::size_t c, std::size_t voxel) const { return data[c * dims.count() + voxel]; }
    double& at(std::size_t c, std::size_t voxel) { return data[c * dims.count() + voxel]; }
};

// Stacks volumes (same dims) as the channels of one feature map.
FeatureMap stack(const std::vector<const Volume*>& channels);

// 3x3x3 convolution producing the latent mean and 1x1x1 convolution producing
// the (pre-softplus) spread.
struct Params {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<double> conv3;  // [out][in][kz][ky][kx], 27 taps
    std::vector<double> bias3;  // [out]
    std::vector<double> conv1;  // [out][in]
    std::vector<double> bias1;  // [out]

    Params() = default;
    Params(std::size_t in, std::size_t out);  // all zero

    double& w3(std::size_t o, std::size_t i, int dz, int dy, int dx);
    double w3(std::size_t o, std::size_t i, int dz, int dy, int dx) const;

    // He-style normal draws with std sqrt(2 / fan_in); biases zero.
    static Params random(std::size_t in, std::size_t out, std::uint64_t seed);
};

// Average pooling over near-equal partitions: bin b along an axis covers
// [floor(b * n / t), ceil((b + 1) * n / t)).
FeatureMap adaptive_pool(const FeatureMap& fm, Dims target);

// M = flatten(conv3(fm)); log_sigma = log(softplus(conv1(fm))). Both are
// nodes x out_channels with nodes in x-fastest order.
struct Latent {
    Matrix mean;
    Matrix log_sigma;
};
Latent latent_params(const FeatureMap& fm, const Params& p);

// Z = M + exp(log_sigma) * noise, elementwise.
Matrix reparameterize(const Matrix& mean, const Matrix& log_sigma, const Matrix& noise);

// A = max(0, Z Z^T).
Matrix adjacency(const Matrix& z);

enum class KlVariant {
    standard,  // -1/(2nc) sum(1 + 2 log s - M^2 - s^2)
    literal,   // -1/(2nc) sum(1 + log(s)^2 * M^2 * s^2), as typeset
};
double kl_loss(const Matrix& mean, const Matrix& log_sigma, KlVariant variant = KlVariant::standard);

// Z_hat = M * (1 - log_sigma), elementwise.
Matrix residual_embedding(const Matrix& mean, const Matrix& log_sigma);

// n x c standard normal draws from a seeded generator.
Matrix standard_normal(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct TermConfig {
    Dims pool{4, 4, 4};
    std::size_t channels = 8;
};

// Everything the SCG pipeline computes for one image pair; kl is the scalar
// fed to the objective, the rest are reported byproducts.
struct Evaluation {
    double kl = 0.0;
    Latent latent;
    Matrix z;
    Matrix adjacency;
    Matrix residual;
};

// stack(f, m) -> adaptive_pool -> latent_params -> kl_loss(standard); noise
// for Z is drawn from `seed`.
Evaluation evaluate(const Volume& f, const Volume& m, const Params& p, Dims pool_target,
                    std::uint64_t seed);

double scg_term(const Volume& f, const Volume& m, const Params& p, Dims pool_target, std::uint64_t seed);

}  // namespace driftreg::scg
