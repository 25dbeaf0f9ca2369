#include "driftreg/volume.hpp"

#include <algorithm>
#include <cmath>

#include "driftreg/error.hpp"
#include "driftreg/parallel.hpp"

namespace driftreg {

std::string Dims::str() const {
    return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(z);
}

namespace {

void check_dims(const Dims& d, const char* module) {
    if (d.x == 0 || d.y == 0 || d.z == 0)
        throw ValidationError(module, "dimensions must be positive, got " + d.str());
}

void check_spacing(const Spacing& s) {
    for (double v : s)
        if (!(v > 0.0) || !std::isfinite(v))
            throw ValidationError("volume", "spacing components must be finite and positive");
}

bool even_dims(const Dims& d) { return d.x % 2 == 0 && d.y % 2 == 0 && d.z % 2 == 0; }

}  // namespace

void require_same_dims(const Dims& a, const Dims& b, const char* module, const char* what) {
    if (!(a == b))
        throw ValidationError(module, std::string(what) + ": dimension mismatch " + a.str() +
                                          " vs " + b.str());
}

void require_finite(std::span<const double> values, const char* module, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw ValidationError(module, std::string(what) + ": non-finite value at element " +
                                              std::to_string(i));
}

Volume::Volume(Dims dims, Spacing spacing)
    : dims_(dims), spacing_(spacing), data_(dims.count(), 0.0) {
    check_dims(dims, "volume");
    check_spacing(spacing);
}

Volume::Volume(Dims dims, std::vector<double> data, Spacing spacing)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_dims(dims, "volume");
    check_spacing(spacing);
    if (data_.size() != dims.count())
        throw ValidationError("volume", "data length " + std::to_string(data_.size()) +
                                            " does not match dims " + dims.str());
    require_finite(data_, "volume", "construction");
}

void Volume::set_spacing(Spacing spacing) {
    check_spacing(spacing);
    spacing_ = spacing;
}

LabelMap::LabelMap(Dims dims) : dims_(dims), labels_(dims.count(), 0) { check_dims(dims, "volume"); }

LabelMap::LabelMap(Dims dims, std::vector<std::int32_t> labels)
    : dims_(dims), labels_(std::move(labels)) {
    check_dims(dims, "volume");
    if (labels_.size() != dims.count())
        throw ValidationError("volume", "label map length does not match dims " + dims.str());
    for (auto l : labels_)
        if (l < 0) throw ValidationError("volume", "negative label " + std::to_string(l));
}

std::int32_t LabelMap::class_count() const noexcept {
    if (labels_.empty()) return 0;
    return *std::max_element(labels_.begin(), labels_.end()) + 1;
}

DeformationField::DeformationField(Dims dims) : dims_(dims), u_(3 * dims.count(), 0.0) {
    check_dims(dims, "warp");
}

DeformationField::DeformationField(Dims dims, std::vector<double> components)
    : dims_(dims), u_(std::move(components)) {
    check_dims(dims, "warp");
    if (u_.size() != 3 * dims.count())
        throw ValidationError("warp", "deformation field needs 3 components per voxel for " +
                                          dims.str());
    require_finite(u_, "warp", "deformation field");
}

Volume normalize_zscore(const Volume& v) {
    const std::size_t n = v.size();
    if (n < 2) throw ValidationError("volume", "z-score needs at least two elements");
    const auto data = v.data();
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    if (*lo == *hi) throw ValidationError("volume", "z-score of a zero-variance volume");
    const double mean = parallel::sum(n, [&](std::size_t i) { return data[i]; }) / double(n);
    const double var = parallel::sum(n, [&](std::size_t i) {
                           const double d = data[i] - mean;
                           return d * d;
                       }) /
                       double(n);
    if (!(var > 0.0)) throw ValidationError("volume", "z-score of a zero-variance volume");
    const double inv_sd = 1.0 / std::sqrt(var);

    std::vector<double> out(n);
    parallel::for_range(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = (data[i] - mean) * inv_sd;
    });
    return Volume(v.dims(), std::move(out), v.spacing());
}

namespace {

// Block mean of a single x-fastest scalar array.
void block_mean(std::span<const double> src, const Dims& d, std::span<double> dst, double scale) {
    const Dims h{d.x / 2, d.y / 2, d.z / 2};
    for (std::size_t k = 0; k < h.z; ++k)
        for (std::size_t j = 0; j < h.y; ++j)
            for (std::size_t i = 0; i < h.x; ++i) {
                double acc = 0.0;
                for (std::size_t dk = 0; dk < 2; ++dk)
                    for (std::size_t dj = 0; dj < 2; ++dj)
                        for (std::size_t di = 0; di < 2; ++di)
                            acc += src[d.index(2 * i + di, 2 * j + dj, 2 * k + dk)];
                dst[h.index(i, j, k)] = acc * (scale / 8.0);
            }
}

}  // namespace

Volume downsample2x(const Volume& v) {
    const Dims& d = v.dims();
    if (!even_dims(d) || d.x < 2 || d.y < 2 || d.z < 2)
        throw ValidationError("volume", "downsample2x needs even dimensions, got " + d.str());
    const Dims h{d.x / 2, d.y / 2, d.z / 2};
    std::vector<double> out(h.count());
    block_mean(v.data(), d, out, 1.0);
    const Spacing& s = v.spacing();
    return Volume(h, std::move(out), {2.0 * s[0], 2.0 * s[1], 2.0 * s[2]});
}

DeformationField downsample_dvf(const DeformationField& u) {
    const Dims& d = u.dims();
    if (!even_dims(d))
        throw ValidationError("volume", "downsample_dvf needs even dimensions, got " + d.str());
    const Dims h{d.x / 2, d.y / 2, d.z / 2};
    DeformationField out(h);
    for (std::size_t c = 0; c < 3; ++c) block_mean(u.channel(c), d, out.channel(c), 0.5);
    return out;
}

DeformationField downsample_dvf_adjoint(const DeformationField& coarse_grad, const Dims& fine) {
    const Dims h{fine.x / 2, fine.y / 2, fine.z / 2};
    require_same_dims(coarse_grad.dims(), h, "volume", "downsample_dvf_adjoint");
    DeformationField out(fine);
    constexpr double w = 0.5 / 8.0;
    for (std::size_t c = 0; c < 3; ++c) {
        const auto src = coarse_grad.channel(c);
        auto dst = out.channel(c);
        for (std::size_t k = 0; k < fine.z; ++k)
            for (std::size_t j = 0; j < fine.y; ++j)
                for (std::size_t i = 0; i < fine.x; ++i)
                    dst[fine.index(i, j, k)] = w * src[h.index(i / 2, j / 2, k / 2)];
    }
    return out;
}

}  // namespace driftreg
