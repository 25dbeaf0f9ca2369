#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace driftreg {

// Grid extent in voxels. Memory layout everywhere is x-fastest:
// linear index = x + nx * (y + ny * z).
struct Dims {
    std::size_t x = 0;
    std::size_t y = 0;
    std::size_t z = 0;

    constexpr std::size_t count() const noexcept { return x * y * z; }
    constexpr std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return i + x * (j + y * k);
    }
    constexpr std::size_t operator[](std::size_t axis) const noexcept {
        return axis == 0 ? x : (axis == 1 ? y : z);
    }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;

    std::string str() const;
};

// Millimetres per voxel along x, y, z.
using Spacing = std::array<double, 3>;

// Dense 3D scalar field.
class Volume {
public:
    Volume() = default;
    // Zero-filled.
    explicit Volume(Dims dims, Spacing spacing = {1.0, 1.0, 1.0});
    // Takes ownership of data; validates length, spacing, and finiteness.
    Volume(Dims dims, std::vector<double> data, Spacing spacing = {1.0, 1.0, 1.0});

    const Dims& dims() const noexcept { return dims_; }
    const Spacing& spacing() const noexcept { return spacing_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[dims_.index(i, j, k)];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[dims_.index(i, j, k)];
    }

    void set_spacing(Spacing spacing);

private:
    Dims dims_{};
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<double> data_;
};

// Integer segmentation on the same grid as a Volume; 0 is background.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(Dims dims);
    LabelMap(Dims dims, std::vector<std::int32_t> labels);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return labels_.size(); }
    std::span<const std::int32_t> labels() const noexcept { return labels_; }
    std::span<std::int32_t> labels() noexcept { return labels_; }
    std::int32_t operator[](std::size_t i) const noexcept { return labels_[i]; }
    std::int32_t& operator[](std::size_t i) noexcept { return labels_[i]; }

    // max label + 1 (0 for an empty map).
    std::int32_t class_count() const noexcept;

private:
    Dims dims_{};
    std::vector<std::int32_t> labels_;
};

// Per-voxel displacement in voxel units, stored as three planar channels
// (all ux, then all uy, then all uz). Applied as a pull warp:
// warped(x) = moving(x + u(x)).
class DeformationField {
public:
    DeformationField() = default;
    // Zero (identity) field.
    explicit DeformationField(Dims dims);
    DeformationField(Dims dims, std::vector<double> components);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t voxels() const noexcept { return dims_.count(); }

    // All 3 * voxels() components, channel-planar.
    std::span<const double> components() const noexcept { return u_; }
    std::span<double> components() noexcept { return u_; }

    std::span<const double> channel(std::size_t c) const noexcept {
        return std::span<const double>(u_).subspan(c * voxels(), voxels());
    }
    std::span<double> channel(std::size_t c) noexcept {
        return std::span<double>(u_).subspan(c * voxels(), voxels());
    }

    double operator()(std::size_t c, std::size_t voxel) const noexcept {
        return u_[c * voxels() + voxel];
    }
    double& operator()(std::size_t c, std::size_t voxel) noexcept {
        return u_[c * voxels() + voxel];
    }

private:
    Dims dims_{};
    std::vector<double> u_;
};

// Gradient of a scalar loss with respect to every DVF component.
using WarpGradient = DeformationField;

void require_same_dims(const Dims& a, const Dims& b, const char* module, const char* what);
void require_finite(std::span<const double> values, const char* module, const char* what);

// (v - mean) / std with population statistics.
Volume normalize_zscore(const Volume& v);

// Mean of each 2x2x2 block; spacing doubles.
Volume downsample2x(const Volume& v);

// Per-channel 2x2x2 block mean, scaled by 0.5 so displacements stay in voxel
// units of the coarser grid.
DeformationField downsample_dvf(const DeformationField& u);

// Adjoint of downsample_dvf: spreads a coarse-grid gradient back onto the
// fine grid (each fine voxel receives 0.5/8 of its block's value).
DeformationField downsample_dvf_adjoint(const DeformationField& coarse_grad, const Dims& fine);

}  // namespace driftreg
