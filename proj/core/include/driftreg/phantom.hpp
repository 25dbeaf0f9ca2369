#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "driftreg/volume.hpp"

namespace driftreg {

enum class DeformationKind { gaussian_bumps, uniform_shift };

std::string to_string(DeformationKind k);
DeformationKind deformation_kind_from_string(const std::string& name);

struct PhantomSpec {
    std::size_t size = 32;  // cube edge, >= 16
    std::uint64_t seed = 0;
    DeformationKind kind = DeformationKind::gaussian_bumps;
    double max_displacement = 3.0;  // voxels, < size / 4
    int bump_count = 4;
    std::array<double, 3> shift{1.0, 0.0, 0.0};  // uniform_shift only

    void validate() const;
};

struct Phantom {
    Volume image;
    LabelMap labels;
};

// Four nested classes (0 background, 1 shell, 2 blob, 3 core) with smooth
// edges, seeded shape perturbations, and Gaussian noise of 2% of the range.
Phantom make_phantom(const PhantomSpec& spec);

// gaussian_bumps: bump_count Gaussian-windowed displacements (sigma = size/6)
// with seeded centres and directions, scaled so the largest |u| equals
// max_displacement. uniform_shift: the constant field `shift`.
DeformationField make_deformation(const PhantomSpec& spec);

// v with v(x) = -u(x + v(x)), found by fixed-point iteration, so that
// warping by v then by u returns to the start.
DeformationField invert_field(const DeformationField& u, int iterations = 50);

struct PhantomPair {
    Volume fixed;
    Volume moving;
    DeformationField gt;
    LabelMap labels_fixed;
    LabelMap labels_moving;
};

// moving = warp(fixed, invert_field(gt)) so that warp(moving, gt) ~ fixed:
// the field a registration of (fixed, moving) should recover is gt itself.
PhantomPair make_pair(const PhantomSpec& spec);

// Monotone contrast change for intermodal experiments: intensities are
// min-max normalised to [0, 1] and mapped through t^gamma.
Volume remap_intensity(const Volume& v, double gamma);

struct EndpointError {
    double mean = 0.0;
    double max = 0.0;
};

// |est(x) - gt(x)| over voxels at least `margin` voxels from every face.
EndpointError dvf_endpoint_error(const DeformationField& est, const DeformationField& gt, std::size_t margin = 2);

}  // namespace driftreg
