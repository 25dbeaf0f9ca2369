#pragma once

#include "driftreg/volume.hpp"

namespace driftreg {

// output(x) = trilinear sample of m at x + u(x); coordinates outside the grid
// are clamped to the boundary.
Volume warp_trilinear(const Volume& m, const DeformationField& u);

// Warped image together with d(warped)/d(u) per voxel and channel. The
// derivative is zero along any axis where the sample coordinate was clamped.
struct WarpSample {
    Volume warped;
    DeformationField jacobian;
};
WarpSample warp_with_derivatives(const Volume& m, const DeformationField& u);

// d/du of sum_x upstream(x) * warp_trilinear(m, u)(x).
WarpGradient warp_gradient(const Volume& m, const DeformationField& u, const Volume& upstream);

// Same as warp_gradient when the per-voxel derivatives are already known.
WarpGradient warp_gradient(const WarpSample& sample, const Volume& upstream);

// (u_ab o u_ba)(x) = u_ba(x) + u_ab(x + u_ba(x)), sampling u_ab trilinearly
// with clamp-to-edge.
DeformationField compose(const DeformationField& u_ab, const DeformationField& u_ba);

// Pull-warps a label map with nearest-neighbour lookup.
LabelMap warp_labels(const LabelMap& labels, const DeformationField& u);

}  // namespace driftreg
