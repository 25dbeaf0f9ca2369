#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace driftreg {

struct GradcheckOptions {
    std::uint64_t seed = 0;
    int instances = 50;
    std::vector<std::size_t> sizes{6, 7, 8};  // cube edges, cycled over instances
    double tolerance = 1e-4;
    double step = 1e-5;  // central-difference step
    // Flips the sign of the analytic NCC gradient; lets tests confirm the
    // harness actually fails on a wrong gradient.
    bool inject_fault = false;
};

struct GradcheckTerm {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t components = 0;  // compared components over all instances
};

struct GradcheckReport {
    std::vector<GradcheckTerm> terms;
    double tolerance = 0.0;

    bool passed() const;
};

// Compares analytic gradients with central differences for the warp adjoint,
// ncc (global and windowed), mse, nmi, smoothness, direct_loss and
// micdir_loss on seeded random instances. The relative error is taken over
// components whose numerical derivative is at least 1e-3 of the largest one;
// components whose difference stencil crosses a trilinear cell boundary or
// the clamp at the border are skipped, since the warp is not differentiable
// there.
GradcheckReport run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace driftreg
