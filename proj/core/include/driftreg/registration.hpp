#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "driftreg/losses.hpp"
#include "driftreg/optim.hpp"
#include "driftreg/scg.hpp"

namespace driftreg {

struct RegistrationConfig {
    SimilarityOptions similarity;
    LossWeights weights = LossWeights::micdir_defaults();
    optim::Config optimizer;
    int iterations = 1500;
    ObjectiveFlags flags;
    std::uint64_t seed = 0;
    scg::TermConfig scg;

    void validate() const;
};

struct RegistrationResult {
    DeformationField u_mf;
    std::optional<DeformationField> u_fm;  // present iff flags.ic
    Volume warped;                         // warp_trilinear(moving, u_mf)
    std::vector<LossValue> loss_trace;     // one entry per iteration, before its step
    std::map<std::string, double> metric_report;
    double elapsed = 0.0;  // seconds
};

// Optimises a single field against alpha * sim + beta * smoothness starting
// from zero. Every flag in cfg must be off.
RegistrationResult register_direct(const Volume& fixed, const Volume& moving, const RegistrationConfig& cfg);

// Optimises u_mf (and u_fm when ic is set) against the combined objective; one
// optimiser state per direction, both stepped from the same evaluation. With
// every flag off this is register_direct.
RegistrationResult register_micdir(const Volume& fixed, const Volume& moving, const RegistrationConfig& cfg);

struct ConsistencyError {
    double mean = 0.0;
    double max = 0.0;
};

// Norm of the round-trip displacement compose(u_fm, u_mf) over voxels at
// least one voxel from every face.
ConsistencyError inverse_consistency_error(const DeformationField& u_fm, const DeformationField& u_mf);

}  // namespace driftreg
