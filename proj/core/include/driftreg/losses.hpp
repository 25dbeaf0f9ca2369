#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>

#include "driftreg/volume.hpp"
#include "driftreg/warp.hpp"

namespace driftreg {

enum class Similarity { ncc, nmi, mse };

std::string to_string(Similarity s);
Similarity similarity_from_string(const std::string& name);

struct SimilarityOptions {
    Similarity kind = Similarity::ncc;
    int nmi_bins = 32;
    // 0 selects global NCC; an odd size > 1 selects windowed NCC with a
    // cubic window of that edge length.
    int ncc_window = 0;
};

// A similarity/dissimilarity value and its gradient with respect to the
// second argument.
struct ScoreGrad {
    double value = 0.0;
    Volume grad;
};

// Global zero-normalised cross-correlation, in [-1, 1].
ScoreGrad ncc(const Volume& a, const Volume& b);

// Mean over voxels of cross^2 / (var_a * var_b + 1e-5) over cubic windows
// truncated at the border, in [0, 1].
ScoreGrad windowed_ncc(const Volume& a, const Volume& b, int window);

// Mean squared difference.
ScoreGrad mse_sim(const Volume& a, const Volume& b);

// Studholme NMI (H(A) + H(B)) / H(A,B) in [1, 2]. Intensities of each image
// are min-max mapped onto [0, bins-1] and spread over neighbouring bins with a
// cubic B-spline Parzen window.
ScoreGrad nmi(const Volume& a, const Volume& b, int bins);

ScoreGrad similarity(const Volume& a, const Volume& b, const SimilarityOptions& opts);

// Mean of squared forward differences over voxels, channels, and axes:
// sum of (u_c(x + e_k) - u_c(x))^2 over existing neighbours, divided by 9N.
struct Smoothness {
    double value = 0.0;
    WarpGradient grad;
};
Smoothness smoothness(const DeformationField& u);

struct LossWeights {
    double alpha = -1.2;    // full-scale similarity
    double alpha_d = -0.6;  // half-scale similarity
    double beta = 0.5;      // full-scale smoothness
    double beta_d = 0.25;   // half-scale smoothness
    double lambda = 5.0;    // SCG term

    static LossWeights micdir_defaults() { return {}; }
    // alpha = -1 for NCC/NMI (+1 for MSE), beta = 0.5 (5 for NMI); the half-scale and
    // SCG weights are unused by the direct objective.
    static LossWeights direct_defaults(Similarity s);
};

struct LossTerm {
    double value = 0.0;
    double weight = 0.0;
};

struct LossValue {
    double total = 0.0;
    std::map<std::string, LossTerm> terms;

    double weighted_sum() const;
};

// alpha * sim(f, m o u) + beta * smoothness(u), with d/du.
struct DirectLoss {
    LossValue loss;
    WarpGradient grad;
};
DirectLoss direct_loss(const Volume& f, const Volume& m, const DeformationField& u,
                       const SimilarityOptions& sim, double alpha, double beta);

struct ObjectiveFlags {
    bool mss = false;  // add half-resolution similarity and smoothness terms
    bool ic = false;   // also optimise the fixed -> moving direction
    bool scg = false;  // add lambda * (scg_fm + scg_mf)
};

struct MicdirLoss {
    LossValue loss;
    WarpGradient grad_mf;
    WarpGradient grad_fm;  // zero field when flags.ic is false
};

// Precomputes the half-resolution images once so repeated evaluations (one
// per optimisation step) do not rebuild the pyramid.
class MicdirObjective {
public:
    MicdirObjective(Volume fixed, Volume moving, LossWeights weights, ObjectiveFlags flags,
                    SimilarityOptions sim);

    // scg_terms = (scg_fm, scg_mf); required when flags.scg is set. They enter
    // the total as constants with no gradient.
    MicdirLoss evaluate(const DeformationField& u_fm, const DeformationField& u_mf,
                        std::optional<std::pair<double, double>> scg_terms = std::nullopt) const;

    const Volume& fixed() const noexcept { return f_; }
    const Volume& moving() const noexcept { return m_; }
    const LossWeights& weights() const noexcept { return w_; }
    const ObjectiveFlags& flags() const noexcept { return flags_; }
    const SimilarityOptions& similarity_options() const noexcept { return sim_; }

private:
    Volume f_, m_;
    Volume f_d_, m_d_;
    LossWeights w_;
    ObjectiveFlags flags_;
    SimilarityOptions sim_;
};

MicdirLoss micdir_loss(const Volume& f, const Volume& m, const DeformationField& u_fm,
                       const DeformationField& u_mf, const LossWeights& w, const ObjectiveFlags& flags,
                       const SimilarityOptions& sim,
                       std::optional<std::pair<double, double>> scg_terms = std::nullopt);

}  // namespace driftreg
