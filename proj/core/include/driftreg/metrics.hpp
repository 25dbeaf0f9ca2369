#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "driftreg/volume.hpp"

namespace driftreg {

// Sample Pearson correlation (N - 1 normalisation).
double pcc(const Volume& a, const Volume& b);

struct DiceScores {
    std::map<std::int32_t, double> per_class;  // every label 0..K-1, background included
    double mean = 0.0;
};

// 2|X and Y| / (|X| + |Y|) per class; a class absent from both maps scores 1.
// Both maps must use the same label range 0..K-1.
DiceScores dice(const LabelMap& x, const LabelMap& y);

// Row-major bins x bins joint probabilities.
struct JointHistogram {
    int bins = 0;
    std::vector<double> p;
};

// KL(p_o || p_e) after adding 1e-10 to every cell and renormalising.
double kld_from_joint(const JointHistogram& observed, const JointHistogram& expected);

// Joint histograms of (a, b_obs) and (a, b_exp) on shared bin edges: a spans
// its own range, the second axis spans the range of b_obs and b_exp together.
double kld_joint(const Volume& a, const Volume& b_obs, const Volume& b_exp, int bins);

inline constexpr int kSsimWindow = 7;

// Mean SSIM over every 7x7x7 window lying fully inside the volume, with
// c1 = (0.01 L)^2, c2 = (0.03 L)^2, L = max(a, b) - min(a, b) and N - 1
// (co)variances. Returns 1 when L = 0.
double ssim(const Volume& a, const Volume& b);

double mse_metric(const Volume& a, const Volume& b);

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-tailed
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
TTest welch_ttest(std::span<const double> xs, std::span<const double> ys);

// Seeded 1D k-means (k-means++ init, 5 restarts, best inertia kept, at most
// 100 iterations, centre tolerance 1e-6). Labels 0..k-1 in ascending order of
// class mean intensity.
LabelMap segment_intensity(const Volume& v, int k = 4, std::uint64_t seed = 0);

struct MetricReport {
    std::map<std::string, double> values;
    std::map<std::int32_t, double> dice_per_class;
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> notes;
};

struct EvalOptions {
    bool intermodal = false;   // report only pcc, dice, kld
    bool include_ssim_mse = true;
    int kld_bins = 32;
    int segment_classes = 4;
    std::uint64_t seed = 0;
};

// Metrics of `registered` against `fixed`. KLD compares (fixed, registered)
// with (fixed, fixed). When either label map is missing both images are
// segmented with segment_intensity and a note says so.
MetricReport evaluate_metrics(const Volume& fixed, const Volume& registered, const LabelMap* labels_fixed,
                              const LabelMap* labels_registered, const EvalOptions& opts = {});

}  // namespace driftreg
