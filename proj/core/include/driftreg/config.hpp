#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "driftreg/phantom.hpp"
#include "driftreg/registration.hpp"

namespace driftreg {

// Tuned step sizes for the phantom workloads (direct and combined objectives).
optim::Config default_optimizer(optim::Kind kind);

enum class Mode { micdir, direct };

// Resolved `register` configuration. Documents use lower_snake_case keys and
// any unknown key is a ConfigError:
//   mode, similarity, nmi_bins, ncc_window, weights{alpha, alpha_d, beta,
//   beta_d, lambda}, optimizer{kind, lr, momentum, rho, beta1, beta2, eps,
//   weight_decay}, iterations, flags{mss, ic, scg}, seed,
//   scg{pool: [x, y, z], channels}, fixed, moving, out
struct RunConfig {
    Mode mode = Mode::micdir;
    RegistrationConfig registration;
    std::optional<std::filesystem::path> fixed;
    std::optional<std::filesystem::path> moving;
    std::optional<std::filesystem::path> out;
};

// Missing weights take the mode's defaults; a missing optimizer section (or
// lr) takes default_optimizer(kind). Flags default to on in micdir mode.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig default_run_config(Mode mode);
std::string run_config_json(const RunConfig& cfg);

// {size, seed, kind, max_displacement, bump_count, shift: [x, y, z]}
PhantomSpec parse_phantom_spec(std::string_view json_text);
std::string phantom_spec_json(const PhantomSpec& spec);

// Input of compare-optimizers: the shared phantom family and registration
// settings, and the optimizers to run on every seed.
//   phantom{...}, seeds, first_seed, iterations, similarity, weights{alpha,
//   beta}, optimizers: [{kind, lr, ...}]
struct CompareConfig {
    PhantomSpec phantom;
    int seeds = 10;
    std::uint64_t first_seed = 0;
    int iterations = 1500;
    SimilarityOptions similarity;
    LossWeights weights = LossWeights::direct_defaults(Similarity::ncc);
    std::vector<optim::Config> optimizers;
};

CompareConfig parse_compare_config(std::string_view json_text);
CompareConfig default_compare_config();
std::string compare_config_json(const CompareConfig& cfg);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace driftreg
