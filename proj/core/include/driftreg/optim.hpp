#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace driftreg::optim {

enum class Kind { sgd, rmsprop, adam, adamw };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& name);

struct Config {
    Kind kind = Kind::rmsprop;
    double lr = 0.01;
    double momentum = 0.0;  // sgd
    double rho = 0.99;      // rmsprop smoothing constant
    double beta1 = 0.9;     // adam / adamw
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // adamw only

    // Throws ValidationError when any hyperparameter is out of range.
    void validate() const;
};

// Moment buffers are allocated only for the kinds that use them:
// sgd -> first (velocity, only with momentum), rmsprop -> second,
// adam/adamw -> first and second.
struct State {
    Config cfg;
    std::uint64_t t = 0;
    std::size_t size = 0;
    std::vector<double> first;
    std::vector<double> second;
};

State init(const Config& cfg, std::size_t param_count);

// One update of params in place, following the PyTorch reference recurrences
// (sgd without dampening/nesterov; rmsprop non-centred; adam/adamw with bias
// correction; adamw decays params by lr * weight_decay before the moment step).
void step(State& state, std::span<double> params, std::span<const double> grads);

}  // namespace driftreg::optim
