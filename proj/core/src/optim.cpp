#include "driftreg/optim.hpp"

#include <cmath>

#include "driftreg/error.hpp"

namespace driftreg::optim {

std::string to_string(Kind k) {
    switch (k) {
        case Kind::sgd: return "sgd";
        case Kind::rmsprop: return "rmsprop";
        case Kind::adam: return "adam";
        case Kind::adamw: return "adamw";
    }
    return "?";
}

Kind kind_from_string(const std::string& name) {
    if (name == "sgd") return Kind::sgd;
    if (name == "rmsprop") return Kind::rmsprop;
    if (name == "adam") return Kind::adam;
    if (name == "adamw") return Kind::adamw;
    throw ValidationError("optim", "unknown optimizer '" + name + "' (expected sgd, rmsprop, adam, adamw)");
}

void Config::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("optim", what); };
    if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
    if (!(momentum >= 0.0) || !std::isfinite(momentum)) fail("momentum must be >= 0");
    if (!(rho > 0.0 && rho < 1.0)) fail("rho must lie in (0, 1)");
    if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
    if (!(eps > 0.0) || !std::isfinite(eps)) fail("eps must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be >= 0");
}

State init(const Config& cfg, std::size_t param_count) {
    cfg.validate();
    State s;
    s.cfg = cfg;
    s.size = param_count;
    switch (cfg.kind) {
        case Kind::sgd:
            if (cfg.momentum > 0.0) s.first.assign(param_count, 0.0);
            break;
        case Kind::rmsprop: s.second.assign(param_count, 0.0); break;
        case Kind::adam:
        case Kind::adamw:
            s.first.assign(param_count, 0.0);
            s.second.assign(param_count, 0.0);
            break;
    }
    return s;
}

void step(State& s, std::span<double> p, std::span<const double> g) {
    if (p.size() != s.size || g.size() != s.size)
        throw ValidationError("optim", "parameter/gradient size " + std::to_string(p.size()) + "/" +
                                           std::to_string(g.size()) + " does not match state size " +
                                           std::to_string(s.size));
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
            throw NumericalError("optim", "non-finite gradient at element " + std::to_string(i));

    const Config& c = s.cfg;
    ++s.t;
    const std::size_t n = p.size();
    switch (c.kind) {
        case Kind::sgd:
            if (c.momentum > 0.0) {
                for (std::size_t i = 0; i < n; ++i) {
                    s.first[i] = c.momentum * s.first[i] + g[i];
                    p[i] -= c.lr * s.first[i];
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) p[i] -= c.lr * g[i];
            }
            break;
        case Kind::rmsprop:
            for (std::size_t i = 0; i < n; ++i) {
                s.second[i] = c.rho * s.second[i] + (1.0 - c.rho) * g[i] * g[i];
                p[i] -= c.lr * g[i] / (std::sqrt(s.second[i]) + c.eps);
            }
            break;
        case Kind::adam:
        case Kind::adamw: {
            const double step_size = c.lr / (1.0 - std::pow(c.beta1, double(s.t)));
            const double bc2_sqrt = std::sqrt(1.0 - std::pow(c.beta2, double(s.t)));
            const double decay = c.kind == Kind::adamw ? 1.0 - c.lr * c.weight_decay : 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (c.kind == Kind::adamw) p[i] *= decay;
                s.first[i] = c.beta1 * s.first[i] + (1.0 - c.beta1) * g[i];
                s.second[i] = c.beta2 * s.second[i] + (1.0 - c.beta2) * g[i] * g[i];
                p[i] -= step_size * s.first[i] / (std::sqrt(s.second[i]) / bc2_sqrt + c.eps);
            }
            break;
        }
    }
}

}  // namespace driftreg::optim
