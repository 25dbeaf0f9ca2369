#include "driftreg/registration.hpp"

#include <chrono>
#include <cmath>

#include "driftreg/error.hpp"
#include "driftreg/metrics.hpp"
#include "driftreg/warp.hpp"

namespace driftreg {

void RegistrationConfig::validate() const {
    if (iterations < 1) throw ValidationError("register", "iterations must be >= 1, got " + std::to_string(iterations));
    for (double w : {weights.alpha, weights.alpha_d, weights.beta, weights.beta_d, weights.lambda})
        if (!std::isfinite(w)) throw ValidationError("register", "loss weights must be finite");
    if (similarity.kind == Similarity::nmi && similarity.nmi_bins < 2)
        throw ValidationError("register", "nmi_bins must be >= 2");
    if (similarity.ncc_window != 0 && (similarity.ncc_window < 3 || similarity.ncc_window % 2 == 0))
        throw ValidationError("register", "ncc_window must be 0 or an odd size >= 3");
    optimizer.validate();
    if (flags.scg && (scg.channels == 0 || scg.pool.count() == 0))
        throw ValidationError("register", "scg pool and channels must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

std::map<std::string, double> final_metrics(const Volume& fixed, const Volume& warped, const SimilarityOptions& sim,
                                            double final_loss) {
    std::map<std::string, double> r;
    r["final_loss"] = final_loss;
    r["ncc"] = ncc(fixed, warped).value;
    r["pcc"] = pcc(fixed, warped);
    r["kld"] = kld_joint(fixed, warped, fixed, 32);
    if (sim.kind == Similarity::nmi) {
        r["nmi"] = nmi(fixed, warped, sim.nmi_bins).value;
    } else if (fixed.dims().x >= std::size_t(kSsimWindow) && fixed.dims().y >= std::size_t(kSsimWindow) &&
               fixed.dims().z >= std::size_t(kSsimWindow)) {
        r["ssim"] = ssim(fixed, warped);
        r["mse"] = mse_metric(fixed, warped);
    }
    return r;
}

[[noreturn]] void diverged(int iteration, const std::vector<LossValue>& trace, const std::string& why) {
    std::string msg = "diverged at iteration " + std::to_string(iteration) + ": " + why;
    if (!trace.empty()) msg += "; last finite loss " + std::to_string(trace.back().total);
    throw NumericalError("register", msg);
}

void step_or_abort(optim::State& state, DeformationField& u, const WarpGradient& g, int iteration,
                   const std::vector<LossValue>& trace) {
    try {
        optim::step(state, u.components(), g.components());
    } catch (const NumericalError& e) {
        diverged(iteration, trace, e.what());
    }
}

}  // namespace

RegistrationResult register_direct(const Volume& fixed, const Volume& moving, const RegistrationConfig& cfg) {
    cfg.validate();
    if (cfg.flags.mss || cfg.flags.ic || cfg.flags.scg)
        throw ValidationError("register", "register_direct takes no mss/ic/scg flags");
    require_same_dims(fixed.dims(), moving.dims(), "register", "fixed vs moving");

    const auto t0 = Clock::now();
    RegistrationResult r;
    r.u_mf = DeformationField(fixed.dims());
    optim::State st = optim::init(cfg.optimizer, r.u_mf.components().size());
    r.loss_trace.reserve(std::size_t(cfg.iterations));
    for (int it = 0; it < cfg.iterations; ++it) {
        DirectLoss l = direct_loss(fixed, moving, r.u_mf, cfg.similarity, cfg.weights.alpha, cfg.weights.beta);
        if (!std::isfinite(l.loss.total)) diverged(it, r.loss_trace, "non-finite loss");
        r.loss_trace.push_back(std::move(l.loss));
        step_or_abort(st, r.u_mf, l.grad, it, r.loss_trace);
    }
    r.warped = warp_trilinear(moving, r.u_mf);
    r.metric_report = final_metrics(fixed, r.warped, cfg.similarity, r.loss_trace.back().total);
    r.elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

RegistrationResult register_micdir(const Volume& fixed, const Volume& moving, const RegistrationConfig& cfg) {
    cfg.validate();
    require_same_dims(fixed.dims(), moving.dims(), "register", "fixed vs moving");
    const Dims& d = fixed.dims();
    if (cfg.flags.mss && (d.x % 2 || d.y % 2 || d.z % 2))
        throw ValidationError("register", "mss needs even dims, got " + d.str());

    const auto t0 = Clock::now();
    const MicdirObjective objective(fixed, moving, cfg.weights, cfg.flags, cfg.similarity);
    std::optional<scg::Params> params;
    if (cfg.flags.scg) params = scg::Params::random(2, cfg.scg.channels, cfg.seed);

    RegistrationResult r;
    r.u_mf = DeformationField(d);
    DeformationField u_fm(d);
    optim::State st_mf = optim::init(cfg.optimizer, r.u_mf.components().size());
    std::optional<optim::State> st_fm;
    if (cfg.flags.ic) st_fm = optim::init(cfg.optimizer, u_fm.components().size());

    r.loss_trace.reserve(std::size_t(cfg.iterations));
    for (int it = 0; it < cfg.iterations; ++it) {
        std::optional<std::pair<double, double>> scg_terms;
        if (params) {
            const double mf = scg::scg_term(fixed, warp_trilinear(moving, r.u_mf), *params, cfg.scg.pool, cfg.seed);
            const double fm = cfg.flags.ic
                                  ? scg::scg_term(moving, warp_trilinear(fixed, u_fm), *params, cfg.scg.pool, cfg.seed)
                                  : 0.0;
            scg_terms = std::pair{fm, mf};
        }
        MicdirLoss l = objective.evaluate(u_fm, r.u_mf, scg_terms);
        if (!std::isfinite(l.loss.total)) diverged(it, r.loss_trace, "non-finite loss");
        r.loss_trace.push_back(std::move(l.loss));
        step_or_abort(st_mf, r.u_mf, l.grad_mf, it, r.loss_trace);
        if (st_fm) step_or_abort(*st_fm, u_fm, l.grad_fm, it, r.loss_trace);
    }
    if (cfg.flags.ic) r.u_fm = std::move(u_fm);
    r.warped = warp_trilinear(moving, r.u_mf);
    r.metric_report = final_metrics(fixed, r.warped, cfg.similarity, r.loss_trace.back().total);
    if (r.u_fm) {
        const ConsistencyError ice = inverse_consistency_error(*r.u_fm, r.u_mf);
        r.metric_report["ic_error_mean"] = ice.mean;
        r.metric_report["ic_error_max"] = ice.max;
    }
    r.elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

ConsistencyError inverse_consistency_error(const DeformationField& u_fm, const DeformationField& u_mf) {
    require_same_dims(u_fm.dims(), u_mf.dims(), "register", "inverse_consistency_error");
    const Dims& d = u_mf.dims();
    if (d.x < 3 || d.y < 3 || d.z < 3)
        throw ValidationError("register", "inverse_consistency_error needs at least 3 voxels per axis");
    const DeformationField e = compose(u_fm, u_mf);
    ConsistencyError out;
    std::size_t count = 0;
    for (std::size_t z = 1; z + 1 < d.z; ++z)
        for (std::size_t y = 1; y + 1 < d.y; ++y)
            for (std::size_t x = 1; x + 1 < d.x; ++x) {
                const std::size_t i = d.index(x, y, z);
                const double n = std::hypot(e(0, i), e(1, i), e(2, i));
                out.mean += n;
                out.max = std::max(out.max, n);
                ++count;
            }
    out.mean /= double(count);
    return out;
}

}  // namespace driftreg
