// driftreg command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration, 2 I/O, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftreg/config.hpp"
#include "driftreg/error.hpp"
#include "driftreg/gradcheck.hpp"
#include "driftreg/io.hpp"
#include "driftreg/metrics.hpp"
#include "driftreg/phantom.hpp"
#include "driftreg/registration.hpp"
#include "driftreg/report.hpp"
#include "driftreg/warp.hpp"

namespace fs = std::filesystem;
using namespace driftreg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cli", "cannot create output directory " + dir.string() + ": " + ec.message());
}

// Keeps the input's format for the warped image.
fs::path warped_name(const fs::path& moving) {
    return moving.extension() == ".nii" ? fs::path("warped.nii") : fs::path("warped.vol");
}

struct RegisterArgs {
    std::string fixed, moving, config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> iterations;
};

int cmd_register(const RegisterArgs& a) {
    RunConfig cfg = a.config.empty() ? default_run_config(Mode::micdir) : load_run_config(a.config);
    if (!a.fixed.empty()) cfg.fixed = a.fixed;
    if (!a.moving.empty()) cfg.moving = a.moving;
    if (!a.out.empty()) cfg.out = a.out;
    if (a.seed) cfg.registration.seed = *a.seed;
    if (a.iterations) cfg.registration.iterations = *a.iterations;
    if (!cfg.fixed || !cfg.moving) throw ConfigError("cli", "register needs fixed and moving images");
    if (!cfg.out) throw ConfigError("cli", "register needs --out");
    cfg.registration.validate();

    const Volume fixed = load_volume(*cfg.fixed);
    const Volume moving = load_volume(*cfg.moving);
    if (fixed.dims() != moving.dims())
        throw ValidationError("cli", "fixed " + fixed.dims().str() + " and moving " + moving.dims().str() +
                                         " have different shapes");
    const RegistrationResult r = cfg.mode == Mode::direct ? register_direct(fixed, moving, cfg.registration)
                                                          : register_micdir(fixed, moving, cfg.registration);

    ensure_dir(*cfg.out);
    write_text_file(*cfg.out / "result.json", result_json(r, cfg));
    save_field(r.u_mf, *cfg.out / "dvf_mf.vol");
    if (r.u_fm) save_field(*r.u_fm, *cfg.out / "dvf_fm.vol");
    Volume warped = r.warped;
    warped.set_spacing(moving.spacing());
    save_volume(warped, *cfg.out / warped_name(*cfg.moving));
    std::printf("registered in %.2fs, final loss %.6g\n", r.elapsed, r.loss_trace.back().total);
    return kOk;
}

struct EvalArgs {
    std::string fixed, registered, labels_fixed, labels_registered, out;
    bool intermodal = false;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
    const Volume fixed = load_volume(a.fixed);
    const Volume registered = load_volume(a.registered);
    if (fixed.dims() != registered.dims())
        throw ValidationError("cli", "fixed " + fixed.dims().str() + " and registered " + registered.dims().str() +
                                         " have different shapes");
    if (a.labels_fixed.empty() != a.labels_registered.empty())
        throw ConfigError("cli", "give both --labels-fixed and --labels-registered, or neither");
    std::optional<LabelMap> lf, lr;
    if (!a.labels_fixed.empty()) {
        lf = load_labels(a.labels_fixed);
        lr = load_labels(a.labels_registered);
    }
    EvalOptions opts;
    opts.intermodal = a.intermodal;
    opts.seed = a.seed;
    const MetricReport rep =
        evaluate_metrics(fixed, registered, lf ? &*lf : nullptr, lr ? &*lr : nullptr, opts);
    const std::string text = metric_report_json(rep);
    std::cout << text << "\n";
    if (!a.out.empty()) {
        ensure_dir(a.out);
        write_text_file(fs::path(a.out) / "metrics.json", text);
    }
    return kOk;
}

struct PhantomArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
};

int cmd_phantom(const PhantomArgs& a) {
    PhantomSpec spec = a.config.empty() ? PhantomSpec{} : parse_phantom_spec(read_text_file(a.config));
    if (a.seed) spec.seed = *a.seed;
    spec.validate();
    const PhantomPair p = make_pair(spec);
    const fs::path out(a.out);
    ensure_dir(out);
    save_volume(p.fixed, out / "fixed.vol");
    save_volume(p.moving, out / "moving.vol");
    save_field(p.gt, out / "gt.vol");
    save_labels(p.labels_fixed, out / "labels_fixed.vol");
    save_labels(p.labels_moving, out / "labels_moving.vol");
    std::printf("phantom %zu^3 seed %llu written to %s\n", spec.size, (unsigned long long)spec.seed,
                out.string().c_str());
    return kOk;
}

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::vector<std::size_t> sizes{6, 7, 8};
    int instances = 50;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    GradcheckOptions o;
    o.seed = a.seed;
    o.sizes = a.sizes;
    o.instances = a.instances;
    const GradcheckReport rep = run_gradcheck(o);
    for (const auto& t : rep.terms)
        std::printf("%-14s max rel err %.3e over %zu components  %s\n", t.name.c_str(), t.max_rel_error,
                    t.components, t.max_rel_error < rep.tolerance ? "ok" : "FAIL");
    return rep.passed() ? kOk : kNumerical;
}

struct CompareArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> iterations;
};

struct Stats {
    double mean = 0.0, sd = 0.0;
};

Stats stats(const std::vector<double>& v) {
    Stats s;
    for (double x : v) s.mean += x;
    s.mean /= double(v.size());
    if (v.size() > 1) {
        for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(s.sd / double(v.size() - 1));
    }
    return s;
}

std::string csv_number(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

int cmd_compare(const CompareArgs& a) {
    CompareConfig c = a.config.empty() ? default_compare_config() : parse_compare_config(read_text_file(a.config));
    if (a.seed) c.first_seed = *a.seed;
    if (a.iterations) c.iterations = *a.iterations;

    // Phantoms are shared by every optimizer.
    std::vector<PhantomPair> pairs;
    for (int s = 0; s < c.seeds; ++s) {
        PhantomSpec spec = c.phantom;
        spec.seed = c.first_seed + std::uint64_t(s);
        pairs.push_back(make_pair(spec));
    }

    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream csv;
    csv << "optimizer,lr,seeds,ncc_mean,ncc_sd,dice_mean,dice_sd,epe_mean,epe_sd\n";
    for (const optim::Config& oc : c.optimizers) {
        std::vector<double> nccs, dices, epes;
        for (std::size_t s = 0; s < pairs.size(); ++s) {
            const PhantomPair& p = pairs[s];
            RegistrationConfig rc;
            rc.similarity = c.similarity;
            rc.weights = c.weights;
            rc.optimizer = oc;
            rc.iterations = c.iterations;
            rc.seed = c.first_seed + s;
            const RegistrationResult r = register_direct(p.fixed, p.moving, rc);
            nccs.push_back(ncc(p.fixed, r.warped).value);
            dices.push_back(dice(p.labels_fixed, warp_labels(p.labels_moving, r.u_mf)).mean);
            epes.push_back(dvf_endpoint_error(r.u_mf, p.gt).mean);
        }
        const Stats sn = stats(nccs), sd = stats(dices), se = stats(epes);
        const std::string name = optim::to_string(oc.kind);
        csv << name << "," << csv_number(oc.lr) << "," << c.seeds << "," << csv_number(sn.mean) << ","
            << csv_number(sn.sd) << "," << csv_number(sd.mean) << "," << csv_number(sd.sd) << ","
            << csv_number(se.mean) << "," << csv_number(se.sd) << "\n";
        rows.push_back({{"optimizer", name},
                        {"lr", oc.lr},
                        {"seeds", c.seeds},
                        {"ncc", {{"mean", sn.mean}, {"sd", sn.sd}, {"values", nccs}}},
                        {"dice", {{"mean", sd.mean}, {"sd", sd.sd}, {"values", dices}}},
                        {"epe", {{"mean", se.mean}, {"sd", se.sd}, {"values", epes}}}});
        std::printf("%-8s ncc %.4f  dice %.4f  epe %.4f\n", name.c_str(), sn.mean, sd.mean, se.mean);
    }
    const fs::path out(a.out);
    ensure_dir(out);
    write_text_file(out / "compare.csv", csv.str());
    const nlohmann::json doc = {{"config", nlohmann::json::parse(compare_config_json(c))}, {"rows", rows}};
    write_text_file(out / "compare.json", doc.dump(2));
    return kOk;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftreg: dense deformable registration by direct field optimisation"};
    app.require_subcommand(1);
    int rc = kOk;

    RegisterArgs ra;
    auto* reg = app.add_subcommand("register", "register a moving image to a fixed image");
    reg->add_option("fixed", ra.fixed, "fixed image (.nii or .vol)");
    reg->add_option("moving", ra.moving, "moving image (.nii or .vol)");
    reg->add_option("--config", ra.config, "JSON run configuration");
    reg->add_option("--out", ra.out, "output directory");
    reg->add_option("--seed", ra.seed, "seed override");
    reg->add_option("--iterations", ra.iterations, "iteration count override")->check(CLI::PositiveNumber);
    reg->callback([&] { rc = guarded([&] { return cmd_register(ra); }); });

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "compare a registered image against the fixed image");
    ev->add_option("fixed", ea.fixed, "fixed image")->required();
    ev->add_option("registered", ea.registered, "registered image")->required();
    ev->add_option("--labels-fixed", ea.labels_fixed, "label map of the fixed image");
    ev->add_option("--labels-registered", ea.labels_registered, "label map of the registered image");
    ev->add_flag("--intermodal", ea.intermodal, "report only pcc, dice and kld");
    ev->add_option("--out", ea.out, "also write metrics.json here");
    ev->add_option("--seed", ea.seed, "seed of the fallback segmentation");
    ev->callback([&] { rc = guarded([&] { return cmd_eval(ea); }); });

    PhantomArgs pa;
    auto* ph = app.add_subcommand("phantom", "write a synthetic image pair with ground truth");
    ph->add_option("--config", pa.config, "JSON phantom spec");
    ph->add_option("--out", pa.out, "output directory")->required();
    ph->add_option("--seed", pa.seed, "seed override");
    ph->callback([&] { rc = guarded([&] { return cmd_phantom(pa); }); });

    GradcheckArgs ga;
    auto* gc = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
    gc->add_option("--seed", ga.seed, "instance seed");
    gc->add_option("--sizes", ga.sizes, "cube edges to cycle through")->delimiter(',');
    gc->add_option("--instances", ga.instances, "number of random instances")->check(CLI::PositiveNumber);
    gc->callback([&] { rc = guarded([&] { return cmd_gradcheck(ga); }); });

    CompareArgs ca;
    auto* cmp = app.add_subcommand("compare-optimizers", "run direct registration with each optimizer on phantoms");
    cmp->add_option("--config", ca.config, "JSON comparison spec");
    cmp->add_option("--out", ca.out, "output directory")->required();
    cmp->add_option("--seed", ca.seed, "first phantom seed");
    cmp->add_option("--iterations", ca.iterations, "iteration count override")->check(CLI::PositiveNumber);
    cmp->callback([&] { rc = guarded([&] { return cmd_compare(ca); }); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    return rc;
}
