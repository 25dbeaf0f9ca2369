#include "driftreg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "driftreg/error.hpp"

namespace driftreg {

using nlohmann::json;

optim::Config default_optimizer(optim::Kind kind) {
    optim::Config c;
    c.kind = kind;
    switch (kind) {
        case optim::Kind::sgd:
            c.lr = 2000.0;
            c.momentum = 0.9;
            break;
        case optim::Kind::rmsprop: c.lr = 0.01; break;
        case optim::Kind::adam: c.lr = 0.01; break;
        case optim::Kind::adamw: c.lr = 0.01; break;
    }
    return c;
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw ConfigError("config", where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) bad(where, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.count(key)) bad(where, "unknown key '" + key + "'");
}

std::string join(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

double get_number(const json& j, const std::string& where, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) bad(join(where, key), "expected a number");
    return v.get<double>();
}

long long get_integer(const json& j, const std::string& where, const char* key, long long fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) bad(join(where, key), "expected an integer");
    return v.get<long long>();
}

std::uint64_t get_seed(const json& j, const std::string& where, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return std::uint64_t(v.get<long long>());
    bad(join(where, key), "expected a nonnegative integer");
}

bool get_bool(const json& j, const std::string& where, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) bad(join(where, key), "expected true or false");
    return v.get<bool>();
}

std::string get_string(const json& j, const std::string& where, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) bad(join(where, key), "expected a string");
    return v.get<std::string>();
}

json parse(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("malformed JSON: ") + e.what());
    }
}

// Re-throws validation failures of the resolved values as config errors so
// callers see one error kind for a bad document.
template <class Fn>
void checked(Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        throw ConfigError("config", e.what());
    }
}

optim::Config parse_optimizer(const json& j, const std::string& where) {
    only_keys(j, where, {"kind", "lr", "momentum", "rho", "beta1", "beta2", "eps", "weight_decay"});
    optim::Kind kind = optim::Kind::rmsprop;
    checked([&] { kind = optim::kind_from_string(get_string(j, where, "kind", "rmsprop")); });
    optim::Config c = default_optimizer(kind);
    c.lr = get_number(j, where, "lr", c.lr);
    c.momentum = get_number(j, where, "momentum", c.momentum);
    c.rho = get_number(j, where, "rho", c.rho);
    c.beta1 = get_number(j, where, "beta1", c.beta1);
    c.beta2 = get_number(j, where, "beta2", c.beta2);
    c.eps = get_number(j, where, "eps", c.eps);
    c.weight_decay = get_number(j, where, "weight_decay", c.weight_decay);
    checked([&] { c.validate(); });
    return c;
}

json optimizer_json(const optim::Config& c) {
    return {{"kind", optim::to_string(c.kind)}, {"lr", c.lr},       {"momentum", c.momentum},
            {"rho", c.rho},                     {"beta1", c.beta1}, {"beta2", c.beta2},
            {"eps", c.eps},                     {"weight_decay", c.weight_decay}};
}

LossWeights parse_weights(const json& j, const std::string& where, LossWeights w) {
    only_keys(j, where, {"alpha", "alpha_d", "beta", "beta_d", "lambda"});
    w.alpha = get_number(j, where, "alpha", w.alpha);
    w.alpha_d = get_number(j, where, "alpha_d", w.alpha_d);
    w.beta = get_number(j, where, "beta", w.beta);
    w.beta_d = get_number(j, where, "beta_d", w.beta_d);
    w.lambda = get_number(j, where, "lambda", w.lambda);
    return w;
}

json weights_json(const LossWeights& w) {
    return {{"alpha", w.alpha}, {"alpha_d", w.alpha_d}, {"beta", w.beta}, {"beta_d", w.beta_d}, {"lambda", w.lambda}};
}

std::optional<std::filesystem::path> get_path(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    return std::filesystem::path(get_string(j, "", key, ""));
}

PhantomSpec phantom_from(const json& j, const std::string& where) {
    only_keys(j, where, {"size", "seed", "kind", "max_displacement", "bump_count", "shift"});
    PhantomSpec s;
    const long long size = get_integer(j, where, "size", (long long)s.size);
    if (size < 0) bad(join(where, "size"), "must be positive");
    s.size = std::size_t(size);
    s.seed = get_seed(j, where, "seed", s.seed);
    checked([&] { s.kind = deformation_kind_from_string(get_string(j, where, "kind", to_string(s.kind))); });
    s.max_displacement = get_number(j, where, "max_displacement", s.max_displacement);
    s.bump_count = int(get_integer(j, where, "bump_count", s.bump_count));
    if (j.contains("shift")) {
        const json& v = j.at("shift");
        if (!v.is_array() || v.size() != 3) bad(join(where, "shift"), "expected [x, y, z]");
        for (std::size_t k = 0; k < 3; ++k) {
            if (!v[k].is_number()) bad(join(where, "shift"), "expected numbers");
            s.shift[k] = v[k].get<double>();
        }
    }
    checked([&] { s.validate(); });
    return s;
}

json phantom_json(const PhantomSpec& s) {
    return {{"size", s.size},
            {"seed", s.seed},
            {"kind", to_string(s.kind)},
            {"max_displacement", s.max_displacement},
            {"bump_count", s.bump_count},
            {"shift", {s.shift[0], s.shift[1], s.shift[2]}}};
}

}  // namespace

RunConfig default_run_config(Mode mode) {
    RunConfig c;
    c.mode = mode;
    c.registration.optimizer = default_optimizer(optim::Kind::rmsprop);
    if (mode == Mode::direct) {
        c.registration.weights = LossWeights::direct_defaults(c.registration.similarity.kind);
        c.registration.flags = {};
    } else {
        c.registration.weights = LossWeights::micdir_defaults();
        c.registration.flags = {true, true, true};
    }
    return c;
}

RunConfig parse_run_config(std::string_view text) {
    const json j = parse(text);
    only_keys(j, "", {"mode", "similarity", "nmi_bins", "ncc_window", "weights", "optimizer", "iterations", "flags",
                      "seed", "scg", "fixed", "moving", "out"});
    const std::string mode = get_string(j, "", "mode", "micdir");
    if (mode != "micdir" && mode != "direct") bad("mode", "expected 'micdir' or 'direct', got '" + mode + "'");
    RunConfig c = default_run_config(mode == "direct" ? Mode::direct : Mode::micdir);
    RegistrationConfig& r = c.registration;

    checked([&] { r.similarity.kind = similarity_from_string(get_string(j, "", "similarity", "ncc")); });
    r.similarity.nmi_bins = int(get_integer(j, "", "nmi_bins", r.similarity.nmi_bins));
    r.similarity.ncc_window = int(get_integer(j, "", "ncc_window", r.similarity.ncc_window));

    const LossWeights base =
        c.mode == Mode::direct ? LossWeights::direct_defaults(r.similarity.kind) : LossWeights::micdir_defaults();
    r.weights = j.contains("weights") ? parse_weights(j.at("weights"), "weights", base) : base;
    if (j.contains("optimizer")) r.optimizer = parse_optimizer(j.at("optimizer"), "optimizer");
    r.iterations = int(get_integer(j, "", "iterations", r.iterations));
    if (j.contains("flags")) {
        const json& f = j.at("flags");
        only_keys(f, "flags", {"mss", "ic", "scg"});
        r.flags.mss = get_bool(f, "flags", "mss", r.flags.mss);
        r.flags.ic = get_bool(f, "flags", "ic", r.flags.ic);
        r.flags.scg = get_bool(f, "flags", "scg", r.flags.scg);
    }
    if (c.mode == Mode::direct && (r.flags.mss || r.flags.ic || r.flags.scg))
        bad("flags", "direct mode takes no mss/ic/scg flags");
    r.seed = get_seed(j, "", "seed", r.seed);
    if (j.contains("scg")) {
        const json& s = j.at("scg");
        only_keys(s, "scg", {"pool", "channels"});
        if (s.contains("pool")) {
            const json& p = s.at("pool");
            if (!p.is_array() || p.size() != 3) bad("scg.pool", "expected [x, y, z]");
            for (const auto& v : p)
                if (!v.is_number_integer() || v.get<long long>() < 1) bad("scg.pool", "expected positive integers");
            r.scg.pool = {p[0].get<std::size_t>(), p[1].get<std::size_t>(), p[2].get<std::size_t>()};
        }
        const long long ch = get_integer(s, "scg", "channels", (long long)r.scg.channels);
        if (ch < 1) bad("scg.channels", "must be positive");
        r.scg.channels = std::size_t(ch);
    }
    c.fixed = get_path(j, "fixed");
    c.moving = get_path(j, "moving");
    c.out = get_path(j, "out");
    checked([&] { r.validate(); });
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_text_file(path)); }

std::string run_config_json(const RunConfig& c) {
    const RegistrationConfig& r = c.registration;
    json j = {{"mode", c.mode == Mode::direct ? "direct" : "micdir"},
              {"similarity", to_string(r.similarity.kind)},
              {"nmi_bins", r.similarity.nmi_bins},
              {"ncc_window", r.similarity.ncc_window},
              {"weights", weights_json(r.weights)},
              {"optimizer", optimizer_json(r.optimizer)},
              {"iterations", r.iterations},
              {"flags", {{"mss", r.flags.mss}, {"ic", r.flags.ic}, {"scg", r.flags.scg}}},
              {"seed", r.seed},
              {"scg", {{"pool", {r.scg.pool.x, r.scg.pool.y, r.scg.pool.z}}, {"channels", r.scg.channels}}}};
    if (c.fixed) j["fixed"] = c.fixed->string();
    if (c.moving) j["moving"] = c.moving->string();
    if (c.out) j["out"] = c.out->string();
    return j.dump(2);
}

PhantomSpec parse_phantom_spec(std::string_view text) { return phantom_from(parse(text), "phantom"); }

std::string phantom_spec_json(const PhantomSpec& spec) { return phantom_json(spec).dump(2); }

CompareConfig default_compare_config() {
    CompareConfig c;
    for (auto k : {optim::Kind::sgd, optim::Kind::rmsprop, optim::Kind::adam, optim::Kind::adamw})
        c.optimizers.push_back(default_optimizer(k));
    return c;
}

CompareConfig parse_compare_config(std::string_view text) {
    const json j = parse(text);
    only_keys(j, "", {"phantom", "seeds", "first_seed", "iterations", "similarity", "nmi_bins", "ncc_window",
                      "weights", "optimizers"});
    CompareConfig c = default_compare_config();
    if (j.contains("phantom")) c.phantom = phantom_from(j.at("phantom"), "phantom");
    c.seeds = int(get_integer(j, "", "seeds", c.seeds));
    if (c.seeds < 1) bad("seeds", "must be >= 1");
    c.first_seed = get_seed(j, "", "first_seed", c.first_seed);
    c.iterations = int(get_integer(j, "", "iterations", c.iterations));
    if (c.iterations < 1) bad("iterations", "must be >= 1");
    checked([&] { c.similarity.kind = similarity_from_string(get_string(j, "", "similarity", "ncc")); });
    c.similarity.nmi_bins = int(get_integer(j, "", "nmi_bins", c.similarity.nmi_bins));
    c.similarity.ncc_window = int(get_integer(j, "", "ncc_window", c.similarity.ncc_window));
    c.weights = LossWeights::direct_defaults(c.similarity.kind);
    if (j.contains("weights")) c.weights = parse_weights(j.at("weights"), "weights", c.weights);
    if (j.contains("optimizers")) {
        const json& list = j.at("optimizers");
        if (!list.is_array() || list.empty()) bad("optimizers", "expected a non-empty array");
        c.optimizers.clear();
        for (std::size_t i = 0; i < list.size(); ++i)
            c.optimizers.push_back(parse_optimizer(list[i], "optimizers[" + std::to_string(i) + "]"));
    }
    return c;
}

std::string compare_config_json(const CompareConfig& c) {
    json opts = json::array();
    for (const auto& o : c.optimizers) opts.push_back(optimizer_json(o));
    const json j = {{"phantom", phantom_json(c.phantom)},
                    {"seeds", c.seeds},
                    {"first_seed", c.first_seed},
                    {"iterations", c.iterations},
                    {"similarity", to_string(c.similarity.kind)},
                    {"nmi_bins", c.similarity.nmi_bins},
                    {"ncc_window", c.similarity.ncc_window},
                    {"weights", weights_json(c.weights)},
                    {"optimizers", opts}};
    return j.dump(2);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("config", "read failed for " + path.string());
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("config", "cannot create " + path.string());
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) throw IoError("config", "write failed for " + path.string());
}

}  // namespace driftreg
