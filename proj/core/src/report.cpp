#include "driftreg/report.hpp"

#include <json.hpp>

namespace driftreg {

using nlohmann::json;

std::string result_json(const RegistrationResult& r, const RunConfig& config) {
    json trace = json::array();
    for (const LossValue& l : r.loss_trace) {
        json terms = json::object();
        for (const auto& [name, t] : l.terms) terms[name] = t.value;
        trace.push_back({{"total", l.total}, {"terms", std::move(terms)}});
    }
    json metrics = json::object();
    for (const auto& [k, v] : r.metric_report) metrics[k] = v;
    const json j = {{"config", json::parse(run_config_json(config))},
                    {"loss_trace", std::move(trace)},
                    {"metrics", std::move(metrics)},
                    {"fields", r.u_fm ? json{"dvf_mf", "dvf_fm"} : json{"dvf_mf"}},
                    {"timings", {{"elapsed_s", r.elapsed}}}};
    return j.dump(2);
}

std::string metric_report_json(const MetricReport& m) {
    json values = json::object();
    for (const auto& [k, v] : m.values) values[k] = v;
    json per_class = json::object();
    for (const auto& [c, v] : m.dice_per_class) per_class[std::to_string(c)] = v;
    json counts = json::object();
    for (const auto& [k, v] : m.counts) counts[k] = v;
    const json j = {{"values", std::move(values)},
                    {"dice_per_class", std::move(per_class)},
                    {"counts", std::move(counts)},
                    {"notes", m.notes}};
    return j.dump(2);
}

}  // namespace driftreg
