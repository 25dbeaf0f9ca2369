#pragma once

#include <string>

#include "driftreg/config.hpp"
#include "driftreg/metrics.hpp"
#include "driftreg/registration.hpp"

namespace driftreg {

// result.json: {"config", "loss_trace": [{"total", "terms": {name: value}}],
// "metrics", "timings": {"elapsed_s"}}. Everything outside "timings" is a
// pure function of the inputs and config.
std::string result_json(const RegistrationResult& result, const RunConfig& config);

// {"values": {...}, "dice_per_class": {"0": ...}, "counts": {...}, "notes": [...]}
std::string metric_report_json(const MetricReport& report);

}  // namespace driftreg
