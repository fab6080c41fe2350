#pragma once

#include <string>

#include <json.hpp>

#include "accosim/protocols.hpp"

namespace accosim {

// floats rendered with 17 significant digits, decimal point, LF endings
std::string format_g17(double v);

std::string metrics_header(int n_workers);
std::string metrics_csv(const RunTrace& trace, int n_workers);
std::string timeline_csv(const Timeline& timeline);

struct RunPaths {
    std::string metrics;
    std::string timeline;
    std::string manifest;
};

// Writes metrics.csv, timeline.csv and manifest.json under out_dir; the
// manifest echoes the full config so the run can be reproduced bit-exactly.
RunPaths write_run_outputs(const std::string& out_dir, const nlohmann::json& config,
                           const RunTrace& trace, int n_workers);

}  // namespace accosim
