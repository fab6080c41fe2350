#include "accosim/csvio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "accosim/config.hpp"

namespace accosim {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string metrics_header(int n_workers) {
    std::string h = "update,time_s,samples,loss,grad_norm_sq,lyapunov";
    for (int w = 0; w < n_workers; ++w) h += ",idle_frac_w" + std::to_string(w);
    h += "\n";
    return h;
}

std::string metrics_csv(const RunTrace& trace, int n_workers) {
    std::string out = metrics_header(n_workers);
    for (const RoundRecord& r : trace.records) {
        out += std::to_string(r.update);
        out += ',';
        out += format_g17(r.time_s);
        out += ',';
        out += std::to_string(r.samples_cum);
        out += ',';
        out += format_g17(r.loss);
        out += ',';
        out += format_g17(r.grad_sq);
        out += ',';
        out += format_g17(r.lyapunov);
        for (int w = 0; w < n_workers; ++w) {
            out += ',';
            out += format_g17(r.idle_frac[static_cast<std::size_t>(w)]);
        }
        out += '\n';
    }
    return out;
}

std::string timeline_csv(const Timeline& timeline) {
    std::string out = "worker_id,stream,event_kind,t_start,t_end,micro_batches,bytes\n";
    for (const Interval& iv : timeline.intervals) {
        out += std::to_string(iv.worker);
        out += ',';
        out += to_string(iv.stream);
        out += ',';
        out += iv.kind;
        out += ',';
        out += format_g17(iv.t_start);
        out += ',';
        out += format_g17(iv.t_end);
        out += ',';
        out += std::to_string(iv.micro_batches);
        out += ',';
        out += std::to_string(iv.bytes);
        out += '\n';
    }
    return out;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

}  // namespace

RunPaths write_run_outputs(const std::string& out_dir, const nlohmann::json& config,
                           const RunTrace& trace, int n_workers) {
    std::filesystem::create_directories(out_dir);
    RunPaths paths;
    paths.metrics = out_dir + "/metrics.csv";
    paths.timeline = out_dir + "/timeline.csv";
    paths.manifest = out_dir + "/manifest.json";

    write_file(paths.metrics, metrics_csv(trace, n_workers));
    write_file(paths.timeline, timeline_csv(trace.timeline));

    nlohmann::json manifest;
    manifest["tool"] = "accosim";
    manifest["version"] = "0.1.0";
    manifest["config"] = config;
    manifest["config_hash"] = config_hash(config);
    manifest["master_seed"] =
        config.contains("master_seed") ? config.at("master_seed") : nlohmann::json(1);
    manifest["diverged"] = trace.diverged;
    manifest["updates"] = trace.records.size();
    manifest["outputs"] = {"metrics.csv", "timeline.csv"};
    write_file(paths.manifest, manifest.dump(2) + "\n");
    return paths;
}

}  // namespace accosim
