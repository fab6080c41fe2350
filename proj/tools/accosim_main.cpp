// Experiment runner: executes protocol runs, seed sweeps and verification
// suites, and reports the per-replica memory model.
//
//   accosim run    --config cfg.json [--out DIR]
//   accosim sweep  --config cfg.json --seeds 1,2,3 [--out DIR]
//   accosim verify --suite NAME [--out report.json]
//   accosim memory --method acco --k 12 --n 64 --psi 7.5e9
//
// Exit codes: 0 success, 1 verification failure, 2 invalid config/arguments,
// 3 diverged run.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "accosim/config.hpp"
#include "accosim/convergence.hpp"
#include "accosim/csvio.hpp"
#include "accosim/parallel.hpp"
#include "accosim/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

std::string default_out_root() {
    const char* env = std::getenv("ACCOSIM_OUT");
    return env ? env : "out";
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        seeds.push_back(std::stoull(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (seeds.empty()) throw std::invalid_argument("sweep: at least one seed required");
    return seeds;
}

int cmd_run(const std::string& config_path, std::string out_dir) {
    accosim::ExperimentConfig cfg = accosim::load_config(config_path);
    if (out_dir.empty())
        out_dir = !cfg.output_dir.empty()
                      ? cfg.output_dir
                      : default_out_root() + "/run_" + accosim::config_hash(cfg.raw);
    accosim::RunTrace trace = accosim::run_protocol(cfg.method, cfg.problem, cfg.optimizer,
                                                    cfg.sim, cfg.t_updates);
    accosim::RunPaths paths =
        accosim::write_run_outputs(out_dir, cfg.raw, trace, cfg.sim.n_workers);
    std::cout << "wrote " << paths.metrics << ", " << paths.timeline << ", "
              << paths.manifest << "\n";
    if (trace.diverged) {
        std::cerr << "run diverged after " << trace.records.size() << " updates\n";
        return kExitDiverged;
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& seeds_csv,
              std::string out_dir) {
    accosim::ExperimentConfig cfg = accosim::load_config(config_path);
    std::vector<std::uint64_t> seeds = parse_seeds(seeds_csv);
    if (out_dir.empty())
        out_dir = default_out_root() + "/sweep_" + accosim::config_hash(cfg.raw);

    std::vector<accosim::RunTrace> traces(seeds.size());
    bool diverged = false;
    // seed runs are independent; the aggregation below is sequential and
    // order-fixed, so the sweep is deterministic for any thread count
    accosim::par::for_index(seeds.size(), [&](std::size_t s) {
        accosim::SimConfig sim = cfg.sim;
        sim.master_seed = seeds[s];
        traces[s] = accosim::run_protocol(cfg.method, cfg.problem, cfg.optimizer, sim,
                                          cfg.t_updates);
    });
    std::size_t rows = traces[0].records.size();
    for (const auto& tr : traces) {
        if (tr.records.size() != rows)
            throw std::runtime_error("sweep: inconsistent per-seed row counts");
        diverged = diverged || tr.diverged;
    }

    std::string csv = "update,mean_loss,std_loss,n_seeds\n";
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (const auto& tr : traces) mean += tr.records[r].loss;
        mean /= static_cast<double>(traces.size());
        double var = 0.0;
        for (const auto& tr : traces) {
            double d = tr.records[r].loss - mean;
            var += d * d;
        }
        var = traces.size() > 1 ? var / static_cast<double>(traces.size() - 1) : 0.0;
        csv += std::to_string(traces[0].records[r].update) + "," + accosim::format_g17(mean) +
               "," + accosim::format_g17(std::sqrt(var)) + "," + std::to_string(seeds.size()) +
               "\n";
    }
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/sweep.csv", std::ios::binary);
    out << csv;

    nlohmann::json manifest;
    manifest["tool"] = "accosim";
    manifest["version"] = "0.1.0";
    manifest["config"] = cfg.raw;
    manifest["config_hash"] = accosim::config_hash(cfg.raw);
    manifest["seeds"] = seeds;
    manifest["outputs"] = {"sweep.csv"};
    std::ofstream mf(out_dir + "/manifest.json", std::ios::binary);
    mf << manifest.dump(2) << "\n";

    std::cout << "wrote " << out_dir << "/sweep.csv\n";
    return diverged ? kExitDiverged : kExitOk;
}

int cmd_verify(const std::string& suite, const std::string& out_path) {
    accosim::SuiteReport rep = accosim::run_suite(suite);
    std::string text = rep.to_json().dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        out << text;
    }
    return rep.pass() ? kExitOk : kExitVerifyFailed;
}

int cmd_memory(const std::string& method, double k, double n, double psi) {
    accosim::MemoryMethod m = accosim::memory_method_from(method);
    double bytes = accosim::memory_model_bytes(m, k, n, psi);
    nlohmann::json j;
    j["method"] = method;
    j["k"] = k;
    j["n"] = n;
    j["psi"] = psi;
    j["bytes"] = bytes;
    j["gb"] = accosim::memory_reported_gb(bytes);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"accosim: overlapped data-parallel training protocol simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds_csv, suite, mem_method;
    double mem_k = 12.0, mem_n = 64.0, mem_psi = 7.5e9;
    bool serial = false;
    app.add_flag("--serial", serial, "disable OpenMP parallel kernels");

    CLI::App* run = app.add_subcommand("run", "execute one protocol run");
    run->add_option("--config", config_path, "config JSON path")->required();
    run->add_option("--out", out_dir, "output directory");

    CLI::App* sweep = app.add_subcommand("sweep", "aggregate runs across seeds");
    sweep->add_option("--config", config_path, "config JSON path")->required();
    sweep->add_option("--seeds", seeds_csv, "comma-separated master seeds")->required();
    sweep->add_option("--out", out_dir, "output directory");

    CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("--suite", suite, "suite name")->required();
    verify->add_option("--out", out_dir, "write the JSON report here too");

    CLI::App* memory = app.add_subcommand("memory", "per-replica memory model");
    memory->add_option("--method", mem_method, "ddp|zero1|zero2|zero3|slowmo|diloco|co2|dpu|wp|acco")
        ->required();
    memory->add_option("--k", mem_k, "optimizer memory multiplier");
    memory->add_option("--n", mem_n, "worker count");
    memory->add_option("--psi", mem_psi, "parameter count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    accosim::par::set_enabled(!serial);
    try {
        if (run->parsed()) return cmd_run(config_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, seeds_csv, out_dir);
        if (verify->parsed()) return cmd_verify(suite, out_dir);
        if (memory->parsed()) return cmd_memory(mem_method, mem_k, mem_n, mem_psi);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
