#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "accosim/config.hpp"
#include "accosim/csvio.hpp"
#include "accosim/rng.hpp"

using namespace accosim;

namespace {

nlohmann::json valid_config() {
    return nlohmann::json{
        {"problem", {{"kind", "quadratic"}, {"dimension", 4}, {"l_smooth", 1.0},
                     {"mu", 0.2}, {"noise_sigma", 0.1}, {"seed", 5}}},
        {"method_name", "acco"},
        {"optimizer",
         {{"kind", "adamw"}, {"learning_rate", 0.01}, {"weight_decay", 0.1},
          {"adam_beta1", 0.9}, {"adam_beta2", 0.95}, {"scheduler", "cosine"},
          {"n_warmup_steps", 2}}},
        {"n_workers", 2},
        {"batch_size", 3},
        {"n_grad_accumulation", 1},
        {"warmup_rounds", 0},
        {"t_updates", 5},
        {"cost_model", {{"alpha_s", 0.1}, {"beta_s_per_byte", 1e-9}}},
        {"heterogeneity",
         {{"compute_s_per_microbatch", 1.0}, {"worker_multipliers", {1.0, 2.0}}}},
        {"master_seed", 11},
    };
}

std::string temp_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() /
               (std::string("accosim_test_") + tag + "_" + std::to_string(std::rand()));
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("format_g17 round-trips doubles") {
    rng::Stream gen(1);
    for (int rep = 0; rep < 200; ++rep) {
        double v = gen.gaussian() * std::pow(10.0, static_cast<double>(gen.below(20)) - 10.0);
        double back = std::strtod(format_g17(v).c_str(), nullptr);
        CHECK(back == v);
    }
}

TEST_CASE("metrics csv schema is stable") {
    CHECK(metrics_header(2) ==
          "update,time_s,samples,loss,grad_norm_sq,lyapunov,idle_frac_w0,idle_frac_w1\n");
    CHECK(metrics_header(1) == "update,time_s,samples,loss,grad_norm_sq,lyapunov,idle_frac_w0\n");
}

TEST_CASE("timeline csv schema is stable") {
    Timeline tl;
    tl.intervals.push_back({0, StreamKind::compute, "microbatch", 0.0, 1.0, 1, 0});
    std::string csv = timeline_csv(tl);
    CHECK(csv.rfind("worker_id,stream,event_kind,t_start,t_end,micro_batches,bytes\n", 0) == 0);
    CHECK(csv.find("0,compute,microbatch,0,1,1,0\n") != std::string::npos);
    CHECK(csv.find('\r') == std::string::npos);  // LF endings only
}

TEST_CASE("config parses and validates") {
    ExperimentConfig cfg = parse_config(valid_config());
    CHECK(cfg.method == Method::acco);
    CHECK(cfg.problem.dim == 4);
    CHECK(cfg.optimizer.kind == OptKind::adamw);
    CHECK(cfg.optimizer.scheduler == LrSchedule::cosine);
    CHECK(cfg.optimizer.total_steps == 5);
    CHECK(cfg.sim.n_workers == 2);
    CHECK(cfg.sim.hetero.multipliers == std::vector<double>{1.0, 2.0});
    CHECK(cfg.sim.cost.alpha_s == 0.1);
}

TEST_CASE("config rejects malformed input") {
    auto missing = valid_config();
    missing.erase("method_name");
    CHECK_THROWS_AS((void)parse_config(missing), std::invalid_argument);

    auto zero_updates = valid_config();
    zero_updates["t_updates"] = 0;
    CHECK_THROWS_AS((void)parse_config(zero_updates), std::invalid_argument);

    auto bad_sched = valid_config();
    bad_sched["optimizer"]["scheduler"] = "linear";
    CHECK_THROWS_AS((void)parse_config(bad_sched), std::invalid_argument);

    auto bad_mult = valid_config();
    bad_mult["heterogeneity"]["worker_multipliers"] = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS((void)parse_config(bad_mult), std::invalid_argument);

    auto bad_beta = valid_config();
    bad_beta["optimizer"]["adam_beta1"] = 1.0;
    CHECK_THROWS_AS((void)parse_config(bad_beta), std::invalid_argument);

    auto bad_method = valid_config();
    bad_method["method_name"] = "zero-bubble";
    CHECK_THROWS_AS((void)parse_config(bad_method), std::invalid_argument);
}

TEST_CASE("config hash is stable and sensitive") {
    auto a = valid_config();
    auto b = valid_config();
    CHECK(config_hash(a) == config_hash(b));
    b["master_seed"] = 12;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
}

TEST_CASE("run outputs: metrics, timeline and a reproducible manifest") {
    ExperimentConfig cfg = parse_config(valid_config());
    RunTrace trace = run_protocol(cfg.method, cfg.problem, cfg.optimizer, cfg.sim,
                                  cfg.t_updates);
    std::string dir = temp_dir("out");
    RunPaths paths = write_run_outputs(dir, cfg.raw, trace, cfg.sim.n_workers);

    REQUIRE(std::filesystem::exists(paths.metrics));
    REQUIRE(std::filesystem::exists(paths.timeline));
    REQUIRE(std::filesystem::exists(paths.manifest));

    std::ifstream metrics(paths.metrics);
    std::string header;
    std::getline(metrics, header);
    CHECK(header == "update,time_s,samples,loss,grad_norm_sq,lyapunov,idle_frac_w0,idle_frac_w1");
    int rows = 0;
    for (std::string line; std::getline(metrics, line);) ++rows;
    CHECK(rows == static_cast<int>(trace.records.size()));

    std::ifstream mf(paths.manifest);
    nlohmann::json manifest;
    mf >> manifest;
    CHECK(manifest["config"] == cfg.raw);
    CHECK(manifest["config_hash"] == config_hash(cfg.raw));

    // the echoed config reruns to the same trajectory
    ExperimentConfig again = parse_config(manifest["config"]);
    RunTrace rerun = run_protocol(again.method, again.problem, again.optimizer, again.sim,
                                  again.t_updates);
    REQUIRE(rerun.records.size() == trace.records.size());
    for (std::size_t t = 0; t < rerun.records.size(); ++t)
        CHECK(rerun.records[t].loss == trace.records[t].loss);

    std::filesystem::remove_all(dir);
}
