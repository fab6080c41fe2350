#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "accosim/optim.hpp"
#include "accosim/problems.hpp"
#include "accosim/protocols.hpp"

namespace accosim {

// Experiment description parsed from a JSON config file. Field names follow
// the external interface: method_name, n_workers, batch_size,
// n_grad_accumulation, warmup_rounds, learning_rate, weight_decay,
// adam_beta1, adam_beta2, scheduler, n_warmup_steps, alpha_s,
// beta_s_per_byte, topology_factor, compute_s_per_microbatch,
// worker_multipliers.
struct ExperimentConfig {
    Problem problem;
    Method method = Method::ddp;
    OptimizerConfig optimizer;
    SimConfig sim;
    int t_updates = 1;
    std::string output_dir;

    nlohmann::json raw;  // validated input, echoed into the manifest
};

// Throws std::invalid_argument on any validation failure.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// FNV-1a over the canonical serialization; stable across runs.
std::string config_hash(const nlohmann::json& j);

}  // namespace accosim
