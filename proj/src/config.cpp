#include "accosim/config.hpp"

#include <fstream>
#include <stdexcept>

namespace accosim {

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

template <class T>
T require(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        throw std::invalid_argument(std::string("config: missing key '") + key + "'");
    return j.at(key).get<T>();
}

Problem parse_problem(const nlohmann::json& j) {
    std::string kind = require<std::string>(j, "kind");
    auto seed = get_or<std::uint64_t>(j, "seed", 1);
    switch (problem_kind_from(kind)) {
        case ProblemKind::quadratic: {
            int dim = require<int>(j, "dimension");
            double l = get_or<double>(j, "l_smooth", 1.0);
            double mu = get_or<double>(j, "mu", 0.1 * l);
            double sigma = get_or<double>(j, "noise_sigma", 0.0);
            if (sigma < 0.0) throw std::invalid_argument("config: noise_sigma >= 0");
            return make_quadratic(seed, dim, mu, l, sigma);
        }
        case ProblemKind::logistic: {
            int n = get_or<int>(j, "n_samples", 256);
            int d = get_or<int>(j, "n_features", 8);
            return make_logistic(seed, n, d);
        }
        case ProblemKind::mlp: {
            int n_in = get_or<int>(j, "n_in", 4);
            int hidden = get_or<int>(j, "hidden", 8);
            int n = get_or<int>(j, "n_samples", 256);
            double noise = get_or<double>(j, "label_noise", 0.1);
            return make_mlp(seed, n_in, hidden, n, noise);
        }
    }
    throw std::invalid_argument("config: unknown problem kind");
}

OptimizerConfig parse_optimizer(const nlohmann::json& j) {
    OptimizerConfig cfg;
    cfg.kind = opt_kind_from(require<std::string>(j, "kind"));
    cfg.learning_rate = require<double>(j, "learning_rate");
    cfg.weight_decay = get_or<double>(j, "weight_decay", 0.0);
    cfg.adam_beta1 = get_or<double>(j, "adam_beta1", 0.9);
    cfg.adam_beta2 = get_or<double>(j, "adam_beta2", 0.999);
    cfg.adam_eps = get_or<double>(j, "adam_eps", 1e-8);
    std::string sched = get_or<std::string>(j, "scheduler", "constant");
    if (sched == "constant")
        cfg.scheduler = LrSchedule::constant;
    else if (sched == "cosine")
        cfg.scheduler = LrSchedule::cosine;
    else
        throw std::invalid_argument("config: scheduler must be constant or cosine");
    cfg.n_warmup_steps = get_or<int>(j, "n_warmup_steps", 0);
    cfg.cosine_min_factor = get_or<double>(j, "cosine_min_factor", 0.0);

    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate > 0");
    if (cfg.adam_beta1 < 0.0 || cfg.adam_beta1 >= 1.0 || cfg.adam_beta2 < 0.0 ||
        cfg.adam_beta2 >= 1.0)
        throw std::invalid_argument("config: adam betas must lie in [0, 1)");
    if (cfg.weight_decay < 0.0) throw std::invalid_argument("config: weight_decay >= 0");
    if (cfg.n_warmup_steps < 0) throw std::invalid_argument("config: n_warmup_steps >= 0");
    return cfg;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.problem = parse_problem(require<nlohmann::json>(j, "problem"));
    cfg.method = method_from(require<std::string>(j, "method_name"));
    cfg.optimizer = parse_optimizer(require<nlohmann::json>(j, "optimizer"));

    cfg.sim.n_workers = get_or<int>(j, "n_workers", 1);
    cfg.sim.batch_size = get_or<int>(j, "batch_size", 1);
    cfg.sim.n_grad_accumulation = get_or<int>(j, "n_grad_accumulation", 1);
    cfg.sim.warmup_rounds = get_or<int>(j, "warmup_rounds", 0);
    cfg.sim.full_batch_gradients = get_or<bool>(j, "full_batch_gradients", false);
    cfg.sim.master_seed = get_or<std::uint64_t>(j, "master_seed", 1);

    if (j.contains("cost_model")) {
        const auto& c = j.at("cost_model");
        cfg.sim.cost.alpha_s = get_or<double>(c, "alpha_s", 0.0);
        cfg.sim.cost.beta_s_per_byte = get_or<double>(c, "beta_s_per_byte", 0.0);
        cfg.sim.cost.bytes_per_element = get_or<int>(c, "bytes_per_element", 8);
        cfg.sim.cost.topology_factor = get_or<double>(c, "topology_factor", 1.0);
    }
    if (j.contains("heterogeneity")) {
        const auto& h = j.at("heterogeneity");
        cfg.sim.hetero.seconds_per_microbatch =
            get_or<double>(h, "compute_s_per_microbatch", 1.0);
        cfg.sim.hetero.multipliers =
            get_or<std::vector<double>>(h, "worker_multipliers", {});
    }
    cfg.t_updates = require<int>(j, "t_updates");
    cfg.output_dir = get_or<std::string>(j, "output_dir", "");

    if (cfg.t_updates < 1) throw std::invalid_argument("config: t_updates >= 1");
    if (cfg.sim.n_workers < 1) throw std::invalid_argument("config: n_workers >= 1");
    if (cfg.sim.batch_size < 1) throw std::invalid_argument("config: batch_size >= 1");
    if (cfg.sim.n_grad_accumulation < 1)
        throw std::invalid_argument("config: n_grad_accumulation >= 1");
    if (cfg.sim.warmup_rounds < 0) throw std::invalid_argument("config: warmup_rounds >= 0");
    if (cfg.sim.cost.alpha_s < 0.0 || cfg.sim.cost.beta_s_per_byte < 0.0)
        throw std::invalid_argument("config: cost model parameters >= 0");
    if (cfg.sim.cost.bytes_per_element < 1)
        throw std::invalid_argument("config: bytes_per_element >= 1");
    if (!(cfg.sim.cost.topology_factor > 0.0))
        throw std::invalid_argument("config: topology_factor > 0");
    if (!(cfg.sim.hetero.seconds_per_microbatch > 0.0))
        throw std::invalid_argument("config: compute_s_per_microbatch > 0");
    if (!cfg.sim.hetero.multipliers.empty() &&
        static_cast<int>(cfg.sim.hetero.multipliers.size()) != cfg.sim.n_workers)
        throw std::invalid_argument("config: worker_multipliers length must equal n_workers");
    for (double m : cfg.sim.hetero.multipliers)
        if (!(m > 0.0)) throw std::invalid_argument("config: worker_multipliers > 0");

    cfg.optimizer.total_steps = cfg.t_updates;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

std::string config_hash(const nlohmann::json& j) {
    std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace accosim
