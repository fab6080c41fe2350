#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "accosim/collectives.hpp"
#include "accosim/optim.hpp"
#include "accosim/problems.hpp"
#include "accosim/simclock.hpp"

namespace accosim {

enum class Method { ddp, dpu, wp, acco };

std::string to_string(Method m);
Method method_from(const std::string& s);

struct HeterogeneityProfile {
    double seconds_per_microbatch = 1.0;
    std::vector<double> multipliers;  // empty = homogeneous

    double worker_seconds(int w) const {
        double m = multipliers.empty() ? 1.0 : multipliers[static_cast<std::size_t>(w)];
        return seconds_per_microbatch * m;
    }
};

struct SimConfig {
    int n_workers = 1;
    int batch_size = 1;
    int n_grad_accumulation = 1;  // micro-batches per worker per round (ddp/dpu/wp)
    int warmup_rounds = 0;        // dpu: leading rounds run with ddp semantics
    bool full_batch_gradients = false;
    CostModel cost;
    HeterogeneityProfile hetero;
    std::uint64_t master_seed = 1;
};

// One committed parameter update.
struct RoundRecord {
    int update = 0;
    double time_s = 0.0;
    double loss = 0.0;              // deterministic f(theta)
    double grad_sq = 0.0;           // ||grad f(theta)||^2
    double grad_sq_estimate = 0.0;  // ||grad f(theta_estimate)||^2
    double lyapunov = 0.0;          // NaN when the optimum is unknown
    long long samples_cum = 0;
    std::vector<int> micro_batches;     // consumed per worker by this update
    std::vector<int> mb_main;           // committed-half split (acco)
    std::vector<int> mb_estimate;
    std::vector<double> idle_frac;      // compute-stream idle per worker this window
};

// Per-worker contribution consumed by one update (for conservation checks).
struct ConsumedBundle {
    std::vector<double> grad_sum;  // sum over micro-batches of N * mean-grad
    long long samples = 0;
};

struct RunTrace {
    std::vector<RoundRecord> records;
    Timeline timeline;
    bool diverged = false;

    std::vector<std::vector<double>> theta_history;     // [0] = theta0
    std::vector<std::vector<double>> estimate_history;  // aligned with theta_history

    long long issued_micro_batches = 0;
    long long consumed_micro_batches = 0;
    long long discarded_micro_batches = 0;

    // filled when RunOptions::record_details is set
    std::vector<std::vector<double>> consumed_mean_grad;          // per update
    std::vector<std::vector<ConsumedBundle>> consumed_bundles;    // per update, per worker
};

struct RunOptions {
    std::vector<double> theta0;   // empty = seeded default
    bool record_details = false;
    double lyapunov_eta = -1.0;   // <= 0: use peak learning rate
};

// Weighted mean (sum_i N_i g_i) / (sum_i N_i) of per-sample mean gradients.
std::vector<double> weighted_average(const std::vector<GradResult>& bundles);

// Execute t_updates committed parameter updates of the chosen protocol on
// the simulated fabric. Deterministic given the master seed.
RunTrace run_protocol(Method method, const Problem& problem, OptimizerConfig opt_cfg,
                      const SimConfig& sim, int t_updates, const RunOptions& opts = {});

}  // namespace accosim
