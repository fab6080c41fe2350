#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "accosim/shard.hpp"

namespace accosim {

class Fabric;  // collectives.hpp

enum class OptKind { sgd, adam, adamw };
enum class LrSchedule { constant, cosine };

std::string to_string(OptKind k);
OptKind opt_kind_from(const std::string& s);

struct OptimizerConfig {
    OptKind kind = OptKind::sgd;
    double learning_rate = 0.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    LrSchedule scheduler = LrSchedule::constant;
    int n_warmup_steps = 0;
    long long total_steps = 0;      // for the cosine phase; 0 = unbounded
    double cosine_min_factor = 0.0; // floor = factor * learning_rate
};

// Moment state covering one contiguous slice [lo, hi) of the parameters.
struct OptimizerState {
    long long step = 0;
    std::vector<double> m;
    std::vector<double> v;  // unused for sgd
    std::size_t lo = 0, hi = 0;

    static OptimizerState for_range(const OptimizerConfig& cfg, std::size_t lo,
                                    std::size_t hi);
};

// Learning rate at committed-update index t: linear warmup, then constant
// or cosine decay reaching the floor at the final step.
double scheduled_lr(const OptimizerConfig& cfg, long long t);

// One deterministic optimizer transition on a parameter slice.
// sgd:   theta' = theta - lr * (g + wd*theta)
// adam:  bias-corrected moments on g + wd*theta
// adamw: bias-corrected moments on g, decoupled decay lr*wd*theta
std::pair<OptimizerState, std::vector<double>> opt_step(
    OptimizerState state, std::span<const double> theta_slice,
    std::span<const double> grad_slice, const OptimizerConfig& cfg);

// Each worker steps its own shard with its own state; the updated full
// vector is reassembled with an all-gather on the fabric.
std::vector<double> sharded_opt_step(std::vector<OptimizerState>& states,
                                     std::span<const double> theta,
                                     const std::vector<std::vector<double>>& grad_shards,
                                     const OptimizerConfig& cfg,
                                     const ShardLayout& layout,
                                     const Fabric& fabric);

}  // namespace accosim
