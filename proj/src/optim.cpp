#include "accosim/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "accosim/collectives.hpp"
#include "accosim/vecmath.hpp"

namespace accosim {

std::string to_string(OptKind k) {
    switch (k) {
        case OptKind::sgd: return "sgd";
        case OptKind::adam: return "adam";
        case OptKind::adamw: return "adamw";
    }
    return "?";
}

OptKind opt_kind_from(const std::string& s) {
    if (s == "sgd") return OptKind::sgd;
    if (s == "adam") return OptKind::adam;
    if (s == "adamw") return OptKind::adamw;
    throw std::invalid_argument("unknown optimizer kind: " + s);
}

OptimizerState OptimizerState::for_range(const OptimizerConfig& cfg, std::size_t lo,
                                         std::size_t hi) {
    OptimizerState st;
    st.lo = lo;
    st.hi = hi;
    st.m.assign(hi - lo, 0.0);
    if (cfg.kind != OptKind::sgd) st.v.assign(hi - lo, 0.0);
    return st;
}

double scheduled_lr(const OptimizerConfig& cfg, long long t) {
    const double peak = cfg.learning_rate;
    const long long warmup = cfg.n_warmup_steps;
    if (t < warmup) return peak * static_cast<double>(t + 1) / static_cast<double>(warmup);
    if (cfg.scheduler == LrSchedule::constant) return peak;
    const double floor = peak * cfg.cosine_min_factor;
    const long long span = cfg.total_steps - 1 - warmup;
    if (span <= 0) return peak;
    double x = static_cast<double>(t - warmup) / static_cast<double>(span);
    if (x > 1.0) x = 1.0;
    return floor + (peak - floor) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * x));
}

std::pair<OptimizerState, std::vector<double>> opt_step(
    OptimizerState state, std::span<const double> theta_slice,
    std::span<const double> grad_slice, const OptimizerConfig& cfg) {
    const std::size_t n = state.hi - state.lo;
    if (theta_slice.size() != n || grad_slice.size() != n)
        throw std::invalid_argument("opt_step: slice length mismatch");
    if (!vec::all_finite(theta_slice) || !vec::all_finite(grad_slice))
        throw std::invalid_argument("opt_step: non-finite input");

    const double lr = scheduled_lr(cfg, state.step);
    state.step += 1;
    std::vector<double> theta(theta_slice.begin(), theta_slice.end());

    switch (cfg.kind) {
        case OptKind::sgd: {
            for (std::size_t j = 0; j < n; ++j) {
                double g = grad_slice[j] + cfg.weight_decay * theta[j];
                theta[j] -= lr * g;
            }
            break;
        }
        case OptKind::adam:
        case OptKind::adamw: {
            const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
            const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
            const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
            const bool decoupled = cfg.kind == OptKind::adamw;
            for (std::size_t j = 0; j < n; ++j) {
                double g = grad_slice[j];
                if (!decoupled) g += cfg.weight_decay * theta[j];
                state.m[j] = b1 * state.m[j] + (1.0 - b1) * g;
                state.v[j] = b2 * state.v[j] + (1.0 - b2) * g * g;
                double m_hat = state.m[j] / corr1;
                double v_hat = state.v[j] / corr2;
                double update = m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
                if (decoupled) update += cfg.weight_decay * theta[j];
                theta[j] -= lr * update;
            }
            break;
        }
    }
    return {std::move(state), std::move(theta)};
}

std::vector<double> sharded_opt_step(std::vector<OptimizerState>& states,
                                     std::span<const double> theta,
                                     const std::vector<std::vector<double>>& grad_shards,
                                     const OptimizerConfig& cfg,
                                     const ShardLayout& layout,
                                     const Fabric& fabric) {
    const int n = layout.n_workers();
    if (static_cast<int>(states.size()) != n ||
        static_cast<int>(grad_shards.size()) != n)
        throw std::invalid_argument("sharded_opt_step: layout/state mismatch");
    if (theta.size() != layout.dim)
        throw std::invalid_argument("sharded_opt_step: theta dimension mismatch");

    std::vector<std::vector<double>> new_shards(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) {
        auto& st = states[static_cast<std::size_t>(w)];
        if (st.lo != layout.lo(w) || st.hi != layout.hi(w))
            throw std::invalid_argument("sharded_opt_step: state covers wrong range");
        std::span<const double> slice = theta.subspan(st.lo, st.hi - st.lo);
        auto [next, updated] = opt_step(std::move(st), slice,
                                        grad_shards[static_cast<std::size_t>(w)], cfg);
        st = std::move(next);
        new_shards[static_cast<std::size_t>(w)] = std::move(updated);
    }
    return fabric.all_gather(new_shards, layout);
}

}  // namespace accosim
