#include "accosim/convergence.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "accosim/rng.hpp"
#include "accosim/vecmath.hpp"

namespace accosim {

double lyapunov_value(const Problem& p, std::span<const double> theta,
                      std::span<const double> estimate, const LyapunovParams& params) {
    double f_theta = value_and_grad(p, theta).first;
    double f_est = value_and_grad(p, estimate).first;
    return (f_theta - params.f_star) + params.eta * params.l_smooth * (f_est - params.f_star) +
           params.l_smooth * vec::dist_sq(theta, estimate);
}

std::vector<CoupledPoint> run_coupled_gd(const Problem& p, std::vector<double> theta0,
                                         std::vector<double> estimate0, double eta,
                                         int t_steps) {
    std::vector<CoupledPoint> trace;
    trace.reserve(static_cast<std::size_t>(t_steps) + 1);
    trace.push_back({std::move(theta0), std::move(estimate0)});
    for (int t = 0; t < t_steps; ++t) {
        const auto& cur = trace.back();
        auto g_theta = value_and_grad(p, cur.theta).second;
        auto g_est = value_and_grad(p, cur.estimate).second;
        CoupledPoint next;
        next.theta = cur.theta;
        next.estimate = cur.theta;
        for (int j = 0; j < p.dim; ++j) {
            auto ju = static_cast<std::size_t>(j);
            next.theta[ju] -= 0.5 * eta * (g_theta[ju] + g_est[ju]);
            next.estimate[ju] -= eta * g_est[ju];
        }
        trace.push_back(std::move(next));
    }
    return trace;
}

std::vector<CoupledPoint> run_coupled_sgd(const Problem& p, std::vector<double> theta0,
                                          double eta, int t_steps, std::uint64_t seed) {
    std::vector<CoupledPoint> trace;
    trace.reserve(static_cast<std::size_t>(t_steps) + 1);
    trace.push_back({theta0, theta0});
    for (int t = 0; t < t_steps; ++t) {
        const auto& cur = trace.back();
        MicroBatch draw_theta{rng::derive(seed, 0xa1, static_cast<std::uint64_t>(t), 0), 1, false};
        MicroBatch draw_est{rng::derive(seed, 0xa1, static_cast<std::uint64_t>(t), 1), 1, false};
        auto g = stochastic_grad(p, cur.theta, draw_theta).gradient;
        auto g_est = stochastic_grad(p, cur.estimate, draw_est).gradient;
        CoupledPoint next;
        next.theta = cur.theta;
        next.estimate = cur.theta;
        for (int j = 0; j < p.dim; ++j) {
            auto ju = static_cast<std::size_t>(j);
            next.theta[ju] -= 0.5 * eta * (g[ju] + g_est[ju]);
            next.estimate[ju] -= eta * g_est[ju];
        }
        trace.push_back(std::move(next));
    }
    return trace;
}

DescentReport check_descent(const std::vector<CoupledPoint>& trace, const Problem& p,
                            const LyapunovParams& params, double tol) {
    if (trace.size() < 2) throw std::invalid_argument("check_descent: trace too short");
    DescentReport rep;
    rep.steps = static_cast<int>(trace.size()) - 1;
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
        double v_now = lyapunov_value(p, trace[t].theta, trace[t].estimate, params);
        double v_next = lyapunov_value(p, trace[t + 1].theta, trace[t + 1].estimate, params);
        double g_sq = vec::norm_sq(value_and_grad(p, trace[t].theta).second) +
                      vec::norm_sq(value_and_grad(p, trace[t].estimate).second);
        double lhs = v_next - v_now;
        double rhs = -(params.eta / 8.0) * g_sq;
        rep.worst_margin = std::max(rep.worst_margin, lhs - rhs);
        if (lhs > rhs + tol && rep.first_violation < 0) {
            rep.pass = false;
            rep.first_violation = static_cast<int>(t);
        }
    }
    return rep;
}

namespace {

double avg_grad_sq(const std::vector<CoupledPoint>& trace, const Problem& p, int t_steps) {
    double sum = 0.0;
    for (int t = 0; t < t_steps; ++t) {
        const auto& pt = trace[static_cast<std::size_t>(t)];
        sum += vec::norm_sq(value_and_grad(p, pt.theta).second) +
               vec::norm_sq(value_and_grad(p, pt.estimate).second);
    }
    return sum / static_cast<double>(t_steps);
}

}  // namespace

BoundReport check_gd_bound(const std::vector<CoupledPoint>& trace, const Problem& p,
                           const LyapunovParams& params, int t_steps, double tol) {
    if (static_cast<int>(trace.size()) < t_steps + 1)
        throw std::invalid_argument("check_gd_bound: trace shorter than t_steps");
    if (!p.optimum.has_value()) throw std::invalid_argument("check_gd_bound: optimum unknown");
    BoundReport rep;
    rep.lhs = avg_grad_sq(trace, p, t_steps);
    const auto& start = trace.front();
    double f0 = value_and_grad(p, start.theta).first;
    double f0_est = value_and_grad(p, start.estimate).first;
    rep.rhs = 8.0 / (params.eta * t_steps) *
              (f0 + f0_est - 2.0 * params.f_star +
               params.l_smooth * vec::dist_sq(start.theta, start.estimate));
    rep.slack = tol;
    rep.pass = rep.lhs <= rep.rhs + rep.slack;
    return rep;
}

BoundReport check_sgd_bound(const std::vector<std::vector<CoupledPoint>>& traces,
                            const Problem& p, const LyapunovParams& params, int t_steps,
                            double noise_variance_total) {
    if (traces.size() < 30)
        throw std::invalid_argument("check_sgd_bound: need at least 30 seeds");
    if (!p.optimum.has_value()) throw std::invalid_argument("check_sgd_bound: optimum unknown");

    const std::size_t n_seeds = traces.size();
    std::vector<double> per_seed(n_seeds, 0.0);
    for (std::size_t s = 0; s < n_seeds; ++s) per_seed[s] = avg_grad_sq(traces[s], p, t_steps);

    double mean = 0.0;
    for (double v : per_seed) mean += v;
    mean /= static_cast<double>(n_seeds);
    double var = 0.0;
    for (double v : per_seed) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n_seeds - 1);
    double sem = std::sqrt(var / static_cast<double>(n_seeds));

    BoundReport rep;
    rep.lhs = mean;
    double f0 = value_and_grad(p, traces[0].front().theta).first;
    rep.rhs = 16.0 / (params.eta * t_steps) * (f0 - params.f_star) +
              8.0 * noise_variance_total * params.l_smooth * params.eta;
    rep.slack = 3.0 * sem;
    rep.pass = rep.lhs <= rep.rhs + rep.slack;
    return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(MemoryMethod m) {
    switch (m) {
        case MemoryMethod::ddp: return "ddp";
        case MemoryMethod::zero1: return "zero1";
        case MemoryMethod::zero2: return "zero2";
        case MemoryMethod::zero3: return "zero3";
        case MemoryMethod::slowmo: return "slowmo";
        case MemoryMethod::diloco: return "diloco";
        case MemoryMethod::co2: return "co2";
        case MemoryMethod::dpu: return "dpu";
        case MemoryMethod::wp: return "wp";
        case MemoryMethod::acco: return "acco";
    }
    return "?";
}

MemoryMethod memory_method_from(const std::string& s) {
    if (s == "ddp") return MemoryMethod::ddp;
    if (s == "zero1") return MemoryMethod::zero1;
    if (s == "zero2") return MemoryMethod::zero2;
    if (s == "zero3") return MemoryMethod::zero3;
    if (s == "slowmo") return MemoryMethod::slowmo;
    if (s == "diloco") return MemoryMethod::diloco;
    if (s == "co2") return MemoryMethod::co2;
    if (s == "dpu") return MemoryMethod::dpu;
    if (s == "wp") return MemoryMethod::wp;
    if (s == "acco") return MemoryMethod::acco;
    throw std::invalid_argument("unknown memory-model method: " + s);
}

double memory_model_bytes(MemoryMethod method, double k, double n, double psi) {
    if (!(k > 0.0) || !(n >= 1.0) || !(psi >= 1.0))
        throw std::invalid_argument("memory_model: K > 0, N >= 1, psi >= 1 required");
    // half-precision parameters + gradients cost 2 bytes each; local-update
    // methods add half-precision control copies; delayed-update methods add
    // a communication buffer and shard the optimizer states
    switch (method) {
        case MemoryMethod::ddp: return (2 + 2 + k) * psi;
        case MemoryMethod::zero1: return (2 + 2 + k / n) * psi;
        case MemoryMethod::zero2: return (2 + (2 + k) / n) * psi;
        case MemoryMethod::zero3: return ((2 + 2 + k) / n) * psi;
        case MemoryMethod::slowmo: return (2 + 2 + 2 * 2 + k) * psi;
        case MemoryMethod::diloco: return (2 + 2 + 2 * 2 + k) * psi;
        case MemoryMethod::co2: return (2 + 2 + 4 * 2 + k) * psi;
        case MemoryMethod::dpu:
        case MemoryMethod::wp:
        case MemoryMethod::acco: return (2 + 2 + 2 + k / n) * psi;
    }
    throw std::invalid_argument("memory_model: unknown method");
}

long long memory_reported_gb(double bytes) {
    return static_cast<long long>(std::floor(bytes / 1e9 + 0.25));
}

}  // namespace accosim
