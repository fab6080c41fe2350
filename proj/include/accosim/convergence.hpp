#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "accosim/problems.hpp"

namespace accosim {

struct LyapunovParams {
    double eta = 0.0;
    double l_smooth = 0.0;
    double f_star = 0.0;
};

// V(theta, estimate) = f(theta) - f* + eta*L*(f(estimate) - f*) + L*||theta - estimate||^2
double lyapunov_value(const Problem& p, std::span<const double> theta,
                      std::span<const double> estimate, const LyapunovParams& params);

// One point of the coupled two-sequence dynamics.
struct CoupledPoint {
    std::vector<double> theta;
    std::vector<double> estimate;
};

// Deterministic coupled recursion
//   theta'    = theta - eta/2 (grad f(theta) + grad f(estimate))
//   estimate' = theta - eta    grad f(estimate)
// t_steps transitions; returns t_steps + 1 points.
std::vector<CoupledPoint> run_coupled_gd(const Problem& p, std::vector<double> theta0,
                                         std::vector<double> estimate0, double eta,
                                         int t_steps);

// Stochastic variant: each side uses one independent unbiased draw per step
// (additive per-coordinate noise for quadratics). Starts at theta0 = estimate0.
std::vector<CoupledPoint> run_coupled_sgd(const Problem& p, std::vector<double> theta0,
                                          double eta, int t_steps, std::uint64_t seed);

struct DescentReport {
    bool pass = true;
    int first_violation = -1;
    double worst_margin = 0.0;  // max over steps of lhs - rhs (<= tol when passing)
    int steps = 0;
};

// Per-step potential decrease V_{t+1} - V_t <= -(eta/8)(||grad f(theta_t)||^2
// + ||grad f(estimate_t)||^2), checked with absolute slack tol.
DescentReport check_descent(const std::vector<CoupledPoint>& trace, const Problem& p,
                            const LyapunovParams& params, double tol = 1e-10);

struct BoundReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // allowance added to rhs
    bool pass = false;
};

// Averaged-gradient-norm bound for the deterministic recursion:
// (1/T) sum_t (||grad f(theta_t)||^2 + ||grad f(est_t)||^2)
//   <= (8/(eta T)) (f(theta0) + f(est0) - 2 f* + L ||theta0 - est0||^2)
BoundReport check_gd_bound(const std::vector<CoupledPoint>& trace, const Problem& p,
                           const LyapunovParams& params, int t_steps, double tol = 1e-10);

// Stochastic version, Monte-Carlo over seeds:
// mean over seeds of the per-seed average <= (16/(eta T))(f(theta0) - f*)
//   + 8 sigma^2 L eta + 3 standard errors,
// where sigma^2 is the total gradient-noise variance of one draw.
BoundReport check_sgd_bound(const std::vector<std::vector<CoupledPoint>>& traces,
                            const Problem& p, const LyapunovParams& params, int t_steps,
                            double noise_variance_total);

// ---------------------------------------------------------------------------
// per-replica memory model

enum class MemoryMethod { ddp, zero1, zero2, zero3, slowmo, diloco, co2, dpu, wp, acco };

std::string to_string(MemoryMethod m);
MemoryMethod memory_method_from(const std::string& s);

// Bytes per replica with parameters/gradients in half precision (2 bytes),
// an optimizer memory multiplier K, N workers and psi parameters.
double memory_model_bytes(MemoryMethod method, double k, double n, double psi);

// Integer GB (1 GB = 1e9 bytes) as reported in published configurations:
// floor, with fractions of at least 3/4 rounded up.
long long memory_reported_gb(double bytes);

}  // namespace accosim
