#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace accosim {

enum class ProblemKind { quadratic, logistic, mlp };

std::string to_string(ProblemKind k);
ProblemKind problem_kind_from(const std::string& s);

// Deterministic descriptor of one stochastic draw: the stream key fully
// determines the noise / sampled indices, so identical (problem, theta,
// batch) calls give bitwise-identical results.
struct MicroBatch {
    std::uint64_t stream = 0;
    int size = 1;
    bool full_batch = false;
};

struct GradResult {
    std::vector<double> gradient;  // per-sample mean gradient
    long long sample_count = 0;
    double loss_value = 0.0;
};

struct Dataset {
    int n = 0;
    int dim_x = 0;
    std::vector<double> x;  // row-major, n * dim_x
    std::vector<double> y;  // n targets (labels in {-1,+1} for logistic)
};

struct MlpShape {
    int n_in = 0;
    int hidden = 0;
    // weights (hidden x n_in), hidden biases, output weights, output bias
    int param_count() const { return hidden * (n_in + 2) + 1; }
};

// A desk-scale differentiable objective with a known smoothness constant
// and, where the problem allows it, an exact minimizer and optimum.
struct Problem {
    ProblemKind kind = ProblemKind::quadratic;
    int dim = 0;
    double smoothness = 0.0;   // exact for quadratic/logistic, estimate for mlp
    double noise_sigma = 0.0;  // per-coordinate additive-noise std (quadratic only)

    std::optional<std::vector<double>> minimizer;
    std::optional<double> optimum;

    // quadratic: f(theta) = 0.5 theta'A theta - b'theta
    std::vector<double> a;  // dim*dim, row-major, symmetric
    std::vector<double> b;

    Dataset data;   // logistic / mlp
    MlpShape mlp;

    // total gradient-noise variance E||g - grad f||^2 of a single draw;
    // dim * sigma^2 for quadratics, 0 for deterministic problems
    double noise_variance_total() const;
};

// Quadratic with a seeded random orthogonal eigenbasis and eigenvalues
// spread over [mu, l_smooth]; the largest eigenvalue is exactly l_smooth.
Problem make_quadratic(std::uint64_t seed, int dim, double mu, double l_smooth,
                       double noise_sigma);

// f(theta) = (l/2) ||theta||^2: minimizer 0, optimum 0, smoothness exactly l.
Problem make_identity_quadratic(int dim, double l = 1.0, double noise_sigma = 0.0);

// Binary logistic regression on a seeded synthetic dataset.
Problem make_logistic(std::uint64_t seed, int n_samples, int n_features);
Problem make_logistic_from(Dataset data);

// One-hidden-layer tanh regressor (MSE), manual backprop, seeded teacher data.
Problem make_mlp(std::uint64_t seed, int n_in, int hidden, int n_samples,
                 double label_noise);

// Exact f(theta) and its deterministic full gradient.
std::pair<double, std::vector<double>> value_and_grad(const Problem& p,
                                                      std::span<const double> theta);

// Unbiased stochastic gradient: additive seeded Gaussian noise for
// quadratics, mean gradient over a sampled subset for dataset problems.
GradResult stochastic_grad(const Problem& p, std::span<const double> theta,
                           const MicroBatch& batch);

// Max over coordinates of the relative error between the analytic gradient
// and a central finite difference of f.
double finite_diff_check(const Problem& p, std::span<const double> theta, double eps);

// Seeded default iterate for experiment runs.
std::vector<double> default_theta0(const Problem& p, std::uint64_t seed);

}  // namespace accosim
