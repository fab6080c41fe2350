#include "accosim/problems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "accosim/parallel.hpp"
#include "accosim/rng.hpp"
#include "accosim/vecmath.hpp"

namespace accosim {

std::string to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::quadratic: return "quadratic";
        case ProblemKind::logistic: return "logistic";
        case ProblemKind::mlp: return "mlp";
    }
    return "?";
}

ProblemKind problem_kind_from(const std::string& s) {
    if (s == "quadratic") return ProblemKind::quadratic;
    if (s == "logistic") return ProblemKind::logistic;
    if (s == "mlp") return ProblemKind::mlp;
    throw std::invalid_argument("unknown problem kind: " + s);
}

double Problem::noise_variance_total() const {
    if (kind == ProblemKind::quadratic) return dim * noise_sigma * noise_sigma;
    return 0.0;
}

namespace {

void check_theta(const Problem& p, std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != p.dim)
        throw std::invalid_argument("theta dimension mismatch");
    if (!vec::all_finite(theta))
        throw std::invalid_argument("theta has non-finite entries");
}

// ---------------------------------------------------------------------------
// quadratic

std::vector<double> matvec(const std::vector<double>& a, int d,
                           std::span<const double> x) {
    std::vector<double> y(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        const double* row = a.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) s += row[j] * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

// M <- (I - 2vv') M (I - 2vv') for a unit vector v
void apply_householder_both_sides(std::vector<double>& m, int d,
                                  const std::vector<double>& v) {
    // left: rows; w = v'M, M -= 2 v w'
    std::vector<double> w(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        const double* row = m.data() + static_cast<std::size_t>(i) * d;
        double vi = v[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] += vi * row[j];
    }
    for (int i = 0; i < d; ++i) {
        double* row = m.data() + static_cast<std::size_t>(i) * d;
        double vi = v[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) row[j] -= 2.0 * vi * w[static_cast<std::size_t>(j)];
    }
    // right: columns; u = Mv, M -= 2 u v'
    std::vector<double> u(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        const double* row = m.data() + static_cast<std::size_t>(i) * d;
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += row[j] * v[static_cast<std::size_t>(j)];
        u[static_cast<std::size_t>(i)] = s;
    }
    for (int i = 0; i < d; ++i) {
        double* row = m.data() + static_cast<std::size_t>(i) * d;
        double ui = u[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) row[j] -= 2.0 * ui * v[static_cast<std::size_t>(j)];
    }
}

// ---------------------------------------------------------------------------
// dataset losses (shared sum kernel)

// per-sample loss + gradient accumulation; the canonical reduction is
// chunked so the parallel and serial paths fold partials in the same order
constexpr int kChunk = 64;

struct SampleEval {
    // evaluates sample k at theta, adds gradient into grad, returns loss
    virtual double eval(int k, std::span<const double> theta,
                        std::vector<double>& grad) const = 0;
    virtual ~SampleEval() = default;
};

std::pair<double, std::vector<double>> mean_over_samples(
    const SampleEval& fn, std::span<const double> theta,
    const std::vector<int>& idx, int dim) {
    const int n = static_cast<int>(idx.size());
    const int n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> grad_part(
        static_cast<std::size_t>(n_chunks));
    std::vector<double> loss_part(static_cast<std::size_t>(n_chunks), 0.0);

    par::for_index(static_cast<std::size_t>(n_chunks), [&](std::size_t c) {
        std::vector<double> g(static_cast<std::size_t>(dim), 0.0);
        double loss = 0.0;
        int lo = static_cast<int>(c) * kChunk;
        int hi = std::min(n, lo + kChunk);
        for (int i = lo; i < hi; ++i) loss += fn.eval(idx[static_cast<std::size_t>(i)], theta, g);
        grad_part[c] = std::move(g);
        loss_part[c] = loss;
    });

    std::vector<double> grad(static_cast<std::size_t>(dim), 0.0);
    double loss = 0.0;
    for (int c = 0; c < n_chunks; ++c) {
        vec::axpy(1.0, grad_part[static_cast<std::size_t>(c)], grad);
        loss += loss_part[static_cast<std::size_t>(c)];
    }
    const double inv = 1.0 / static_cast<double>(n);
    vec::scale(grad, inv);
    return {loss * inv, std::move(grad)};
}

struct LogisticEval : SampleEval {
    const Dataset& data;
    explicit LogisticEval(const Dataset& d) : data(d) {}
    double eval(int k, std::span<const double> theta,
                std::vector<double>& grad) const override {
        const double* xk = data.x.data() + static_cast<std::size_t>(k) * data.dim_x;
        double yk = data.y[static_cast<std::size_t>(k)];
        double margin = 0.0;
        for (int j = 0; j < data.dim_x; ++j) margin += xk[j] * theta[static_cast<std::size_t>(j)];
        double z = -yk * margin;
        // log(1 + e^z), stable for large |z|
        double loss = z > 30.0 ? z : std::log1p(std::exp(z));
        double s = 1.0 / (1.0 + std::exp(-z));  // sigmoid(z)
        double coef = -yk * s;
        for (int j = 0; j < data.dim_x; ++j) grad[static_cast<std::size_t>(j)] += coef * xk[j];
        return loss;
    }
};

struct MlpEval : SampleEval {
    const Dataset& data;
    MlpShape shape;
    MlpEval(const Dataset& d, MlpShape s) : data(d), shape(s) {}
    double eval(int k, std::span<const double> theta,
                std::vector<double>& grad) const override {
        const int h = shape.hidden, ni = shape.n_in;
        const double* xk = data.x.data() + static_cast<std::size_t>(k) * ni;
        const double* w1 = theta.data();             // h*ni
        const double* b1 = w1 + h * ni;              // h
        const double* w2 = b1 + h;                   // h
        const double b2 = *(w2 + h);                 // scalar
        double* gw1 = grad.data();
        double* gb1 = gw1 + h * ni;
        double* gw2 = gb1 + h;
        double* gb2 = gw2 + h;

        double out = b2;
        // forward
        std::array<double, 64> z{};  // hidden <= 64 by construction
        for (int i = 0; i < h; ++i) {
            double s = b1[i];
            const double* w1i = w1 + static_cast<std::size_t>(i) * ni;
            for (int j = 0; j < ni; ++j) s += w1i[j] * xk[j];
            z[static_cast<std::size_t>(i)] = std::tanh(s);
            out += w2[i] * z[static_cast<std::size_t>(i)];
        }
        double err = out - data.y[static_cast<std::size_t>(k)];
        // backward
        *gb2 += err;
        for (int i = 0; i < h; ++i) {
            double zi = z[static_cast<std::size_t>(i)];
            gw2[i] += err * zi;
            double dz = err * w2[i] * (1.0 - zi * zi);
            gb1[i] += dz;
            double* gw1i = gw1 + static_cast<std::size_t>(i) * ni;
            for (int j = 0; j < ni; ++j) gw1i[j] += dz * xk[j];
        }
        return 0.5 * err * err;
    }
};

std::vector<int> all_indices(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
}

std::pair<double, std::vector<double>> dataset_value_grad(
    const Problem& p, std::span<const double> theta, const std::vector<int>& idx) {
    if (p.kind == ProblemKind::logistic) {
        LogisticEval fn(p.data);
        return mean_over_samples(fn, theta, idx, p.dim);
    }
    MlpEval fn(p.data, p.mlp);
    return mean_over_samples(fn, theta, idx, p.dim);
}

// largest eigenvalue of X'X via power iteration (deterministic start)
double xtx_lambda_max(const Dataset& data) {
    const int d = data.dim_x;
    std::vector<double> v(static_cast<std::size_t>(d), 1.0 / std::sqrt(static_cast<double>(d)));
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        // u = X v; w = X'u
        std::vector<double> w(static_cast<std::size_t>(d), 0.0);
        for (int k = 0; k < data.n; ++k) {
            const double* xk = data.x.data() + static_cast<std::size_t>(k) * d;
            double u = 0.0;
            for (int j = 0; j < d; ++j) u += xk[j] * v[static_cast<std::size_t>(j)];
            for (int j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] += u * xk[j];
        }
        double norm = std::sqrt(vec::norm_sq(w));
        if (norm == 0.0) return 0.0;
        lambda = norm;
        for (int j = 0; j < d; ++j) v[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] / norm;
    }
    return lambda;
}

}  // namespace

// ---------------------------------------------------------------------------
// factories

Problem make_quadratic(std::uint64_t seed, int dim, double mu, double l_smooth,
                       double noise_sigma) {
    if (dim < 1) throw std::invalid_argument("make_quadratic: dim >= 1 required");
    if (!(mu > 0.0) || !(l_smooth >= mu))
        throw std::invalid_argument("make_quadratic: need 0 < mu <= l_smooth");
    Problem p;
    p.kind = ProblemKind::quadratic;
    p.dim = dim;
    p.smoothness = l_smooth;
    p.noise_sigma = noise_sigma;

    // A = H...H diag(eig) H...H with random Householder reflections, so the
    // spectrum (and in particular l_smooth) is exact up to symmetrization
    p.a.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
        double eig = dim == 1 ? l_smooth
                              : mu + (l_smooth - mu) * static_cast<double>(i) /
                                         static_cast<double>(dim - 1);
        p.a[static_cast<std::size_t>(i) * dim + i] = eig;
    }
    rng::Stream gen(rng::derive(seed, 0x51, dim));
    if (dim > 1) {
        const int reflections = std::min(dim, 8);
        for (int r = 0; r < reflections; ++r) {
            std::vector<double> v(static_cast<std::size_t>(dim));
            for (double& x : v) x = gen.gaussian();
            double norm = std::sqrt(vec::norm_sq(v));
            for (double& x : v) x /= norm;
            apply_householder_both_sides(p.a, dim, v);
        }
        // kill roundoff asymmetry
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) {
                double s = 0.5 * (p.a[static_cast<std::size_t>(i) * dim + j] +
                                  p.a[static_cast<std::size_t>(j) * dim + i]);
                p.a[static_cast<std::size_t>(i) * dim + j] = s;
                p.a[static_cast<std::size_t>(j) * dim + i] = s;
            }
    }

    std::vector<double> theta_star(static_cast<std::size_t>(dim));
    for (double& x : theta_star) x = gen.gaussian();
    p.b = matvec(p.a, dim, theta_star);
    double f_star = 0.5 * vec::dot(theta_star, matvec(p.a, dim, theta_star)) -
                    vec::dot(p.b, theta_star);
    p.minimizer = std::move(theta_star);
    p.optimum = f_star;
    return p;
}

Problem make_identity_quadratic(int dim, double l, double noise_sigma) {
    if (dim < 1 || !(l > 0.0))
        throw std::invalid_argument("make_identity_quadratic: dim >= 1, l > 0");
    Problem p;
    p.kind = ProblemKind::quadratic;
    p.dim = dim;
    p.smoothness = l;
    p.noise_sigma = noise_sigma;
    p.a.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) p.a[static_cast<std::size_t>(i) * dim + i] = l;
    p.b.assign(static_cast<std::size_t>(dim), 0.0);
    p.minimizer = std::vector<double>(static_cast<std::size_t>(dim), 0.0);
    p.optimum = 0.0;
    return p;
}

Problem make_logistic_from(Dataset data) {
    Problem p;
    p.kind = ProblemKind::logistic;
    p.dim = data.dim_x;
    p.data = std::move(data);
    p.smoothness = xtx_lambda_max(p.data) / (4.0 * p.data.n);
    return p;
}

Problem make_logistic(std::uint64_t seed, int n_samples, int n_features) {
    if (n_samples < 1 || n_features < 1)
        throw std::invalid_argument("make_logistic: positive sizes required");
    rng::Stream gen(rng::derive(seed, 0x1091, n_samples, n_features));
    Dataset d;
    d.n = n_samples;
    d.dim_x = n_features;
    d.x.resize(static_cast<std::size_t>(n_samples) * n_features);
    d.y.resize(static_cast<std::size_t>(n_samples));
    std::vector<double> teacher(static_cast<std::size_t>(n_features));
    for (double& w : teacher) w = gen.gaussian();
    for (int k = 0; k < n_samples; ++k) {
        double margin = 0.0;
        for (int j = 0; j < n_features; ++j) {
            double x = gen.gaussian();
            d.x[static_cast<std::size_t>(k) * n_features + j] = x;
            margin += x * teacher[static_cast<std::size_t>(j)];
        }
        margin += 0.3 * gen.gaussian();
        d.y[static_cast<std::size_t>(k)] = margin >= 0.0 ? 1.0 : -1.0;
    }
    return make_logistic_from(std::move(d));
}

Problem make_mlp(std::uint64_t seed, int n_in, int hidden, int n_samples,
                 double label_noise) {
    if (hidden < 1 || hidden > 64 || n_in < 1)
        throw std::invalid_argument("make_mlp: hidden in [1,64], n_in >= 1");
    Problem p;
    p.kind = ProblemKind::mlp;
    p.mlp = MlpShape{n_in, hidden};
    p.dim = p.mlp.param_count();

    rng::Stream gen(rng::derive(seed, 0x317b, n_in, hidden, n_samples));
    std::vector<double> teacher(static_cast<std::size_t>(p.dim));
    for (double& w : teacher) w = gen.gaussian();

    Dataset d;
    d.n = n_samples;
    d.dim_x = n_in;
    d.x.resize(static_cast<std::size_t>(n_samples) * n_in);
    d.y.resize(static_cast<std::size_t>(n_samples));
    for (int k = 0; k < n_samples; ++k)
        for (int j = 0; j < n_in; ++j)
            d.x[static_cast<std::size_t>(k) * n_in + j] = gen.gaussian();
    // teacher forward to label the inputs
    p.data = std::move(d);
    for (int k = 0; k < p.data.n; ++k) {
        const double* xk = p.data.x.data() + static_cast<std::size_t>(k) * n_in;
        const double* w1 = teacher.data();
        const double* b1 = w1 + hidden * n_in;
        const double* w2 = b1 + hidden;
        double out = *(w2 + hidden);
        for (int i = 0; i < hidden; ++i) {
            double s = b1[i];
            for (int j = 0; j < n_in; ++j) s += w1[static_cast<std::size_t>(i) * n_in + j] * xk[j];
            out += w2[i] * std::tanh(s);
        }
        p.data.y[static_cast<std::size_t>(k)] = out + label_noise * gen.gaussian();
    }

    // rough smoothness upper bound: power iteration on the Hessian at a
    // reference point via central differences of the gradient
    std::vector<double> theta_ref(static_cast<std::size_t>(p.dim));
    for (double& x : theta_ref) x = 0.5 * gen.gaussian();
    std::vector<double> v(static_cast<std::size_t>(p.dim));
    for (double& x : v) x = gen.gaussian();
    double norm = std::sqrt(vec::norm_sq(v));
    for (double& x : v) x /= norm;
    const double h = 1e-4;
    double lambda = 1.0;
    auto idx = all_indices(p.data.n);
    for (int it = 0; it < 30; ++it) {
        std::vector<double> plus(theta_ref), minus(theta_ref);
        vec::axpy(h, v, plus);
        vec::axpy(-h, v, minus);
        auto gp = dataset_value_grad(p, plus, idx).second;
        auto gm = dataset_value_grad(p, minus, idx).second;
        std::vector<double> hv(static_cast<std::size_t>(p.dim));
        for (int j = 0; j < p.dim; ++j)
            hv[static_cast<std::size_t>(j)] =
                (gp[static_cast<std::size_t>(j)] - gm[static_cast<std::size_t>(j)]) / (2.0 * h);
        double hv_norm = std::sqrt(vec::norm_sq(hv));
        if (hv_norm == 0.0) break;
        lambda = hv_norm;
        for (int j = 0; j < p.dim; ++j) v[static_cast<std::size_t>(j)] = hv[static_cast<std::size_t>(j)] / hv_norm;
    }
    p.smoothness = 1.5 * lambda;
    return p;
}

// ---------------------------------------------------------------------------
// evaluation

std::pair<double, std::vector<double>> value_and_grad(const Problem& p,
                                                      std::span<const double> theta) {
    check_theta(p, theta);
    if (p.kind == ProblemKind::quadratic) {
        std::vector<double> atheta = matvec(p.a, p.dim, theta);
        double f = 0.5 * vec::dot(theta, atheta) - vec::dot(p.b, theta);
        for (int j = 0; j < p.dim; ++j) atheta[static_cast<std::size_t>(j)] -= p.b[static_cast<std::size_t>(j)];
        return {f, std::move(atheta)};
    }
    auto idx = all_indices(p.data.n);
    return dataset_value_grad(p, theta, idx);
}

GradResult stochastic_grad(const Problem& p, std::span<const double> theta,
                           const MicroBatch& batch) {
    check_theta(p, theta);
    if (batch.size < 1 && !batch.full_batch)
        throw std::invalid_argument("stochastic_grad: empty batch");

    GradResult out;
    if (p.kind == ProblemKind::quadratic) {
        auto [f, g] = value_and_grad(p, theta);
        if (p.noise_sigma > 0.0) {
            rng::Stream noise(batch.stream);
            for (double& gj : g) gj += p.noise_sigma * noise.gaussian();
        }
        out.gradient = std::move(g);
        out.loss_value = f;
        out.sample_count = batch.size;
        return out;
    }

    std::vector<int> idx;
    if (batch.full_batch) {
        idx = all_indices(p.data.n);
    } else {
        rng::Stream pick(batch.stream);
        idx.resize(static_cast<std::size_t>(batch.size));
        for (int& k : idx) k = static_cast<int>(pick.below(static_cast<std::uint64_t>(p.data.n)));
    }
    auto [loss, g] = dataset_value_grad(p, theta, idx);
    out.gradient = std::move(g);
    out.loss_value = loss;
    out.sample_count = static_cast<long long>(idx.size());
    return out;
}

double finite_diff_check(const Problem& p, std::span<const double> theta, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps > 0 required");
    auto [f, grad] = value_and_grad(p, theta);
    (void)f;
    std::vector<double> probe(theta.begin(), theta.end());
    double worst = 0.0;
    for (int j = 0; j < p.dim; ++j) {
        double saved = probe[static_cast<std::size_t>(j)];
        probe[static_cast<std::size_t>(j)] = saved + eps;
        double fp = value_and_grad(p, probe).first;
        probe[static_cast<std::size_t>(j)] = saved - eps;
        double fm = value_and_grad(p, probe).first;
        probe[static_cast<std::size_t>(j)] = saved;
        double numeric = (fp - fm) / (2.0 * eps);
        double analytic = grad[static_cast<std::size_t>(j)];
        double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
        worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
    return worst;
}

std::vector<double> default_theta0(const Problem& p, std::uint64_t seed) {
    std::vector<double> theta(static_cast<std::size_t>(p.dim), 0.0);
    rng::Stream gen(rng::derive(seed, 0x7e7a0));
    switch (p.kind) {
        case ProblemKind::quadratic:
            for (double& x : theta) x = gen.gaussian();
            break;
        case ProblemKind::logistic:
            break;  // zeros
        case ProblemKind::mlp:
            for (double& x : theta) x = 0.5 * gen.gaussian();
            break;
    }
    return theta;
}

}  // namespace accosim
