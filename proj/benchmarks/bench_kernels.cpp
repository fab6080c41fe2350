// Compares the serial reference kernels against the OpenMP ones on the two
// data-parallel hot loops: full-dataset gradients and Monte-Carlo seed
// sweeps. Outputs are checked for bitwise equality while timing.

#include <chrono>
#include <cstdio>
#include <vector>

#include "accosim/convergence.hpp"
#include "accosim/parallel.hpp"
#include "accosim/problems.hpp"
#include "accosim/rng.hpp"

using namespace accosim;
using Clock = std::chrono::steady_clock;

namespace {

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = Clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-28s serial %9.4f ms   openmp %9.4f ms   speedup %5.2fx   %s\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                identical ? "bitwise-identical" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("threads available: %d\n", par::max_threads());

    {
        Problem mlp = make_mlp(7, 8, 24, 20000, 0.1);
        std::vector<double> theta = default_theta0(mlp, 3);

        std::pair<double, std::vector<double>> ref, par_out;
        par::set_enabled(false);
        double t_serial = time_best_of(5, [&] { ref = value_and_grad(mlp, theta); });
        par::set_enabled(true);
        double t_parallel = time_best_of(5, [&] { par_out = value_and_grad(mlp, theta); });
        report("mlp full-batch gradient", t_serial, t_parallel,
               ref.first == par_out.first && ref.second == par_out.second);
    }

    {
        Problem logit = make_logistic(9, 40000, 16);
        std::vector<double> theta(16, 0.1);

        std::pair<double, std::vector<double>> ref, par_out;
        par::set_enabled(false);
        double t_serial = time_best_of(5, [&] { ref = value_and_grad(logit, theta); });
        par::set_enabled(true);
        double t_parallel = time_best_of(5, [&] { par_out = value_and_grad(logit, theta); });
        report("logistic full-batch gradient", t_serial, t_parallel,
               ref.first == par_out.first && ref.second == par_out.second);
    }

    {
        Problem q = make_quadratic(5, 40, 0.1, 1.0, 0.5);
        const int n_seeds = 256;
        std::vector<double> theta0 = default_theta0(q, 1);
        double eta = 1.0 / (2.0 * q.smoothness);

        auto sweep = [&](std::vector<std::vector<CoupledPoint>>& out) {
            out.assign(n_seeds, {});
            par::for_index(n_seeds, [&](std::size_t s) {
                out[s] = run_coupled_sgd(q, theta0, eta, 60, rng::derive(77, s));
            });
        };
        std::vector<std::vector<CoupledPoint>> ref, par_out;
        par::set_enabled(false);
        double t_serial = time_best_of(3, [&] { sweep(ref); });
        par::set_enabled(true);
        double t_parallel = time_best_of(3, [&] { sweep(par_out); });
        bool same = ref.size() == par_out.size();
        for (std::size_t s = 0; same && s < ref.size(); ++s)
            for (std::size_t t = 0; same && t < ref[s].size(); ++t)
                same = ref[s][t].theta == par_out[s][t].theta &&
                       ref[s][t].estimate == par_out[s][t].estimate;
        report("monte-carlo seed sweep", t_serial, t_parallel, same);
    }
    return 0;
}
