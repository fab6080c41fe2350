#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "accosim/convergence.hpp"
#include "accosim/parallel.hpp"
#include "accosim/problems.hpp"
#include "accosim/rng.hpp"

using namespace accosim;

namespace {

struct ParallelGuard {
    bool saved;
    explicit ParallelGuard(bool on) : saved(par::enabled()) { par::set_enabled(on); }
    ~ParallelGuard() { par::set_enabled(saved); }
};

}  // namespace

TEST_CASE("for_index covers every slot exactly once") {
    std::vector<int> hits(1000, 0);
    par::for_index(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("dataset gradients are bitwise identical in serial and parallel") {
    Problem logit = make_logistic(3, 500, 8);
    Problem mlp = make_mlp(4, 4, 8, 300, 0.1);
    rng::Stream gen(6);

    for (const Problem* p : {&logit, &mlp}) {
        std::vector<double> theta(static_cast<std::size_t>(p->dim));
        for (double& x : theta) x = 0.5 * gen.gaussian();

        std::pair<double, std::vector<double>> serial, parallel;
        {
            ParallelGuard off(false);
            serial = value_and_grad(*p, theta);
        }
        {
            ParallelGuard on(true);
            parallel = value_and_grad(*p, theta);
        }
        CHECK(serial.first == parallel.first);
        CHECK(serial.second == parallel.second);

        MicroBatch batch{rng::derive(11, static_cast<std::uint64_t>(p->dim)), 96, false};
        GradResult gs, gp;
        {
            ParallelGuard off(false);
            gs = stochastic_grad(*p, theta, batch);
        }
        {
            ParallelGuard on(true);
            gp = stochastic_grad(*p, theta, batch);
        }
        CHECK(gs.gradient == gp.gradient);
        CHECK(gs.loss_value == gp.loss_value);
    }
}

TEST_CASE("seed sweeps are bitwise identical in serial and parallel") {
    Problem p = make_identity_quadratic(4, 1.0, 0.6);
    const int n_seeds = 48;

    auto sweep = [&](bool parallel_on) {
        ParallelGuard guard(parallel_on);
        std::vector<std::vector<CoupledPoint>> traces(n_seeds);
        par::for_index(n_seeds, [&](std::size_t s) {
            traces[s] = run_coupled_sgd(p, {1.0, 1.0, 1.0, 1.0}, 0.25, 30,
                                        rng::derive(21, s));
        });
        return traces;
    };

    auto serial = sweep(false);
    auto parallel = sweep(true);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t s = 0; s < serial.size(); ++s) {
        REQUIRE(serial[s].size() == parallel[s].size());
        for (std::size_t t = 0; t < serial[s].size(); ++t) {
            CHECK(serial[s][t].theta == parallel[s][t].theta);
            CHECK(serial[s][t].estimate == parallel[s][t].estimate);
        }
    }
}
