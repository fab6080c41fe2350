#include "accosim/verify.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "accosim/collectives.hpp"
#include "accosim/convergence.hpp"
#include "accosim/optim.hpp"
#include "accosim/parallel.hpp"
#include "accosim/problems.hpp"
#include "accosim/protocols.hpp"
#include "accosim/rng.hpp"
#include "accosim/vecmath.hpp"

namespace accosim {

nlohmann::json SuiteReport::to_json() const {
    nlohmann::json j;
    j["suite"] = suite;
    j["pass"] = pass();
    j["checks"] = nlohmann::json::array();
    for (const CheckRow& c : checks) {
        nlohmann::json row;
        row["name"] = c.name;
        row["lhs"] = c.lhs;
        row["rhs"] = c.rhs;
        row["slack"] = c.slack;
        row["pass"] = c.pass;
        if (!c.detail.empty()) row["detail"] = c.detail;
        j["checks"].push_back(row);
    }
    return j;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

CheckRow leq(std::string name, double lhs, double rhs, double slack,
             std::string detail = "") {
    CheckRow c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.slack = slack;
    c.pass = lhs <= rhs + slack;
    c.detail = std::move(detail);
    return c;
}

CheckRow expect(std::string name, bool ok, std::string detail = "") {
    CheckRow c;
    c.name = std::move(name);
    c.lhs = ok ? 1.0 : 0.0;
    c.rhs = 1.0;
    c.pass = ok;
    c.detail = std::move(detail);
    return c;
}

std::vector<double> random_vector(std::uint64_t seed, int dim, double scale) {
    rng::Stream gen(seed);
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = scale * gen.gaussian();
    return v;
}

// ---------------------------------------------------------------------------

SuiteReport suite_lyapunov() {
    SuiteReport rep;
    rep.suite = "lyapunov";

    // formula anchors on f = theta^2/2
    Problem unit = make_identity_quadratic(1);
    LyapunovParams params{0.5, 1.0, 0.0};
    double v_opt = lyapunov_value(unit, std::vector<double>{0.0}, std::vector<double>{0.0}, params);
    rep.checks.push_back(leq("value_at_optimum", std::fabs(v_opt), 0.0, 1e-15));
    double v_hand = lyapunov_value(unit, std::vector<double>{1.0}, std::vector<double>{0.0}, params);
    rep.checks.push_back(leq("hand_case_1p5", std::fabs(v_hand - 1.5), 0.0, 1e-15));

    // V >= 0 and monotone in eta over random states and problems
    double worst_neg = 0.0;
    double worst_mono = 0.0;
    for (int s = 0; s < 40; ++s) {
        Problem q = make_quadratic(100 + static_cast<std::uint64_t>(s), 6, 0.2, 2.0, 0.0);
        LyapunovParams pa{0.1, q.smoothness, *q.optimum};
        LyapunovParams pb{0.25, q.smoothness, *q.optimum};
        auto th = random_vector(900 + static_cast<std::uint64_t>(s), 6, 2.0);
        auto es = random_vector(1900 + static_cast<std::uint64_t>(s), 6, 2.0);
        double va = lyapunov_value(q, th, es, pa);
        double vb = lyapunov_value(q, th, es, pb);
        worst_neg = std::min(worst_neg, va);
        worst_mono = std::max(worst_mono, va - vb);  // eta 0.1 <= 0.25
    }
    rep.checks.push_back(leq("nonnegative_random", -worst_neg, 0.0, 1e-12));
    rep.checks.push_back(leq("eta_monotone", worst_mono, 0.0, 1e-12));

    // per-step decrease on in-regime deterministic traces
    double worst_margin = -1.0;
    bool all_pass = true;
    for (int dim : {1, 10, 100}) {
        for (int s = 0; s < 50; ++s) {
            Problem q = make_quadratic(7000 + static_cast<std::uint64_t>(dim * 100 + s), dim,
                                       0.05, 1.0 + 0.02 * s, 0.0);
            double eta = 1.0 / (2.0 * q.smoothness);
            auto trace = run_coupled_gd(q, random_vector(31 + static_cast<std::uint64_t>(s), dim, 1.5),
                                        random_vector(77 + static_cast<std::uint64_t>(s), dim, 1.5),
                                        eta, 30);
            auto res = check_descent(trace, q, {eta, q.smoothness, *q.optimum});
            all_pass = all_pass && res.pass;
            worst_margin = std::max(worst_margin, res.worst_margin);
        }
    }
    rep.checks.push_back(leq("descent_in_regime", worst_margin, 0.0, 1e-10,
                             "quadratics d in {1,10,100}, 50 seeds each, eta = 1/(2L)"));
    rep.checks.push_back(expect("descent_all_traces", all_pass));

    // negative control far out of the step-size regime
    Problem q = make_identity_quadratic(4);
    auto bad = run_coupled_gd(q, random_vector(5, 4, 1.0), random_vector(6, 4, 1.0),
                              3.0 / q.smoothness, 20);
    auto res = check_descent(bad, q, {3.0 / q.smoothness, q.smoothness, 0.0});
    rep.checks.push_back(expect("violation_reported_out_of_regime", !res.pass));
    return rep;
}

SuiteReport suite_gd_bound() {
    SuiteReport rep;
    rep.suite = "prop1";

    // hand case: f = theta^2/2, eta = 1/2, both sequences start at 1
    Problem unit = make_identity_quadratic(1);
    auto trace = run_coupled_gd(unit, {1.0}, {1.0}, 0.5, 4);
    auto hand = check_gd_bound(trace, unit, {0.5, 1.0, 0.0}, 4, 1e-12);
    rep.checks.push_back(leq("hand_case_lhs", std::fabs(hand.lhs - 0.6640625), 0.0, 1e-12));
    rep.checks.push_back(leq("hand_case_rhs", std::fabs(hand.rhs - 4.0), 0.0, 1e-12));
    rep.checks.push_back(expect("hand_case_pass", hand.pass));

    // already optimal: both sides zero
    auto at_opt = run_coupled_gd(unit, {0.0}, {0.0}, 0.5, 4);
    auto opt = check_gd_bound(at_opt, unit, {0.5, 1.0, 0.0}, 4, 1e-12);
    rep.checks.push_back(expect("optimal_start", opt.pass && opt.lhs == 0.0 && opt.rhs == 0.0));

    bool all = true;
    double worst_ratio = 0.0;
    for (int s = 0; s < 50; ++s) {
        Problem q = make_quadratic(4200 + static_cast<std::uint64_t>(s), 10, 0.1,
                                   0.5 + 0.05 * s, 0.0);
        double eta = 1.0 / (2.0 * q.smoothness);
        auto tr = run_coupled_gd(q, random_vector(11 + static_cast<std::uint64_t>(s), 10, 2.0),
                                 random_vector(13 + static_cast<std::uint64_t>(s), 10, 2.0),
                                 eta, 100);
        auto r = check_gd_bound(tr, q, {eta, q.smoothness, *q.optimum}, 100, 1e-10);
        all = all && r.pass;
        if (r.rhs > 0.0) worst_ratio = std::max(worst_ratio, r.lhs / r.rhs);
    }
    rep.checks.push_back(expect("random_quadratics_50", all,
                                "worst lhs/rhs = " + format_double(worst_ratio)));
    return rep;
}

SuiteReport suite_sgd_bound() {
    SuiteReport rep;
    rep.suite = "prop2";

    struct Case {
        int dim;
        double sigma;
        double eta_factor;  // eta = factor / L
        int t_steps;
        int seeds;
    };
    const Case cases[] = {{1, 1.0, 0.25, 50, 500}, {10, 0.5, 0.5, 50, 200},
                          {10, 0.5, 0.5, 100, 200}, {1, 0.5, 0.5, 50, 500}};
    int idx = 0;
    for (const Case& c : cases) {
        Problem q = c.dim == 1
                        ? make_identity_quadratic(1, 1.0, c.sigma)
                        : make_quadratic(9100 + static_cast<std::uint64_t>(idx), c.dim, 0.1,
                                         1.0, c.sigma);
        double eta = c.eta_factor / q.smoothness;
        auto theta0 = random_vector(55 + static_cast<std::uint64_t>(idx), c.dim, 1.0);
        std::vector<std::vector<CoupledPoint>> traces(static_cast<std::size_t>(c.seeds));
        par::for_index(static_cast<std::size_t>(c.seeds), [&](std::size_t s) {
            traces[s] = run_coupled_sgd(q, theta0, eta, c.t_steps,
                                        rng::derive(777, static_cast<std::uint64_t>(idx), s));
        });
        auto r = check_sgd_bound(traces, q, {eta, q.smoothness, *q.optimum}, c.t_steps,
                                 q.noise_variance_total());
        rep.checks.push_back(
            leq("d" + std::to_string(c.dim) + "_sigma" + format_double(c.sigma) + "_T" +
                    std::to_string(c.t_steps),
                r.lhs, r.rhs, r.slack,
                std::to_string(c.seeds) + " seeds, 3-SE statistical slack"));
        ++idx;
    }

    // sigma = 0 degenerates to the deterministic bound
    Problem q0 = make_identity_quadratic(2, 1.0, 0.0);
    std::vector<std::vector<CoupledPoint>> traces(
        40, run_coupled_sgd(q0, {1.0, -0.5}, 0.5, 20, 1));
    auto r0 = check_sgd_bound(traces, q0, {0.5, 1.0, 0.0}, 20, 0.0);
    rep.checks.push_back(expect("noise_free_degenerate", r0.pass && r0.slack == 0.0));
    return rep;
}

SuiteReport suite_memory() {
    SuiteReport rep;
    rep.suite = "memory";
    const double k = 12.0, n = 64.0, psi = 7.5e9;
    struct Row {
        MemoryMethod m;
        double bytes;
        long long gb;
    };
    const Row rows[] = {
        {MemoryMethod::ddp, 120e9, 120},      {MemoryMethod::zero1, 31.40625e9, 31},
        {MemoryMethod::zero2, 16.640625e9, 16}, {MemoryMethod::zero3, 1.875e9, 2},
        {MemoryMethod::slowmo, 150e9, 150},   {MemoryMethod::diloco, 150e9, 150},
        {MemoryMethod::co2, 180e9, 180},      {MemoryMethod::dpu, 46.40625e9, 46},
        {MemoryMethod::wp, 46.40625e9, 46},   {MemoryMethod::acco, 46.40625e9, 46},
    };
    for (const Row& r : rows) {
        double bytes = memory_model_bytes(r.m, k, n, psi);
        long long gb = memory_reported_gb(bytes);
        rep.checks.push_back(leq(to_string(r.m) + "_bytes", std::fabs(bytes - r.bytes), 0.0, 1.0));
        rep.checks.push_back(expect(to_string(r.m) + "_gb", gb == r.gb,
                                    std::to_string(gb) + " GB reported"));
    }
    return rep;
}

SuiteReport suite_collectives() {
    SuiteReport rep;
    rep.suite = "collectives";

    bool algebra = true;
    for (auto [d, n] : {std::pair<int, int>{7, 3}, {4, 2}, {12, 5}, {3, 4}, {16, 1}}) {
        Fabric fabric(n);
        ShardLayout layout = shard_partition(static_cast<std::size_t>(d), n);
        std::vector<std::vector<double>> inputs;
        for (int w = 0; w < n; ++w)
            inputs.push_back(random_vector(rng::derive(42, static_cast<std::uint64_t>(d),
                                                       static_cast<std::uint64_t>(w)),
                                           d, 1.0));
        auto direct = fabric.all_reduce(inputs);
        auto via_shards = fabric.all_gather(fabric.reduce_scatter(inputs, layout), layout);
        algebra = algebra && direct == via_shards;  // bitwise
    }
    rep.checks.push_back(expect("reduce_scatter_then_all_gather_is_all_reduce", algebra));

    CostModel m;
    m.beta_s_per_byte = 1e-9;
    double t = collective_time(Collective::all_reduce, 1000000, 4, m);
    rep.checks.push_back(leq("ring_all_reduce_example", std::fabs(t - 0.012), 0.0, 1e-15));
    rep.checks.push_back(
        expect("single_worker_free",
               collective_time(Collective::all_reduce, 4096, 1, m) == 0.0 &&
                   collective_time(Collective::all_gather, 4096, 1, m) == 0.0));
    double rs = collective_time(Collective::reduce_scatter, 8192, 8, m);
    double ag = collective_time(Collective::all_gather, 8192, 8, m);
    double ar = collective_time(Collective::all_reduce, 8192, 8, m);
    rep.checks.push_back(leq("split_equals_fused_when_latency_free",
                             std::fabs(rs + ag - ar), 0.0, 0.0));
    return rep;
}

SuiteReport suite_shard_equivalence() {
    SuiteReport rep;
    rep.suite = "shard-equivalence";
    double worst = 0.0;
    for (OptKind kind : {OptKind::sgd, OptKind::adam, OptKind::adamw}) {
        for (int n : {1, 2, 3, 8}) {
            for (int d : {3, 8, 50}) {
                OptimizerConfig cfg;
                cfg.kind = kind;
                cfg.learning_rate = 0.05;
                cfg.weight_decay = kind == OptKind::adamw ? 0.01 : 0.0;
                cfg.adam_beta1 = 0.9;
                cfg.adam_beta2 = 0.95;

                Fabric fabric(n);
                ShardLayout layout = shard_partition(static_cast<std::size_t>(d), n);
                std::vector<double> theta_full =
                    random_vector(rng::derive(3, static_cast<std::uint64_t>(n),
                                              static_cast<std::uint64_t>(d)),
                                  d, 1.0);
                std::vector<double> theta_sharded = theta_full;
                OptimizerState full = OptimizerState::for_range(cfg, 0, static_cast<std::size_t>(d));
                std::vector<OptimizerState> shards;
                for (int w = 0; w < n; ++w)
                    shards.push_back(OptimizerState::for_range(cfg, layout.lo(w), layout.hi(w)));

                for (int step = 0; step < 25; ++step) {
                    auto grad = random_vector(
                        rng::derive(99, static_cast<std::uint64_t>(step),
                                    static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d),
                                    static_cast<std::uint64_t>(kind)),
                        d, 1.0);
                    auto [next, updated] = opt_step(std::move(full), theta_full, grad, cfg);
                    full = std::move(next);
                    theta_full = std::move(updated);

                    std::vector<std::vector<double>> grad_shards;
                    for (int w = 0; w < n; ++w)
                        grad_shards.emplace_back(grad.begin() + static_cast<std::ptrdiff_t>(layout.lo(w)),
                                                 grad.begin() + static_cast<std::ptrdiff_t>(layout.hi(w)));
                    theta_sharded = sharded_opt_step(shards, theta_sharded, grad_shards, cfg,
                                                     layout, fabric);
                }
                worst = std::max(worst, vec::max_abs_diff(theta_full, theta_sharded));
            }
        }
    }
    rep.checks.push_back(leq("sharded_vs_unsharded_trajectories", worst, 0.0, 1e-12,
                             "kinds x N in {1,2,3,8} x d in {3,8,50}, 25 steps"));
    return rep;
}

SuiteReport suite_acco_gd_equivalence() {
    SuiteReport rep;
    rep.suite = "acco-gd-equivalence";

    auto run_case = [&](const Problem& p, double eta, const std::string& name) {
        SimConfig sim;
        sim.n_workers = 2;
        sim.batch_size = 1;
        sim.master_seed = 17;
        sim.full_batch_gradients = p.kind != ProblemKind::quadratic;
        sim.cost.alpha_s = 0.4;  // stages accumulate several micro-batches
        OptimizerConfig cfg;
        cfg.kind = OptKind::sgd;
        cfg.learning_rate = eta;

        RunOptions opts;
        opts.theta0 = default_theta0(p, 5);
        RunTrace trace = run_protocol(Method::acco, p, cfg, sim, 100, opts);

        std::vector<double> theta = opts.theta0;
        double worst = 0.0;
        for (int t = 1; t <= 100; ++t) {
            auto grad = value_and_grad(p, theta).second;
            vec::axpy(-eta, grad, theta);
            worst = std::max(worst,
                             vec::max_abs_diff(theta, trace.theta_history[static_cast<std::size_t>(t)]));
            worst = std::max(worst, vec::max_abs_diff(
                                        theta, trace.estimate_history[static_cast<std::size_t>(t)]));
        }
        rep.checks.push_back(leq(name, worst, 0.0, 1e-12, "100 updates vs plain descent"));
    };

    for (int d : {1, 10, 100}) {
        Problem q = make_quadratic(600 + static_cast<std::uint64_t>(d), d, 0.1, 1.0, 0.0);
        run_case(q, 1.0 / (2.0 * q.smoothness), "quadratic_d" + std::to_string(d));
    }
    Problem logit = make_logistic(21, 64, 6);
    run_case(logit, 0.5 / logit.smoothness, "logistic_full_batch");
    return rep;
}

SuiteReport suite_heterogeneous() {
    SuiteReport rep;
    rep.suite = "heterogeneous";

    Problem q = make_quadratic(5, 8, 0.1, 1.0, 0.0);
    OptimizerConfig cfg;
    cfg.kind = OptKind::sgd;
    cfg.learning_rate = 0.1;

    auto rate = [](const RunTrace& tr, int a, int b) {
        const auto& ra = tr.records[static_cast<std::size_t>(a)];
        const auto& rb = tr.records[static_cast<std::size_t>(b)];
        return static_cast<double>(rb.samples_cum - ra.samples_cum) / (rb.time_s - ra.time_s);
    };

    auto run_pair = [&](const CostModel& cost) {
        SimConfig sim;
        sim.n_workers = 4;
        sim.batch_size = 1;
        sim.master_seed = 3;
        sim.hetero.multipliers = {1.0, 1.0, 1.0, 4.0};
        sim.cost = cost;
        RunTrace acco = run_protocol(Method::acco, q, cfg, sim, 24);
        RunTrace ddp = run_protocol(Method::ddp, q, cfg, sim, 24);
        return rate(acco, 12, 20) / rate(ddp, 12, 20);
    };

    double ratio_free = run_pair(CostModel{});
    rep.checks.push_back(leq("throughput_ratio_zero_comm", std::fabs(ratio_free - 3.25), 0.0,
                             1e-9, "steady-state samples/s, one worker 4x slower"));

    CostModel cost;
    cost.alpha_s = 0.1;
    cost.beta_s_per_byte = 1e-3 / 8.0;  // well under one micro-batch per collective
    double ratio_comm = run_pair(cost);
    rep.checks.push_back(leq("throughput_ratio_with_comm", 2.5, ratio_comm, 0.0,
                             "ratio stays above 2.5 with nonzero comm cost"));
    return rep;
}

}  // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {
        "lyapunov",  "prop1",      "prop2",
        "memory",    "collectives", "shard-equivalence",
        "acco-gd-equivalence",      "heterogeneous"};
    return names;
}

SuiteReport run_suite(const std::string& name) {
    if (name == "lyapunov") return suite_lyapunov();
    if (name == "prop1") return suite_gd_bound();
    if (name == "prop2") return suite_sgd_bound();
    if (name == "memory") return suite_memory();
    if (name == "collectives") return suite_collectives();
    if (name == "shard-equivalence") return suite_shard_equivalence();
    if (name == "acco-gd-equivalence") return suite_acco_gd_equivalence();
    if (name == "heterogeneous") return suite_heterogeneous();
    throw std::invalid_argument("unknown verify suite: " + name);
}

}  // namespace accosim
