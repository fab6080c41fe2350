#include "accosim/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "accosim/rng.hpp"
#include "accosim/vecmath.hpp"

namespace accosim {

std::string to_string(Method m) {
    switch (m) {
        case Method::ddp: return "ddp";
        case Method::dpu: return "dpu";
        case Method::wp: return "wp";
        case Method::acco: return "acco";
    }
    return "?";
}

Method method_from(const std::string& s) {
    if (s == "ddp") return Method::ddp;
    if (s == "dpu") return Method::dpu;
    if (s == "wp") return Method::wp;
    if (s == "acco") return Method::acco;
    throw std::invalid_argument("unknown method: " + s);
}

std::vector<double> weighted_average(const std::vector<GradResult>& bundles) {
    if (bundles.empty()) throw std::invalid_argument("weighted_average: empty input");
    const std::size_t d = bundles[0].gradient.size();
    std::vector<double> sum(d, 0.0);
    long long total = 0;
    for (const GradResult& b : bundles) {
        if (b.gradient.size() != d)
            throw std::invalid_argument("weighted_average: dimension mismatch");
        if (b.sample_count < 1)
            throw std::invalid_argument("weighted_average: sample_count >= 1 required");
        vec::axpy(static_cast<double>(b.sample_count), b.gradient, sum);
        total += b.sample_count;
    }
    vec::scale(sum, 1.0 / static_cast<double>(total));
    return sum;
}

namespace {

// seed-stream tags; every (worker, round, tag, ordinal) tuple is distinct
constexpr std::uint64_t kTagInit = 1;      // bootstrap gradient
constexpr std::uint64_t kTagMain = 2;      // gradients at committed params
constexpr std::uint64_t kTagEstimate = 3;  // gradients at estimate params

struct Bundle {
    std::vector<double> grad_sum;  // sum of N * per-sample-mean gradients
    long long samples = 0;
    int micro = 0;

    void add(const GradResult& r) {
        if (grad_sum.empty()) grad_sum.assign(r.gradient.size(), 0.0);
        vec::axpy(static_cast<double>(r.sample_count), r.gradient, grad_sum);
        samples += r.sample_count;
        micro += 1;
    }
    void reset() {
        grad_sum.clear();
        samples = 0;
        micro = 0;
    }
};

MicroBatch make_batch(const SimConfig& sim, std::uint64_t round, std::uint64_t tag,
                      int worker, int ordinal) {
    MicroBatch b;
    b.stream = rng::derive(sim.master_seed, static_cast<std::uint64_t>(worker), round,
                           tag, static_cast<std::uint64_t>(ordinal));
    b.size = sim.batch_size;
    b.full_batch = sim.full_batch_gradients;
    return b;
}

// Shared bookkeeping for all protocol engines: record emission, busy/idle
// accounting, divergence detection.
class TraceBuilder {
public:
    TraceBuilder(const Problem& p, const OptimizerConfig& cfg, const SimConfig& sim,
                 const RunOptions& opts)
        : p_(p), cfg_(cfg), sim_(sim), opts_(opts),
          busy_measure_(static_cast<std::size_t>(sim.n_workers), 0.0),
          busy_attributed_(static_cast<std::size_t>(sim.n_workers), 0.0) {}

    RunTrace trace;

    void set_initial(const std::vector<double>& theta0,
                     const std::vector<double>& estimate0) {
        trace.theta_history.push_back(theta0);
        trace.estimate_history.push_back(estimate0);
    }

    void add_busy(int w, double seconds) {
        busy_measure_[static_cast<std::size_t>(w)] += seconds;
    }

    // emits one committed update; returns false when the run diverged
    bool commit(int update, double time, const std::vector<double>& theta,
                const std::vector<double>& estimate, long long consumed_samples,
                std::vector<int> mb_main, std::vector<int> mb_estimate,
                const std::vector<double>& busy_partial,
                std::vector<ConsumedBundle> bundles,
                const std::vector<double>& consumed_mean) {
        const bool finite_state = vec::all_finite(theta) && vec::all_finite(estimate);
        const double inf = std::numeric_limits<double>::infinity();
        double loss = inf, loss_est = inf;
        std::vector<double> grad, grad_est;
        if (finite_state) {
            std::tie(loss, grad) = value_and_grad(p_, theta);
            std::tie(loss_est, grad_est) = value_and_grad(p_, estimate);
        }

        RoundRecord rec;
        rec.update = update;
        rec.time_s = time;
        rec.loss = loss;
        rec.grad_sq = finite_state ? vec::norm_sq(grad) : inf;
        rec.grad_sq_estimate = finite_state ? vec::norm_sq(grad_est) : inf;
        rec.lyapunov = std::numeric_limits<double>::quiet_NaN();
        if (finite_state && p_.optimum.has_value()) {
            double eta = opts_.lyapunov_eta > 0.0 ? opts_.lyapunov_eta : cfg_.learning_rate;
            double l = p_.smoothness;
            rec.lyapunov = (loss - *p_.optimum) + eta * l * (loss_est - *p_.optimum) +
                           l * vec::dist_sq(theta, estimate);
        }
        samples_cum_ += consumed_samples;
        rec.samples_cum = samples_cum_;
        rec.mb_main = std::move(mb_main);
        rec.mb_estimate = std::move(mb_estimate);
        rec.micro_batches.resize(rec.mb_main.size());
        for (std::size_t w = 0; w < rec.micro_batches.size(); ++w) {
            rec.micro_batches[w] = rec.mb_main[w] + rec.mb_estimate[w];
            trace.consumed_micro_batches += rec.micro_batches[w];
        }

        double window = time - prev_commit_time_;
        rec.idle_frac.assign(static_cast<std::size_t>(sim_.n_workers), 0.0);
        for (int w = 0; w < sim_.n_workers; ++w) {
            double measure = busy_measure_[static_cast<std::size_t>(w)] +
                             busy_partial[static_cast<std::size_t>(w)];
            double busy = measure - busy_attributed_[static_cast<std::size_t>(w)];
            busy_attributed_[static_cast<std::size_t>(w)] = measure;
            rec.idle_frac[static_cast<std::size_t>(w)] =
                window > 0.0 ? std::max(0.0, (window - busy) / window) : 0.0;
        }
        prev_commit_time_ = time;

        trace.records.push_back(std::move(rec));
        trace.theta_history.push_back(theta);
        trace.estimate_history.push_back(estimate);
        if (opts_.record_details) {
            trace.consumed_bundles.push_back(std::move(bundles));
            trace.consumed_mean_grad.push_back(consumed_mean);
        }
        if (!std::isfinite(loss)) {
            trace.diverged = true;
            return false;
        }
        return true;
    }

private:
    const Problem& p_;
    const OptimizerConfig& cfg_;
    const SimConfig& sim_;
    const RunOptions& opts_;
    std::vector<double> busy_measure_;
    std::vector<double> busy_attributed_;
    double prev_commit_time_ = 0.0;
    long long samples_cum_ = 0;
};

std::vector<ConsumedBundle> to_consumed(const std::vector<Bundle>& bundles) {
    std::vector<ConsumedBundle> out(bundles.size());
    for (std::size_t w = 0; w < bundles.size(); ++w) {
        out[w].grad_sum = bundles[w].grad_sum;
        out[w].samples = bundles[w].samples;
    }
    return out;
}

std::vector<double> reduce_mean(const Fabric& fabric, const std::vector<Bundle>& bundles,
                                long long& total_out) {
    std::vector<std::vector<double>> sums;
    std::vector<long long> counts;
    sums.reserve(bundles.size());
    for (const Bundle& b : bundles) {
        sums.push_back(b.grad_sum);
        counts.push_back(b.samples);
    }
    std::vector<double> sum = fabric.all_reduce(sums);
    long long total = fabric.all_reduce_counts(counts);
    if (total <= 0) throw std::logic_error("protocol: zero consumed samples");
    vec::scale(sum, 1.0 / static_cast<double>(total));
    total_out = total;
    return sum;
}

void check_replicas(const std::vector<std::vector<double>>& replicas) {
    for (std::size_t w = 1; w < replicas.size(); ++w)
        if (replicas[w] != replicas[0])
            throw std::logic_error("protocol: parameter divergence across workers");
}

// ---------------------------------------------------------------------------
// synchronous-family engine (ddp, dpu, wp); rounds are closed-form, so the
// schedule is emitted directly instead of through the event queue

class SyncEngine {
public:
    SyncEngine(Method method, const Problem& p, const OptimizerConfig& cfg,
               const SimConfig& sim, int t_updates, const RunOptions& opts,
               std::vector<double> theta0)
        : method_(method), p_(p), cfg_(cfg), sim_(sim), t_updates_(t_updates),
          opts_(opts), fabric_(sim.n_workers), builder_(p, cfg, sim, opts),
          theta_(std::move(theta0)) {
        n_ = sim_.n_workers;
        estimate_ = theta_;
        replicas_.assign(static_cast<std::size_t>(n_), theta_);
        state_ = OptimizerState::for_range(cfg_, 0, static_cast<std::size_t>(p_.dim));
        builder_.set_initial(theta_, estimate_);
    }

    RunTrace run() {
        for (int r = 0; r < t_updates_; ++r) {
            bool warm = method_ == Method::dpu && r < sim_.warmup_rounds;
            bool ok = method_ == Method::ddp || warm ? ddp_round(r)
                      : method_ == Method::dpu       ? dpu_round(r)
                                                     : wp_round(r);
            if (!ok) break;
        }
        // gradients computed for a next round that never commits
        for (const Bundle& b : pending_) builder_.trace.discarded_micro_batches += b.micro;
        builder_.trace.timeline.end_time = now_;
        return std::move(builder_.trace);
    }

private:
    Method method_;
    const Problem& p_;
    const OptimizerConfig& cfg_;
    const SimConfig& sim_;
    int t_updates_;
    const RunOptions& opts_;
    Fabric fabric_;
    TraceBuilder builder_;

    int n_ = 1;
    std::vector<double> theta_;
    std::vector<double> estimate_;  // params the in-flight gradients use
    std::vector<std::vector<double>> replicas_;
    OptimizerState state_;
    std::vector<Bundle> pending_;  // gradients awaiting their optimizer step
    double now_ = 0.0;

    double all_reduce_time() const {
        return collective_time(Collective::all_reduce, static_cast<std::size_t>(p_.dim),
                               n_, sim_.cost);
    }

    Bundle compute_bundle(int w, std::uint64_t round, std::uint64_t tag, int k,
                          const std::vector<double>& params, double start) {
        Bundle b;
        for (int j = 0; j < k; ++j) {
            b.add(stochastic_grad(p_, params, make_batch(sim_, round, tag, w, j)));
            builder_.trace.issued_micro_batches += 1;
        }
        double dur = k * sim_.hetero.worker_seconds(w);
        builder_.trace.timeline.intervals.push_back(
            {w, StreamKind::compute, tag == kTagInit ? "init_grad" : "microbatch",
             start, start + dur, k, 0});
        builder_.add_busy(w, dur);
        return b;
    }

    void emit_comm(double start, double dur) {
        long long bytes = static_cast<long long>(p_.dim) * sim_.cost.bytes_per_element;
        for (int w = 0; w < n_; ++w)
            builder_.trace.timeline.intervals.push_back(
                {w, StreamKind::comm, "all_reduce", start, start + dur, 0, bytes});
    }

    void replicate() {
        for (auto& r : replicas_) r = theta_;
        check_replicas(replicas_);
    }

    // estimate_override empty: the estimate params are the fresh theta (ddp)
    bool apply_and_commit(int r, double commit_time, std::vector<Bundle> consumed,
                          std::vector<double> estimate_override,
                          const std::vector<double>& busy_partial) {
        long long total = 0;
        std::vector<double> mean = reduce_mean(fabric_, consumed, total);
        if (!vec::all_finite(mean)) {
            builder_.trace.diverged = true;
            return false;
        }
        auto [next, updated] = opt_step(std::move(state_), theta_, mean, cfg_);
        state_ = std::move(next);
        theta_ = std::move(updated);
        replicate();
        estimate_ = estimate_override.empty() ? theta_ : std::move(estimate_override);

        std::vector<int> mb(static_cast<std::size_t>(n_), 0);
        for (int w = 0; w < n_; ++w) mb[static_cast<std::size_t>(w)] = consumed[static_cast<std::size_t>(w)].micro;
        return builder_.commit(r, commit_time, theta_, estimate_, total, std::move(mb),
                               std::vector<int>(static_cast<std::size_t>(n_), 0),
                               busy_partial, to_consumed(consumed), mean);
    }

    // fully synchronous: compute at theta, reduce, apply immediately
    bool ddp_round(int r) {
        check_replicas(replicas_);
        double start = now_;
        std::vector<Bundle> bundles(static_cast<std::size_t>(n_));
        double barrier = start;
        for (int w = 0; w < n_; ++w) {
            bundles[static_cast<std::size_t>(w)] = compute_bundle(
                w, static_cast<std::uint64_t>(r), kTagMain, sim_.n_grad_accumulation,
                theta_, start);
            barrier = std::max(barrier,
                               start + sim_.n_grad_accumulation * sim_.hetero.worker_seconds(w));
        }
        double t_comm = all_reduce_time();
        emit_comm(barrier, t_comm);
        now_ = barrier + t_comm;
        return apply_and_commit(r, now_, std::move(bundles), {},
                                std::vector<double>(static_cast<std::size_t>(n_), 0.0));
    }

    void seed_pending(std::uint64_t round, const std::vector<double>& params) {
        pending_.assign(static_cast<std::size_t>(n_), Bundle{});
        double start = now_;
        double longest = 0.0;
        for (int w = 0; w < n_; ++w) {
            pending_[static_cast<std::size_t>(w)] =
                compute_bundle(w, round, kTagInit, 1, params, start);
            longest = std::max(longest, sim_.hetero.worker_seconds(w));
        }
        now_ = start + longest;
    }

    // optimizer applies the previous round's gradients while new ones are
    // computed at the current committed params (one-step delay law)
    bool dpu_round(int r) {
        check_replicas(replicas_);
        if (pending_.empty()) seed_pending(static_cast<std::uint64_t>(r), theta_);
        double start = now_;

        std::vector<double> params_for_compute = theta_;
        std::vector<Bundle> fresh(static_cast<std::size_t>(n_));
        double compute_end = start;
        for (int w = 0; w < n_; ++w) {
            fresh[static_cast<std::size_t>(w)] = compute_bundle(
                w, static_cast<std::uint64_t>(r), kTagMain, sim_.n_grad_accumulation,
                params_for_compute, start);
            compute_end = std::max(compute_end,
                                   start + sim_.n_grad_accumulation * sim_.hetero.worker_seconds(w));
        }
        double t_comm = all_reduce_time();
        emit_comm(start, t_comm);
        now_ = std::max(compute_end, start + t_comm);

        std::vector<Bundle> consumed = std::move(pending_);
        pending_ = std::move(fresh);
        // the applied gradients were evaluated at the previous committed params
        return apply_and_commit(r, now_, std::move(consumed), std::move(params_for_compute),
                                std::vector<double>(static_cast<std::size_t>(n_), 0.0));
    }

    // both optimizer steps reuse the same delayed gradient; new gradients are
    // computed at the fresh prediction
    bool wp_round(int r) {
        check_replicas(replicas_);
        if (pending_.empty()) seed_pending(static_cast<std::uint64_t>(r), estimate_);
        double start = now_;

        long long total = 0;
        std::vector<Bundle> consumed = std::move(pending_);
        std::vector<double> mean = reduce_mean(fabric_, consumed, total);
        if (!vec::all_finite(mean)) {
            builder_.trace.diverged = true;
            return false;
        }
        auto [next, updated] = opt_step(std::move(state_), theta_, mean, cfg_);
        state_ = std::move(next);
        theta_ = std::move(updated);
        replicate();
        // prediction step on a throwaway state copy; committed moments stay
        // a function of the true update sequence
        OptimizerState transient = state_;
        auto [ignored, predicted] = opt_step(std::move(transient), theta_, mean, cfg_);
        (void)ignored;
        estimate_ = std::move(predicted);

        std::vector<Bundle> fresh(static_cast<std::size_t>(n_));
        double compute_end = start;
        for (int w = 0; w < n_; ++w) {
            fresh[static_cast<std::size_t>(w)] = compute_bundle(
                w, static_cast<std::uint64_t>(r), kTagMain, sim_.n_grad_accumulation,
                estimate_, start);
            compute_end = std::max(compute_end,
                                   start + sim_.n_grad_accumulation * sim_.hetero.worker_seconds(w));
        }
        double t_comm = all_reduce_time();
        emit_comm(start, t_comm);
        now_ = std::max(compute_end, start + t_comm);
        pending_ = std::move(fresh);

        std::vector<int> mb(static_cast<std::size_t>(n_), 0);
        for (int w = 0; w < n_; ++w) mb[static_cast<std::size_t>(w)] = consumed[static_cast<std::size_t>(w)].micro;
        return builder_.commit(r, now_, theta_, estimate_, total, std::move(mb),
                               std::vector<int>(static_cast<std::size_t>(n_), 0),
                               std::vector<double>(static_cast<std::size_t>(n_), 0.0),
                               to_consumed(consumed), mean);
    }
};

// ---------------------------------------------------------------------------
// two-stage overlapped engine (acco), event-driven
//
// Phases alternate on the comm stream: even phase 2t commits the estimate
// params for round t, odd phase 2t+1 commits round t's full update. Each
// worker's compute stream accumulates micro-batches until the phase it waits
// on completes, so it never idles; a stage always contributes at least one
// micro-batch.

class AccoEngine {
public:
    AccoEngine(const Problem& p, const OptimizerConfig& cfg, const SimConfig& sim,
               int t_updates, const RunOptions& opts, std::vector<double> theta0)
        : p_(p), cfg_(cfg), sim_(sim), t_updates_(t_updates), opts_(opts),
          fabric_(sim.n_workers),
          layout_(shard_partition(static_cast<std::size_t>(p.dim), sim.n_workers)),
          builder_(p, cfg, sim, opts), theta0_(std::move(theta0)) {
        n_ = sim_.n_workers;
        total_phases_ = 2 * t_updates_;
    }

    RunTrace run() {
        worker_theta_.assign(static_cast<std::size_t>(n_), theta0_);
        worker_estimate_.assign(static_cast<std::size_t>(n_), theta0_);
        for (int w = 0; w < n_; ++w)
            shard_states_.push_back(OptimizerState::for_range(cfg_, layout_.lo(w), layout_.hi(w)));
        phase_inputs_.assign(static_cast<std::size_t>(total_phases_),
                             std::vector<Bundle>(static_cast<std::size_t>(n_)));
        phase_posted_.assign(static_cast<std::size_t>(total_phases_), 0);
        phase_last_post_.assign(static_cast<std::size_t>(total_phases_), 0.0);
        wait_phase_.assign(static_cast<std::size_t>(n_), 0);
        acc_.assign(static_cast<std::size_t>(n_), Bundle{});
        compute_params_.assign(static_cast<std::size_t>(n_), theta0_);
        stage_round_.assign(static_cast<std::size_t>(n_), 0);
        stage_tag_.assign(static_cast<std::size_t>(n_), kTagMain);
        mb_ordinal_.assign(static_cast<std::size_t>(n_), 0);
        mb_started_at_.assign(static_cast<std::size_t>(n_), 0.0);
        computing_.assign(static_cast<std::size_t>(n_), false);
        builder_.set_initial(theta0_, theta0_);

        // bootstrap: one micro-batch at theta0 seeds the estimate accumulator
        for (int w = 0; w < n_; ++w) {
            double dur = sim_.hetero.worker_seconds(w);
            mb_started_at_[static_cast<std::size_t>(w)] = 0.0;
            computing_[static_cast<std::size_t>(w)] = true;
            clock_.at(dur, {w, StreamKind::compute}, [this, w] { on_init_done(w); });
        }

        while (!halted_) {
            if (!clock_.step())
                throw std::runtime_error(
                    "acco: deadlock, no enabled event at t=" + std::to_string(clock_.now()) +
                    " with " + std::to_string(committed_) + "/" +
                    std::to_string(t_updates_) + " updates committed");
        }
        for (const Bundle& b : acc_) builder_.trace.discarded_micro_batches += b.micro;
        builder_.trace.timeline.end_time = end_time_;
        return std::move(builder_.trace);
    }

private:
    const Problem& p_;
    const OptimizerConfig& cfg_;
    const SimConfig& sim_;
    int t_updates_;
    const RunOptions& opts_;
    Fabric fabric_;
    ShardLayout layout_;
    TraceBuilder builder_;
    std::vector<double> theta0_;
    EventClock clock_;

    int n_ = 1;
    int total_phases_ = 0;
    std::vector<std::vector<double>> worker_theta_;
    std::vector<std::vector<double>> worker_estimate_;
    std::vector<OptimizerState> shard_states_;
    int committed_ = 0;
    bool halted_ = false;
    double end_time_ = 0.0;

    std::vector<std::vector<Bundle>> phase_inputs_;
    std::vector<int> phase_posted_;
    std::vector<double> phase_last_post_;
    int comm_done_upto_ = -1;
    double comm_free_at_ = 0.0;
    std::vector<std::vector<double>> retained_est_shards_;
    std::vector<Bundle> retained_est_bundles_;
    long long retained_est_samples_ = 0;

    std::vector<int> wait_phase_;
    std::vector<Bundle> acc_;
    std::vector<std::vector<double>> compute_params_;
    std::vector<std::uint64_t> stage_round_;
    std::vector<std::uint64_t> stage_tag_;
    std::vector<int> mb_ordinal_;
    std::vector<double> mb_started_at_;
    std::vector<bool> computing_;

    void start_micro_batch(int w, double t) {
        mb_started_at_[static_cast<std::size_t>(w)] = t;
        computing_[static_cast<std::size_t>(w)] = true;
        double dur = sim_.hetero.worker_seconds(w);
        clock_.at(t + dur, {w, StreamKind::compute}, [this, w] { on_mb_done(w); });
    }

    void log_compute(int w, double t_end, const char* kind) {
        double dur = sim_.hetero.worker_seconds(w);
        builder_.trace.timeline.intervals.push_back(
            {w, StreamKind::compute, kind, t_end - dur, t_end, 1, 0});
        builder_.add_busy(w, dur);
        computing_[static_cast<std::size_t>(w)] = false;
    }

    void on_init_done(int w) {
        double t = clock_.now();
        Bundle seed;
        seed.add(stochastic_grad(p_, compute_params_[static_cast<std::size_t>(w)],
                                 make_batch(sim_, 0, kTagInit, w, 0)));
        builder_.trace.issued_micro_batches += 1;
        log_compute(w, t, "init_grad");
        post(0, w, std::move(seed), t);
        // enter round-0 stage 1: accumulate committed-half gradients at theta0
        start_micro_batch(w, t);
    }

    void on_mb_done(int w) {
        if (halted_) return;
        double t = clock_.now();
        acc_[static_cast<std::size_t>(w)].add(stochastic_grad(
            p_, compute_params_[static_cast<std::size_t>(w)],
            make_batch(sim_, stage_round_[static_cast<std::size_t>(w)],
                       stage_tag_[static_cast<std::size_t>(w)], w,
                       mb_ordinal_[static_cast<std::size_t>(w)])));
        mb_ordinal_[static_cast<std::size_t>(w)] += 1;
        builder_.trace.issued_micro_batches += 1;
        log_compute(w, t, "microbatch");

        // a stage needs its configured accumulation floor and the completed
        // collective before handing off; otherwise keep accumulating
        bool floor_met = acc_[static_cast<std::size_t>(w)].micro >= sim_.n_grad_accumulation;
        if (floor_met && comm_done_upto_ >= wait_phase_[static_cast<std::size_t>(w)]) {
            transition(w, t);
        } else {
            start_micro_batch(w, t);
        }
    }

    void transition(int w, double t) {
        int q = wait_phase_[static_cast<std::size_t>(w)];
        if (q + 1 >= total_phases_) {
            // no further commit will consume this stage's work
            builder_.trace.discarded_micro_batches += acc_[static_cast<std::size_t>(w)].micro;
            acc_[static_cast<std::size_t>(w)].reset();
            return;
        }
        post(q + 1, w, std::move(acc_[static_cast<std::size_t>(w)]), t);
        acc_[static_cast<std::size_t>(w)].reset();
        if (q % 2 == 0) {
            // finished round t=q/2 stage 1 -> stage 2 at the fresh estimate
            compute_params_[static_cast<std::size_t>(w)] = worker_estimate_[static_cast<std::size_t>(w)];
            stage_round_[static_cast<std::size_t>(w)] = static_cast<std::uint64_t>(q / 2 + 1);
            stage_tag_[static_cast<std::size_t>(w)] = kTagEstimate;
        } else {
            // finished round (q-1)/2 stage 2 -> next round stage 1
            compute_params_[static_cast<std::size_t>(w)] = worker_theta_[static_cast<std::size_t>(w)];
            stage_round_[static_cast<std::size_t>(w)] = static_cast<std::uint64_t>((q + 1) / 2);
            stage_tag_[static_cast<std::size_t>(w)] = kTagMain;
        }
        wait_phase_[static_cast<std::size_t>(w)] = q + 1;
        mb_ordinal_[static_cast<std::size_t>(w)] = 0;
        start_micro_batch(w, t);
    }

    void post(int phase, int w, Bundle b, double t) {
        if (b.micro < 1) throw std::logic_error("acco: empty accumulator at barrier");
        phase_inputs_[static_cast<std::size_t>(phase)][static_cast<std::size_t>(w)] = std::move(b);
        phase_posted_[static_cast<std::size_t>(phase)] += 1;
        phase_last_post_[static_cast<std::size_t>(phase)] =
            std::max(phase_last_post_[static_cast<std::size_t>(phase)], t);
        if (phase_posted_[static_cast<std::size_t>(phase)] == n_)
            schedule_comm(phase, std::max(phase_last_post_[static_cast<std::size_t>(phase)],
                                          comm_free_at_));
    }

    void schedule_comm(int phase, double start) {
        const std::size_t d = static_cast<std::size_t>(p_.dim);
        double t_counts = collective_time(Collective::all_reduce, 1, n_, sim_.cost);
        double t_rs = collective_time(Collective::reduce_scatter, d, n_, sim_.cost);
        double t_ag = collective_time(Collective::all_gather, d, n_, sim_.cost);
        long long vec_bytes = static_cast<long long>(d) * sim_.cost.bytes_per_element;
        for (int w = 0; w < n_; ++w) {
            auto& tl = builder_.trace.timeline.intervals;
            tl.push_back({w, StreamKind::comm, "all_reduce", start, start + t_counts, 0,
                          sim_.cost.bytes_per_element});
            tl.push_back({w, StreamKind::comm, "reduce_scatter", start + t_counts,
                          start + t_counts + t_rs, 0, vec_bytes});
            tl.push_back({w, StreamKind::comm, "all_gather", start + t_counts + t_rs,
                          start + t_counts + t_rs + t_ag, 0, vec_bytes});
        }
        double done = start + t_counts + t_rs + t_ag;
        comm_free_at_ = done;
        clock_.at(done, {0, StreamKind::comm}, [this, phase] { on_comm_done(phase); });
    }

    void on_comm_done(int phase) {
        double t = clock_.now();
        comm_done_upto_ = phase;
        auto& bundles = phase_inputs_[static_cast<std::size_t>(phase)];

        std::vector<std::vector<double>> sums;
        std::vector<long long> counts;
        for (const Bundle& b : bundles) {
            sums.push_back(b.grad_sum);
            counts.push_back(b.samples);
        }
        long long total = fabric_.all_reduce_counts(counts);
        std::vector<std::vector<double>> shards = fabric_.reduce_scatter(sums, layout_);

        if (phase % 2 == 0) {
            // estimate commit: transient optimizer states, moments not kept
            retained_est_shards_ = shards;
            retained_est_samples_ = total;
            retained_est_bundles_ = bundles;
            std::vector<std::vector<double>> mean_shards = std::move(shards);
            for (auto& s : mean_shards) vec::scale(s, 1.0 / static_cast<double>(total));
            std::vector<OptimizerState> transient = shard_states_;
            std::vector<double> estimate = sharded_opt_step(
                transient, worker_theta_[0], mean_shards, cfg_, layout_, fabric_);
            for (auto& e : worker_estimate_) e = estimate;
            check_replicas(worker_estimate_);
        } else {
            int update = (phase - 1) / 2;
            long long combined_total = total + retained_est_samples_;
            std::vector<std::vector<double>> mean_shards = std::move(shards);
            for (int w = 0; w < n_; ++w) {
                auto& s = mean_shards[static_cast<std::size_t>(w)];
                const auto& est = retained_est_shards_[static_cast<std::size_t>(w)];
                for (std::size_t j = 0; j < s.size(); ++j) s[j] += est[j];
                vec::scale(s, 1.0 / static_cast<double>(combined_total));
            }
            std::vector<double> theta = sharded_opt_step(
                shard_states_, worker_theta_[0], mean_shards, cfg_, layout_, fabric_);
            for (auto& th : worker_theta_) th = theta;
            check_replicas(worker_theta_);

            std::vector<int> mb_main(static_cast<std::size_t>(n_), 0);
            std::vector<int> mb_est(static_cast<std::size_t>(n_), 0);
            std::vector<ConsumedBundle> consumed(static_cast<std::size_t>(n_));
            for (int w = 0; w < n_; ++w) {
                const Bundle& main = bundles[static_cast<std::size_t>(w)];
                const Bundle& est = retained_est_bundles_[static_cast<std::size_t>(w)];
                mb_main[static_cast<std::size_t>(w)] = main.micro;
                mb_est[static_cast<std::size_t>(w)] = est.micro;
                consumed[static_cast<std::size_t>(w)].grad_sum = main.grad_sum;
                vec::axpy(1.0, est.grad_sum, consumed[static_cast<std::size_t>(w)].grad_sum);
                consumed[static_cast<std::size_t>(w)].samples = main.samples + est.samples;
            }
            std::vector<double> busy_partial(static_cast<std::size_t>(n_), 0.0);
            for (int w = 0; w < n_; ++w)
                if (computing_[static_cast<std::size_t>(w)])
                    busy_partial[static_cast<std::size_t>(w)] =
                        t - mb_started_at_[static_cast<std::size_t>(w)];

            std::vector<double> mean_full(static_cast<std::size_t>(p_.dim), 0.0);
            for (int w = 0; w < n_; ++w) {
                std::size_t lo = layout_.lo(w);
                const auto& s = mean_shards[static_cast<std::size_t>(w)];
                for (std::size_t j = 0; j < s.size(); ++j) mean_full[lo + j] = s[j];
            }

            bool ok = builder_.commit(update, t, theta, worker_estimate_[0], combined_total,
                                      std::move(mb_main), std::move(mb_est), busy_partial,
                                      std::move(consumed), mean_full);
            committed_ += 1;
            if (!ok || committed_ == t_updates_) {
                halted_ = true;
                end_time_ = t;
            }
        }
    }
};

}  // namespace

RunTrace run_protocol(Method method, const Problem& problem, OptimizerConfig opt_cfg,
                      const SimConfig& sim, int t_updates, const RunOptions& opts) {
    if (t_updates < 1) throw std::invalid_argument("run_protocol: t_updates >= 1");
    if (sim.n_workers < 1) throw std::invalid_argument("run_protocol: n_workers >= 1");
    if (sim.batch_size < 1) throw std::invalid_argument("run_protocol: batch_size >= 1");
    if (sim.n_grad_accumulation < 1)
        throw std::invalid_argument("run_protocol: n_grad_accumulation >= 1");
    if (sim.warmup_rounds < 0)
        throw std::invalid_argument("run_protocol: warmup_rounds >= 0");
    if (!sim.hetero.multipliers.empty() &&
        static_cast<int>(sim.hetero.multipliers.size()) != sim.n_workers)
        throw std::invalid_argument("run_protocol: one multiplier per worker");
    for (double m : sim.hetero.multipliers)
        if (!(m > 0.0)) throw std::invalid_argument("run_protocol: multipliers > 0");
    if (!(opt_cfg.learning_rate > 0.0))
        throw std::invalid_argument("run_protocol: learning_rate > 0");
    if (opt_cfg.total_steps == 0) opt_cfg.total_steps = t_updates;

    std::vector<double> theta0 =
        opts.theta0.empty() ? default_theta0(problem, sim.master_seed) : opts.theta0;
    if (static_cast<int>(theta0.size()) != problem.dim)
        throw std::invalid_argument("run_protocol: theta0 dimension mismatch");

    if (method == Method::acco) {
        AccoEngine engine(problem, opt_cfg, sim, t_updates, opts, std::move(theta0));
        return engine.run();
    }
    SyncEngine engine(method, problem, opt_cfg, sim, t_updates, opts, std::move(theta0));
    return engine.run();
}

}  // namespace accosim
