#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <vector>

namespace accosim {

// Two logical streams per worker. Comm sorts before compute so that a
// collective completing at the same instant as a micro-batch commits first.
enum class StreamKind { comm = 0, compute = 1 };

std::string to_string(StreamKind s);

struct StreamId {
    int worker = 0;
    StreamKind kind = StreamKind::compute;
};

// Discrete-event clock. Events run in nondecreasing time order; ties break
// by (stream kind, worker id, insertion order), which makes every run fully
// deterministic.
class EventClock {
public:
    using Action = std::function<void()>;

    double now() const { return now_; }
    std::size_t pending() const { return queue_.size(); }

    void at(double t, StreamId stream, Action action);
    bool step();          // run the earliest event; false when queue empty
    void run_until_idle();
    void clear();

private:
    struct Ev {
        double t;
        int kind;
        int worker;
        std::uint64_t seq;
        Action action;
    };
    struct Later {
        bool operator()(const Ev& a, const Ev& b) const {
            if (a.t != b.t) return a.t > b.t;
            if (a.kind != b.kind) return a.kind > b.kind;
            if (a.worker != b.worker) return a.worker > b.worker;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Ev, std::vector<Ev>, Later> queue_;
    double now_ = 0.0;
    std::uint64_t seq_ = 0;
};

// One busy interval of one stream.
struct Interval {
    int worker = 0;
    StreamKind stream = StreamKind::compute;
    std::string kind;  // microbatch | init_grad | all_reduce | reduce_scatter | all_gather
    double t_start = 0.0;
    double t_end = 0.0;
    int micro_batches = 0;
    long long bytes = 0;
};

struct Timeline {
    std::vector<Interval> intervals;
    double end_time = 0.0;

    // total busy time of one worker's stream inside [t0, t1]
    double busy_within(int worker, StreamKind stream, double t0, double t1) const;
};

}  // namespace accosim
