#include "accosim/simclock.hpp"

#include <algorithm>
#include <stdexcept>

namespace accosim {

std::string to_string(StreamKind s) {
    return s == StreamKind::comm ? "comm" : "compute";
}

void EventClock::at(double t, StreamId stream, Action action) {
    if (t < now_) throw std::logic_error("EventClock: scheduling into the past");
    queue_.push(Ev{t, static_cast<int>(stream.kind), stream.worker, seq_++,
                   std::move(action)});
}

bool EventClock::step() {
    if (queue_.empty()) return false;
    Ev ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.action();
    return true;
}

void EventClock::run_until_idle() {
    while (step()) {
    }
}

void EventClock::clear() {
    while (!queue_.empty()) queue_.pop();
}

double Timeline::busy_within(int worker, StreamKind stream, double t0, double t1) const {
    double busy = 0.0;
    for (const Interval& iv : intervals) {
        if (iv.worker != worker || iv.stream != stream) continue;
        double lo = std::max(iv.t_start, t0);
        double hi = std::min(iv.t_end, t1);
        if (hi > lo) busy += hi - lo;
    }
    return busy;
}

}  // namespace accosim
