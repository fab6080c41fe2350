#include "accosim/parallel.hpp"

#include <atomic>

namespace accosim::par {

namespace {
std::atomic<bool> g_enabled{true};
}

bool enabled() {
#if defined(_OPENMP)
    return g_enabled.load(std::memory_order_relaxed);
#else
    return false;
#endif
}

void set_enabled(bool on) { g_enabled.store(on, std::memory_order_relaxed); }

int max_threads() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace accosim::par
