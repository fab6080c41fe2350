#pragma once

#include <cstddef>

#if defined(_OPENMP)
#include <omp.h>
#endif

// OpenMP helpers. Parallel loops here are restricted to independent-slot
// work (each index writes its own result), so output is bitwise identical
// to the serial reference for any thread count. The serial path is kept
// selectable at runtime for tests and benchmarks.

namespace accosim::par {

bool enabled();
void set_enabled(bool on);
int max_threads();

// results-slot map: body(i) for i in [0, n), parallel when enabled
template <class Body>
void for_index(std::size_t n, Body&& body) {
    if (enabled()) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            body(static_cast<std::size_t>(i));
        return;
#endif
    }
    for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace accosim::par
