#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace accosim {

// Contiguous partition of [0, dim) into one index range per worker.
// Ranges are disjoint, sorted and cover [0, dim) exactly; trailing ranges
// may be empty when there are more workers than coordinates.
struct ShardLayout {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [lo, hi)
    std::size_t dim = 0;

    int n_workers() const { return static_cast<int>(ranges.size()); }
    std::size_t lo(int w) const { return ranges[static_cast<std::size_t>(w)].first; }
    std::size_t hi(int w) const { return ranges[static_cast<std::size_t>(w)].second; }
    std::size_t size(int w) const { return hi(w) - lo(w); }
};

// Near-equal split: the first (dim mod n) ranges get one extra element.
inline ShardLayout shard_partition(std::size_t dim, int n) {
    if (n < 1) throw std::invalid_argument("shard_partition: need at least one worker");
    ShardLayout layout;
    layout.dim = dim;
    layout.ranges.reserve(static_cast<std::size_t>(n));
    std::size_t base = dim / static_cast<std::size_t>(n);
    std::size_t extra = dim % static_cast<std::size_t>(n);
    std::size_t lo = 0;
    for (int w = 0; w < n; ++w) {
        std::size_t len = base + (static_cast<std::size_t>(w) < extra ? 1 : 0);
        layout.ranges.emplace_back(lo, lo + len);
        lo += len;
    }
    return layout;
}

}  // namespace accosim
