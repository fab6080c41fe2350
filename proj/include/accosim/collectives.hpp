#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "accosim/shard.hpp"

namespace accosim {

// Latency + bandwidth accounting for ring-style collectives.
struct CostModel {
    double alpha_s = 0.0;          // latency per collective
    double beta_s_per_byte = 0.0;  // inverse bandwidth
    int bytes_per_element = 8;
    double topology_factor = 1.0;  // intra- vs inter-node multiplier
};

enum class Collective { all_reduce, reduce_scatter, all_gather };

std::string to_string(Collective c);

// Ring accounting: all_reduce moves each byte twice, reduce_scatter and
// all_gather once, always scaled by (N-1)/N. A single worker costs nothing.
double collective_time(Collective kind, std::size_t n_elements, int n_workers,
                       const CostModel& model);

// Value-level collectives with a fixed reduction order (ascending worker id),
// so results are bitwise reproducible and reduce_scatter + all_gather agrees
// exactly with all_reduce.
class Fabric {
public:
    explicit Fabric(int n_workers);

    int n_workers() const { return n_; }

    std::vector<double> all_reduce(const std::vector<std::vector<double>>& inputs) const;
    long long all_reduce_counts(const std::vector<long long>& inputs) const;

    std::vector<std::vector<double>> reduce_scatter(
        const std::vector<std::vector<double>>& inputs, const ShardLayout& layout) const;

    std::vector<double> all_gather(const std::vector<std::vector<double>>& shards,
                                   const ShardLayout& layout) const;

private:
    int n_;
    void check_count(std::size_t got) const;
};

}  // namespace accosim
