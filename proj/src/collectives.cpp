#include "accosim/collectives.hpp"

#include <stdexcept>

namespace accosim {

std::string to_string(Collective c) {
    switch (c) {
        case Collective::all_reduce: return "all_reduce";
        case Collective::reduce_scatter: return "reduce_scatter";
        case Collective::all_gather: return "all_gather";
    }
    return "?";
}

double collective_time(Collective kind, std::size_t n_elements, int n_workers,
                       const CostModel& model) {
    if (n_workers < 1) throw std::invalid_argument("collective_time: n_workers >= 1");
    if (n_workers == 1) return 0.0;
    double bytes = static_cast<double>(n_elements) * model.bytes_per_element;
    double ring = model.beta_s_per_byte * model.topology_factor * bytes *
                  (static_cast<double>(n_workers - 1) / n_workers);
    double passes = kind == Collective::all_reduce ? 2.0 : 1.0;
    return model.alpha_s + passes * ring;
}

Fabric::Fabric(int n_workers) : n_(n_workers) {
    if (n_workers < 1) throw std::invalid_argument("Fabric: n_workers >= 1");
}

void Fabric::check_count(std::size_t got) const {
    if (got != static_cast<std::size_t>(n_))
        throw std::invalid_argument("Fabric: expected one input per worker");
}

std::vector<double> Fabric::all_reduce(const std::vector<std::vector<double>>& inputs) const {
    check_count(inputs.size());
    std::vector<double> out = inputs[0];
    for (int w = 1; w < n_; ++w) {
        const auto& in = inputs[static_cast<std::size_t>(w)];
        if (in.size() != out.size())
            throw std::invalid_argument("all_reduce: dimension mismatch");
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += in[j];
    }
    return out;
}

long long Fabric::all_reduce_counts(const std::vector<long long>& inputs) const {
    check_count(inputs.size());
    long long total = 0;
    for (long long c : inputs) total += c;
    return total;
}

std::vector<std::vector<double>> Fabric::reduce_scatter(
    const std::vector<std::vector<double>>& inputs, const ShardLayout& layout) const {
    check_count(inputs.size());
    if (layout.n_workers() != n_)
        throw std::invalid_argument("reduce_scatter: layout worker count mismatch");
    for (const auto& in : inputs)
        if (in.size() != layout.dim)
            throw std::invalid_argument("reduce_scatter: dimension mismatch");

    std::vector<std::vector<double>> shards(static_cast<std::size_t>(n_));
    for (int owner = 0; owner < n_; ++owner) {
        std::size_t lo = layout.lo(owner), hi = layout.hi(owner);
        std::vector<double> sum(inputs[0].begin() + static_cast<std::ptrdiff_t>(lo),
                                inputs[0].begin() + static_cast<std::ptrdiff_t>(hi));
        for (int w = 1; w < n_; ++w)
            for (std::size_t j = lo; j < hi; ++j)
                sum[j - lo] += inputs[static_cast<std::size_t>(w)][j];
        shards[static_cast<std::size_t>(owner)] = std::move(sum);
    }
    return shards;
}

std::vector<double> Fabric::all_gather(const std::vector<std::vector<double>>& shards,
                                       const ShardLayout& layout) const {
    check_count(shards.size());
    if (layout.n_workers() != n_)
        throw std::invalid_argument("all_gather: layout worker count mismatch");
    std::vector<double> full(layout.dim, 0.0);
    for (int w = 0; w < n_; ++w) {
        const auto& shard = shards[static_cast<std::size_t>(w)];
        if (shard.size() != layout.size(w))
            throw std::invalid_argument("all_gather: shard length mismatch");
        std::size_t lo = layout.lo(w);
        for (std::size_t j = 0; j < shard.size(); ++j) full[lo + j] = shard[j];
    }
    return full;
}

}  // namespace accosim
