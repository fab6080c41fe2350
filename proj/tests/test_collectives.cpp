#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "accosim/collectives.hpp"
#include "accosim/rng.hpp"
#include "accosim/simclock.hpp"

using namespace accosim;

TEST_CASE("all_reduce sums element-wise and replicates") {
    Fabric f3(3);
    auto sum = f3.all_reduce({{1.0}, {2.0}, {3.0}});
    CHECK(sum == std::vector<double>{6.0});

    Fabric f1(1);
    CHECK(f1.all_reduce({{4.0, -2.0}}) == std::vector<double>{4.0, -2.0});

    Fabric f2(2);
    CHECK(f2.all_reduce({{1.0, 2.0}, {3.0, 4.0}}) == std::vector<double>{4.0, 6.0});
    CHECK(f2.all_reduce_counts({5, 7}) == 12);
}

TEST_CASE("all_reduce validates shapes") {
    Fabric f2(2);
    CHECK_THROWS_AS((void)f2.all_reduce({{1.0}, {1.0, 2.0}}), std::invalid_argument);
    CHECK_THROWS_AS((void)f2.all_reduce({{1.0}}), std::invalid_argument);
}

TEST_CASE("reduce_scatter distributes summed shards") {
    Fabric f2(2);
    ShardLayout layout = shard_partition(2, 2);
    auto shards = f2.reduce_scatter({{1.0, 2.0}, {3.0, 4.0}}, layout);
    CHECK(shards[0] == std::vector<double>{4.0});
    CHECK(shards[1] == std::vector<double>{6.0});
}

TEST_CASE("empty shard workers receive empty vectors") {
    Fabric f4(4);
    ShardLayout layout = shard_partition(3, 4);
    auto shards = f4.reduce_scatter(
        {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}}, layout);
    CHECK(shards[3].empty());
    CHECK(shards[0] == std::vector<double>{4.0});
    auto full = f4.all_gather(shards, layout);
    CHECK(full == std::vector<double>{4.0, 4.0, 4.0});
}

TEST_CASE("all_gather concatenates by layout order") {
    Fabric f2(2);
    ShardLayout layout = shard_partition(2, 2);
    CHECK(f2.all_gather({{4.0}, {6.0}}, layout) == std::vector<double>{4.0, 6.0});

    Fabric f1(1);
    ShardLayout one = shard_partition(3, 1);
    CHECK(f1.all_gather({{1.0, 2.0, 3.0}}, one) == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("gather of split vector reconstructs it") {
    ShardLayout layout = shard_partition(7, 3);
    Fabric f3(3);
    rng::Stream gen(9);
    std::vector<double> v(7);
    for (double& x : v) x = gen.gaussian();
    std::vector<std::vector<double>> shards;
    for (int w = 0; w < 3; ++w)
        shards.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(layout.lo(w)),
                            v.begin() + static_cast<std::ptrdiff_t>(layout.hi(w)));
    CHECK(f3.all_gather(shards, layout) == v);
}

TEST_CASE("reduce_scatter then all_gather equals all_reduce bitwise") {
    for (auto [d, n] : {std::pair<int, int>{7, 3}, {16, 4}, {5, 8}, {1, 1}}) {
        Fabric fabric(n);
        ShardLayout layout = shard_partition(static_cast<std::size_t>(d), n);
        std::vector<std::vector<double>> inputs;
        rng::Stream gen(rng::derive(3, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(n)));
        for (int w = 0; w < n; ++w) {
            std::vector<double> v(static_cast<std::size_t>(d));
            for (double& x : v) x = gen.gaussian();
            inputs.push_back(std::move(v));
        }
        CHECK(fabric.all_gather(fabric.reduce_scatter(inputs, layout), layout) ==
              fabric.all_reduce(inputs));
    }
}

TEST_CASE("shard collectives validate layouts") {
    Fabric f2(2);
    ShardLayout three = shard_partition(6, 3);
    std::vector<std::vector<double>> inputs = {{1, 2, 3, 4, 5, 6}, {1, 2, 3, 4, 5, 6}};
    CHECK_THROWS_AS((void)f2.reduce_scatter(inputs, three), std::invalid_argument);
    ShardLayout two = shard_partition(6, 2);
    CHECK_THROWS_AS((void)f2.all_gather({{1.0}, {2.0}}, two), std::invalid_argument);
    std::vector<std::vector<double>> short_in = {{1, 2}, {1, 2}};
    CHECK_THROWS_AS((void)f2.reduce_scatter(short_in, two), std::invalid_argument);
}

TEST_CASE("collective_time formulas") {
    CostModel m;
    m.beta_s_per_byte = 1e-9;

    SUBCASE("single worker is free") {
        for (Collective c : {Collective::all_reduce, Collective::reduce_scatter,
                             Collective::all_gather})
            CHECK(collective_time(c, 1000000, 1, m) == 0.0);
    }
    SUBCASE("ring all_reduce example") {
        CHECK(collective_time(Collective::all_reduce, 1000000, 4, m) ==
              doctest::Approx(0.012).epsilon(1e-14));
    }
    SUBCASE("split equals fused when latency-free") {
        double rs = collective_time(Collective::reduce_scatter, 4096, 6, m);
        double ag = collective_time(Collective::all_gather, 4096, 6, m);
        double ar = collective_time(Collective::all_reduce, 4096, 6, m);
        CHECK(rs + ag == ar);
    }
    SUBCASE("latency adds per collective") {
        m.alpha_s = 0.25;
        CHECK(collective_time(Collective::all_gather, 0, 2, m) == 0.25);
    }
    SUBCASE("topology factor scales bandwidth only") {
        m.topology_factor = 3.0;
        CHECK(collective_time(Collective::all_reduce, 1000000, 4, m) ==
              doctest::Approx(0.036).epsilon(1e-14));
    }
}

TEST_CASE("event clock orders ties deterministically") {
    EventClock clock;
    std::vector<std::string> order;
    clock.at(1.0, {2, StreamKind::compute}, [&] { order.push_back("compute2"); });
    clock.at(1.0, {0, StreamKind::compute}, [&] { order.push_back("compute0"); });
    clock.at(1.0, {1, StreamKind::comm}, [&] { order.push_back("comm1"); });
    clock.at(0.5, {3, StreamKind::compute}, [&] { order.push_back("early"); });
    clock.at(1.0, {0, StreamKind::compute}, [&] { order.push_back("compute0_again"); });
    clock.run_until_idle();
    // comm wins ties, then worker id, then insertion order
    CHECK(order == std::vector<std::string>{"early", "comm1", "compute0", "compute0_again",
                                            "compute2"});
    CHECK(clock.now() == 1.0);
}

TEST_CASE("event clock refuses to schedule into the past") {
    EventClock clock;
    clock.at(2.0, {0, StreamKind::compute}, [&] {
        CHECK_THROWS_AS(clock.at(1.0, {0, StreamKind::compute}, [] {}), std::logic_error);
    });
    clock.run_until_idle();
}

TEST_CASE("timeline busy accounting clips to the window") {
    Timeline tl;
    tl.intervals.push_back({0, StreamKind::compute, "microbatch", 0.0, 2.0, 1, 0});
    tl.intervals.push_back({0, StreamKind::compute, "microbatch", 3.0, 4.0, 1, 0});
    tl.intervals.push_back({1, StreamKind::compute, "microbatch", 0.0, 4.0, 1, 0});
    CHECK(tl.busy_within(0, StreamKind::compute, 1.0, 3.5) == doctest::Approx(1.5));
    CHECK(tl.busy_within(0, StreamKind::comm, 0.0, 4.0) == 0.0);
    CHECK(tl.busy_within(1, StreamKind::compute, 1.0, 2.0) == doctest::Approx(1.0));
}
