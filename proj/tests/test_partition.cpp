#include "qnetsim/net/generators.hpp"
#include "qnetsim/partition/anneal.hpp"
#include "qnetsim/partition/energy.hpp"
#include "qnetsim/partition/partition.hpp"
#include "qnetsim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace qnetsim;
using namespace qnetsim::part;

namespace
{
    net::Topology graph(std::size_t n, const std::vector<std::pair<EntityId, EntityId>>& edges,
                        std::vector<std::uint32_t> memories = {})
    {
        net::Topology t;
        for (EntityId i = 0; i < n; ++i)
            t.routers.push_back({i, memories.empty() ? 4u : memories[i]});
        for (auto [a, b] : edges)
        {
            t.qchannels.push_back({a, b, 1000.0, 0.2, SimTime{1000}});
            t.cchannels.push_back({a, b, SimTime{2000}});
        }
        return t;
    }

    net::Topology line4() { return graph(4, {{0, 1}, {1, 2}, {2, 3}}); }

    Partition assign(std::vector<WorkerId> a, std::size_t workers)
    {
        Partition p;
        p.num_workers = workers;
        p.assignment = std::move(a);
        return p;
    }

    // Connected random graph: random spanning tree plus extra edges, plus a
    // few sessions along random tree paths.
    net::Topology random_graph(SplitMix64& rng, std::size_t n)
    {
        std::vector<std::pair<EntityId, EntityId>> edges;
        std::set<std::pair<EntityId, EntityId>> seen;
        for (EntityId v = 1; v < n; ++v)
        {
            const auto u = static_cast<EntityId>(rng.below(v));
            edges.emplace_back(u, v);
            seen.emplace(u, v);
        }
        const std::size_t extra = rng.below(n);
        for (std::size_t i = 0; i < extra; ++i)
        {
            auto a = static_cast<EntityId>(rng.below(n)), b = static_cast<EntityId>(rng.below(n));
            if (a == b)
                continue;
            if (a > b)
                std::swap(a, b);
            if (seen.emplace(a, b).second)
                edges.emplace_back(a, b);
        }
        std::vector<std::uint32_t> mem(n);
        for (auto& m : mem)
            m = 1 + static_cast<std::uint32_t>(rng.below(16));
        net::Topology t = graph(n, edges, mem);
        for (std::uint32_t s = 0; s < 3; ++s)
        {
            const auto src = static_cast<EntityId>(rng.below(n));
            const auto dst = static_cast<EntityId>((src + 1 + rng.below(n - 1)) % n);
            net::SessionSpec spec;
            spec.id = s;
            spec.path = net::detail::shortest_path(t, src, dst);
            spec.period = SimTime{1000};
            t.sessions.push_back(spec);
        }
        return t;
    }

    // Direct counts written against the definitions, sharing nothing with the library.
    std::uint64_t oracle_cross_q(const net::Topology& t, const std::vector<WorkerId>& a)
    {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < t.qchannels.size(); ++i)
            if (a[t.qchannels[i].src] != a[t.qchannels[i].dst])
                n += 1;
        return n;
    }

    std::uint64_t oracle_cross_flows(const net::Topology& t, const std::vector<WorkerId>& a)
    {
        std::uint64_t n = 0;
        for (const auto& s : t.sessions)
            for (std::size_t i = 1; i < s.path.size(); ++i)
                if (a[s.path[i - 1]] != a[s.path[i]])
                    n += 1;
        return n;
    }

    std::uint64_t oracle_mem(const net::Topology& t, const std::vector<WorkerId>& a, std::size_t workers)
    {
        std::vector<std::uint64_t> sum(workers, 0);
        for (std::size_t r = 0; r < a.size(); ++r)
            sum[a[r]] += t.routers[r].memories;
        std::uint64_t lo = sum[0], hi = sum[0];
        for (auto s : sum)
        {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        return hi - lo;
    }

    // Minimum cut over all 2-way assignments with both sides non-empty.
    std::uint64_t brute_force_min_cut(const net::Topology& t)
    {
        const std::size_t n = t.routers.size();
        std::uint64_t best = UINT64_MAX;
        std::vector<WorkerId> a(n);
        for (std::uint64_t mask = 1; mask + 1 < (1ULL << n); ++mask)
        {
            for (std::size_t r = 0; r < n; ++r)
                a[r] = (mask >> r) & 1;
            best = std::min(best, oracle_cross_q(t, a));
        }
        return best;
    }

    template <class F>
    ErrorCode code_of(F&& f)
    {
        try
        {
            f();
        }
        catch (const Error& e)
        {
            return e.code();
        }
        ADD_FAILURE() << "no error thrown";
        return ErrorCode::InvalidParameter;
    }
} // namespace

TEST(Energy, LineContiguousSplit)
{
    EXPECT_EQ(energy(line4(), assign({0, 0, 1, 1}, 2), EnergySpec::only(EnergyKind::CrossQChannels)), 1.0);
}

TEST(Energy, LineInterleavedSplit)
{
    EXPECT_EQ(energy(line4(), assign({0, 1, 0, 1}, 2), EnergySpec::only(EnergyKind::CrossQChannels)), 3.0);
}

TEST(Energy, BalancedMemories)
{
    EXPECT_EQ(energy(line4(), assign({0, 0, 1, 1}, 2), EnergySpec::only(EnergyKind::MemoryBalance)), 0.0);
}

TEST(Energy, WeightedBlend)
{
    net::Topology t = graph(4, {{0, 1}, {1, 2}, {2, 3}}, {1, 2, 3, 4});
    const Partition p = assign({0, 0, 1, 1}, 2);
    // cross q = 1, memory spread = 7 - 3 = 4
    EXPECT_DOUBLE_EQ(energy(t, p, EnergySpec{0.0, 2.0, 0.5}), 2.0 + 2.0);
}

TEST(Energy, MatchesDirectCountOnRandomGraphs)
{
    SplitMix64 rng(123);
    for (int i = 0; i < 50; ++i)
    {
        const std::size_t n = 3 + rng.below(10);
        const net::Topology t = random_graph(rng, n);
        const std::size_t k = 1 + rng.below(4);
        std::vector<WorkerId> a(n);
        for (auto& w : a)
            w = static_cast<WorkerId>(rng.below(k));
        const Partition p = assign(a, k);
        EXPECT_EQ(energy(t, p, EnergySpec::only(EnergyKind::CrossQChannels)), oracle_cross_q(t, a));
        EXPECT_EQ(energy(t, p, EnergySpec::only(EnergyKind::CrossFlows)), oracle_cross_flows(t, a));
        EXPECT_EQ(energy(t, p, EnergySpec::only(EnergyKind::MemoryBalance)), oracle_mem(t, a, k));
    }
}

TEST(Energy, IncrementalDeltaMatchesRecount)
{
    SplitMix64 rng(8);
    for (int i = 0; i < 20; ++i)
    {
        const std::size_t n = 4 + rng.below(9);
        const net::Topology t = random_graph(rng, n);
        const EnergySpec spec{0.7, 1.3, 0.25};
        EnergyTracker tr(t, spec, Partition::round_robin(n, 3));
        for (int m = 0; m < 100; ++m)
        {
            const auto r = static_cast<EntityId>(rng.below(n));
            const auto to = static_cast<WorkerId>(rng.below(3));
            if (!tr.movable(r))
                continue;
            const double d = tr.delta(r, to);
            tr.apply(r, to, d);
            EXPECT_NEAR(tr.energy(), energy(t, tr.partition(), spec), 1e-9);
        }
    }
}

TEST(Anneal, ZeroIterationsIsRoundRobin)
{
    const net::Topology t = line4();
    EXPECT_EQ(anneal(t, EnergySpec{}, 2, AnnealSchedule{10.0, 0.9, 0}, 1), Partition::round_robin(4, 2));
}

TEST(Anneal, TwelveRingReachesBruteForceMinimum)
{
    std::vector<std::pair<EntityId, EntityId>> edges;
    for (EntityId i = 0; i < 12; ++i)
        edges.emplace_back(i, (i + 1) % 12);
    const net::Topology t = graph(12, edges);
    const std::uint64_t optimum = brute_force_min_cut(t);
    EXPECT_EQ(optimum, 2u);
    const Partition p = anneal(t, EnergySpec{}, 2, AnnealSchedule{10.0, 0.999, 20'000}, 5);
    EXPECT_EQ(energy(t, p, EnergySpec{}), static_cast<double>(optimum));
}

TEST(Anneal, MetropolisAcceptanceRate)
{
    // accept_move against an independent uniform stream at fixed T.
    SplitMix64 rng(2024);
    const std::uint64_t trials = 10'000;
    for (auto [delta, temp] : {std::pair{1.0, 2.0}, std::pair{3.0, 1.5}, std::pair{0.5, 0.25}})
    {
        std::uint64_t accepted = 0;
        for (std::uint64_t i = 0; i < trials; ++i)
            accepted += accept_move(delta, temp, rng.uniform());
        const double p = std::exp(-delta / temp);
        const double sigma = std::sqrt(trials * p * (1 - p));
        EXPECT_LE(std::abs(static_cast<double>(accepted) - trials * p), 3 * sigma) << "dE=" << delta << " T=" << temp;
    }
    EXPECT_TRUE(accept_move(0.0, 1.0, 0.999));
    EXPECT_TRUE(accept_move(-2.0, 1.0, 0.999));
}

TEST(Anneal, NeverWorseThanRoundRobinAndDeterministic)
{
    SplitMix64 rng(31);
    for (int i = 0; i < 10; ++i)
    {
        const std::size_t n = 4 + rng.below(9);
        const net::Topology t = random_graph(rng, n);
        const EnergySpec spec{0.5, 1.0, 0.1};
        const AnnealSchedule sched{5.0, 0.99, 2000};
        const Partition a = anneal(t, spec, 3, sched, 77);
        EXPECT_EQ(a, anneal(t, spec, 3, sched, 77));
        EXPECT_LE(energy(t, a, spec), energy(t, Partition::round_robin(n, 3), spec));
        for (auto load : a.loads())
            EXPECT_GT(load, 0u);
    }
}

TEST(Anneal, InvalidSchedule)
{
    const net::Topology t = line4();
    EXPECT_EQ(code_of([&] { anneal(t, EnergySpec{}, 2, AnnealSchedule{0.0, 0.9, 10}, 1); }), ErrorCode::InvalidSchedule);
    EXPECT_EQ(code_of([&] { anneal(t, EnergySpec{}, 2, AnnealSchedule{1.0, 1.0, 10}, 1); }), ErrorCode::InvalidSchedule);
    EXPECT_EQ(code_of([&] { anneal_best_of(t, EnergySpec{}, 2, AnnealSchedule{}, 1, 0); }), ErrorCode::InvalidParameter);
}

TEST(Anneal, BestOfRestartsIsNoWorseThanSingle)
{
    SplitMix64 rng(4);
    const net::Topology t = random_graph(rng, 12);
    const AnnealSchedule sched{2.0, 0.99, 500};
    const EnergySpec spec{};
    EXPECT_EQ(anneal_best_of(t, spec, 2, sched, 9, 1), anneal(t, spec, 2, sched, 9));
    EXPECT_LE(energy(t, anneal_best_of(t, spec, 2, sched, 9, 6), spec),
              energy(t, anneal_best_of(t, spec, 2, sched, 9, 1), spec));
}

TEST(PartitionFile, SaveLoadRoundTrip)
{
    const Partition p = assign({0, 2, 1, 1, 0}, 3);
    const auto path = std::filesystem::temp_directory_path() / "qnetsim_part_test.json";
    save_partition(p, path.string());
    EXPECT_EQ(load_partition(path.string(), 5), p);
    std::filesystem::remove(path);
}

TEST(PartitionFile, MissingRouterIsSchemaViolation)
{
    nlohmann::json j = {{"num_workers", 2}, {"assignment", {{"0", 0}, {"2", 1}}}};
    EXPECT_EQ(code_of([&] { partition_from_json(j); }), ErrorCode::SchemaViolation);
}

TEST(PartitionFile, WorkerOutOfRangeIsSchemaViolation)
{
    nlohmann::json j = {{"num_workers", 2}, {"assignment", {{"0", 0}, {"1", 2}}}};
    EXPECT_EQ(code_of([&] { partition_from_json(j); }), ErrorCode::SchemaViolation);
}

TEST(PartitionFile, OtherSchemaViolations)
{
    EXPECT_EQ(code_of([] { partition_from_json(nlohmann::json::array()); }), ErrorCode::SchemaViolation);
    EXPECT_EQ(code_of([] { partition_from_json({{"num_workers", 1}, {"assignment", {{"x", 0}}}}); }),
              ErrorCode::SchemaViolation);
    EXPECT_EQ(code_of([] { partition_from_json({{"num_workers", 1}, {"assignment", {{"0", 0}}}}, 2); }),
              ErrorCode::SchemaViolation);
    EXPECT_EQ(code_of([] { partition_from_json({{"num_workers", -1}, {"assignment", {{"0", 0}}}}); }),
              ErrorCode::SchemaViolation);
}
