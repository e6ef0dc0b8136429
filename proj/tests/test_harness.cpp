#include "qnetsim/harness/report.hpp"
#include "qnetsim/net/generators.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace qnetsim;
using namespace qnetsim::harness;

namespace
{
    std::vector<par::EpochTiming> synthetic(std::size_t workers, std::size_t epochs)
    {
        std::vector<par::EpochTiming> out;
        for (WorkerId w = 0; w < workers; ++w)
            for (std::uint64_t e = 0; e < epochs; ++e)
                out.push_back({w, e, static_cast<std::int64_t>(1000 * w + e * e), 3, 5, 7, e});
        return out;
    }

    net::Topology small_linear()
    {
        net::LinearParams p;
        p.routers = 8;
        p.workload.max_frames = 6;
        return net::gen_linear(p);
    }

    ScalingSweep linear_sweep()
    {
        const auto t = small_linear();
        return run_sweep(t, {1, 2, 4}, [&](std::size_t k) { return part::Partition::round_robin(8, k); }, par::RunConfig{});
    }

    // All sessions live in group 0, which sits on worker 0; the other seven
    // workers own routers that never see an event.
    struct Imbalanced
    {
        net::Topology topology;
        part::Partition partition;
    };

    Imbalanced imbalanced()
    {
        net::AsParams ap;
        ap.groups = 8;
        ap.routers_per_group = 3;
        ap.session_density = 0.0;
        ap.hotspot_sessions = 6;
        ap.workload.max_frames = 24;
        Imbalanced out{net::gen_as(ap), {}};
        out.partition.num_workers = 8;
        for (EntityId r = 0; r < out.topology.routers.size(); ++r)
            out.partition.assignment.push_back(r / ap.routers_per_group);
        return out;
    }
} // namespace

TEST(AggregateTrace, CollapseOneIsIdentity)
{
    const auto epochs = synthetic(3, 5);
    const auto trace = aggregate_trace(epochs, 1);
    ASSERT_EQ(trace.size(), epochs.size());
    for (std::size_t i = 0; i < epochs.size(); ++i)
    {
        EXPECT_EQ(trace[i].worker, epochs[i].worker);
        EXPECT_EQ(trace[i].first_epoch, epochs[i].epoch_index);
        EXPECT_EQ(trace[i].compute_ns, epochs[i].compute_ns);
        EXPECT_EQ(trace[i].epochs, 1u);
    }
}

TEST(AggregateTrace, EightOverSixteenGivesTwoSums)
{
    const auto epochs = synthetic(2, 16);
    const auto trace = aggregate_trace(epochs, 8);
    ASSERT_EQ(trace.size(), 4u);
    for (const auto& pt : trace)
    {
        std::int64_t oracle = 0;
        for (const auto& e : epochs)
            if (e.worker == pt.worker && e.epoch_index / 8 == pt.group)
                oracle += e.compute_ns;
        EXPECT_EQ(pt.compute_ns, oracle);
        EXPECT_EQ(pt.epochs, 8u);
    }
}

TEST(AggregateTrace, ShortTailAndZeroK)
{
    const auto trace = aggregate_trace(synthetic(1, 10), 4);
    ASSERT_EQ(trace.size(), 3u);
    EXPECT_EQ(trace.back().epochs, 2u);
    EXPECT_THROW(aggregate_trace(synthetic(1, 2), 0), Error);
}

TEST(AggregateTrace, CsvShape)
{
    std::ostringstream os;
    write_trace_csv(os, aggregate_trace(synthetic(2, 3), 2));
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "worker,group,first_epoch,epochs,compute_ns");
    int rows = 0;
    while (std::getline(in, line))
        ++rows;
    EXPECT_EQ(rows, 4);
}

TEST(AggregateTrace, ImbalancedPartitionStragglerDominatesEveryGroup)
{
    const auto im = imbalanced();
    const auto r = par::run_simulation(im.topology, im.partition, par::RunConfig{.num_workers = 8});
    const auto rep = make_report(im.topology, im.partition, par::RunConfig{.num_workers = 8}, r);
    const auto trace = aggregate_trace(rep.epochs, 2);
    std::map<std::uint64_t, std::map<WorkerId, std::int64_t>> by_group;
    for (const auto& pt : trace)
        by_group[pt.group][pt.worker] = pt.compute_ns;
    ASSERT_GT(by_group.size(), 2u);
    for (const auto& [g, series] : by_group)
        for (const auto& [w, ns] : series)
            if (w != 0)
            {
                EXPECT_GT(series.at(0), ns) << "group " << g << " worker " << w;
            }
}

TEST(EpochCsv, HeaderAndRows)
{
    std::ostringstream os;
    write_epoch_csv(os, synthetic(1, 2));
    EXPECT_EQ(os.str(), "worker,epoch,compute_ns,barrier_wait_ns,exchange_ns,qsm_socket_ns,events_executed\n"
                        "0,0,0,3,5,7,0\n0,1,1,3,5,7,1\n");
}

TEST(Breakdown, SingleWorkerHasNoWaitOrExchange)
{
    const auto t = small_linear();
    const auto sweep = run_sweep(t, {1}, [](std::size_t k) { return part::Partition::round_robin(8, k); }, par::RunConfig{});
    for (auto mode : {BreakdownMode::Legacy, BreakdownMode::Split, BreakdownMode::Redefined})
        for (const auto& row : report_breakdown(sweep, mode))
        {
            EXPECT_EQ(row.wait_ns, 0);
            EXPECT_EQ(row.exchange_ns, 0);
            EXPECT_EQ(row.sync_ns, 0);
        }
}

TEST(Breakdown, ModeIdentitiesHoldExactly)
{
    const auto sweep = linear_sweep();
    const auto legacy = report_breakdown(sweep, BreakdownMode::Legacy);
    const auto split = report_breakdown(sweep, BreakdownMode::Split);
    const auto redefined = report_breakdown(sweep, BreakdownMode::Redefined);
    ASSERT_EQ(legacy.size(), split.size());
    ASSERT_EQ(legacy.size(), redefined.size());
    for (std::size_t i = 0; i < legacy.size(); ++i)
    {
        EXPECT_EQ(legacy[i].sync_ns, split[i].wait_ns + split[i].exchange_ns);
        EXPECT_EQ(redefined[i].compute_ns, split[i].compute_ns + split[i].wait_ns);
        EXPECT_EQ(legacy[i].compute_ns, split[i].compute_ns);
    }
}

TEST(Breakdown, ImbalancedSplitShowsWaitOverExchange)
{
    const auto im = imbalanced();
    const auto sweep = run_sweep(im.topology, {8}, [&](std::size_t) { return im.partition; }, par::RunConfig{});
    std::int64_t wait = 0, exchange = 0;
    for (const auto& row : report_breakdown(sweep, BreakdownMode::Split))
        if (row.worker != 0)
        {
            wait += row.wait_ns;
            exchange += row.exchange_ns;
        }
    EXPECT_GT(wait, 2 * exchange);
}

TEST(Breakdown, CsvColumnsPerMode)
{
    const auto sweep = linear_sweep();
    auto header = [&](BreakdownMode m) {
        std::ostringstream os;
        write_breakdown_csv(os, report_breakdown(sweep, m), m);
        return os.str().substr(0, os.str().find('\n'));
    };
    EXPECT_EQ(header(BreakdownMode::Legacy), "workers,worker,compute_ns,sync_ns,socket_ns,events");
    EXPECT_EQ(header(BreakdownMode::Split), "workers,worker,compute_ns,wait_ns,exchange_ns,socket_ns,events");
    EXPECT_EQ(header(BreakdownMode::Redefined), "workers,worker,compute_ns,exchange_ns,socket_ns,events");
    std::ostringstream table;
    write_breakdown_table(table, report_breakdown(sweep, BreakdownMode::Split), BreakdownMode::Split);
    EXPECT_NE(table.str().find("wait_ms"), std::string::npos);
    EXPECT_THROW(parse_mode("fancy"), Error);
}

TEST(Report, JsonRoundTripAndSelfContainedRerun)
{
    const auto t = small_linear();
    const auto p = part::Partition::round_robin(8, 4);
    par::RunConfig cfg{.num_workers = 4};
    cfg.seed = 99;
    const auto r = par::run_simulation(t, p, cfg);
    const RunReport rep = make_report(t, p, cfg, r);
    const RunReport back = run_report_from_json(nlohmann::json::parse(to_json(rep).dump()));
    EXPECT_EQ(to_json(back), to_json(rep));
    EXPECT_EQ(back.digest, r.digest);
    EXPECT_EQ(back.topology_digest, to_hex(net::topology_digest(t)));

    // Rerun from the echoed config only.
    part::Partition again;
    again.num_workers = back.num_workers;
    again.assignment = back.assignment;
    par::RunConfig cfg2{.num_workers = back.num_workers};
    cfg2.seed = back.seed;
    cfg2.stop_time = back.stop_time;
    EXPECT_EQ(par::run_simulation(t, again, cfg2).digest, back.digest);

    // Digests differ for a different seed.
    cfg2.seed = 100;
    EXPECT_NE(par::run_simulation(t, again, cfg2).digest, back.digest);
}

TEST(Report, BrokenJsonIsSchemaViolation)
{
    try
    {
        run_report_from_json(nlohmann::json{{"config", 1}});
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    }
}

TEST(Report, StopTimeZeroIsValidAndEmpty)
{
    const auto t = small_linear();
    par::RunConfig cfg{.num_workers = 2};
    cfg.stop_time = SimTime::zero();
    const auto p = part::Partition::round_robin(8, 2);
    const auto rep = make_report(t, p, cfg, par::run_simulation(t, p, cfg));
    EXPECT_TRUE(rep.epochs.empty());
    EXPECT_EQ(rep.events_executed, 0u);
    EXPECT_NO_THROW(run_report_from_json(to_json(rep)));
}

TEST(Sweep, SharedSeedAndDigest)
{
    const auto sweep = linear_sweep();
    ASSERT_EQ(sweep.runs.size(), 3u);
    for (const auto& r : sweep.runs)
    {
        EXPECT_EQ(r.topology_digest, sweep.topology_digest);
        EXPECT_EQ(r.seed, sweep.seed);
        EXPECT_EQ(r.digest, sweep.runs[0].digest);
    }
    const auto back = sweep_from_json(to_json(sweep));
    EXPECT_EQ(back.runs.size(), 3u);

    auto mixed = to_json(sweep);
    mixed["runs"][1]["config"]["seed"] = 1234;
    EXPECT_THROW(sweep_from_json(mixed), Error);

    // A lone report reads as a one-point sweep.
    EXPECT_EQ(sweep_from_json(to_json(sweep.runs[2])).runs.size(), 1u);
}

TEST(Sweep, TimingAccountingPerRun)
{
    for (const auto& run : linear_sweep().runs)
        for (const auto& w : run.workers)
        {
            EXPECT_LE(w.accounted_ns(), w.wall_ns);
            EXPECT_GE(static_cast<double>(w.accounted_ns()), 0.9 * static_cast<double>(w.wall_ns));
        }
}

TEST(Sweep, PerEventComputeIsPositive)
{
    for (const auto& [k, ns] : per_event_compute(linear_sweep()))
        EXPECT_GT(ns, 0.0) << k;
}
