#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/net/topology.hpp"
#include "qnetsim/partition/partition.hpp"
#include "qnetsim/sim_time.hpp"

#include <algorithm>
#include <cstdint>
#include <span>

namespace qnetsim::par
{
    /// The synchronization window every worker agrees on for one epoch.
    /// Events in [epoch_start, horizon) are safe to execute.
    struct EpochPlan
    {
        std::uint64_t epoch_index = 0;
        SimTime epoch_start{};
        SimTime horizon{};
        SimTime lookahead{};
        bool complete = false;

        bool operator==(const EpochPlan&) const = default;
    };

    /// Smallest delay over quantum and classical channels that join routers on
    /// different workers; infinity when no channel crosses a worker boundary.
    inline SimTime compute_lookahead(const net::Topology& t, const part::Partition& p)
    {
        if (t.routers.empty())
            throw Error(ErrorCode::EmptyTopology, "cannot compute lookahead of an empty topology");
        if (p.routers() != t.routers.size())
            throw Error(ErrorCode::InvalidParameter, "partition does not cover the topology");
        SimTime best = kTimeInfinity;
        for (const auto& q : t.qchannels)
            if (p.owner(q.src) != p.owner(q.dst))
                best = std::min(best, q.delay);
        for (const auto& c : t.cchannels)
            if (p.owner(c.src) != p.owner(c.dst))
                best = std::min(best, c.delay);
        return best;
    }

    /// Builds the next plan from the globally reduced next-event time.
    inline EpochPlan plan_from_min(SimTime min_next, SimTime lookahead, SimTime stop_time, std::uint64_t epoch_index,
                                   SimTime epoch_start)
    {
        EpochPlan plan;
        plan.epoch_index = epoch_index;
        plan.epoch_start = epoch_start;
        plan.lookahead = lookahead;
        if (min_next.is_infinite() || min_next >= stop_time)
        {
            plan.complete = true;
            plan.horizon = epoch_start;
            return plan;
        }
        plan.horizon = std::min(min_next + lookahead, stop_time);
        return plan;
    }

    /// All-reduce-min over the workers' next event times, then min + lookahead
    /// capped at stop_time. All-infinite input signals completion.
    inline EpochPlan negotiate_horizon(std::span<const SimTime> local_next_times, SimTime lookahead,
                                       SimTime stop_time = kTimeInfinity, std::uint64_t epoch_index = 0,
                                       SimTime epoch_start = SimTime::zero())
    {
        SimTime m = kTimeInfinity;
        for (SimTime t : local_next_times)
            m = std::min(m, t);
        return plan_from_min(m, lookahead, stop_time, epoch_index, epoch_start);
    }
} // namespace qnetsim::par
