#pragma once

#include "qnetsim/net/topology.hpp"
#include "qnetsim/partition/partition.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace qnetsim::part
{
    enum class EnergyKind
    {
        CrossFlows,     // session hops whose endpoints sit on different workers
        CrossQChannels, // quantum channels whose endpoints sit on different workers
        MemoryBalance,  // max minus min of per-worker summed router memories
    };

    /// Weighted blend of the three energy terms.
    struct EnergySpec
    {
        double cross_flows = 0.0;
        double cross_qchannels = 1.0;
        double memory_balance = 0.0;

        static EnergySpec only(EnergyKind kind)
        {
            EnergySpec s{0.0, 0.0, 0.0};
            switch (kind)
            {
            case EnergyKind::CrossFlows: s.cross_flows = 1.0; break;
            case EnergyKind::CrossQChannels: s.cross_qchannels = 1.0; break;
            case EnergyKind::MemoryBalance: s.memory_balance = 1.0; break;
            }
            return s;
        }
    };

    inline std::uint64_t cross_qchannels(const net::Topology& t, const Partition& p)
    {
        std::uint64_t n = 0;
        for (const auto& q : t.qchannels)
            n += p.owner(q.src) != p.owner(q.dst);
        return n;
    }

    inline std::uint64_t cross_flows(const net::Topology& t, const Partition& p)
    {
        std::uint64_t n = 0;
        for (const auto& s : t.sessions)
            for (std::size_t h = 0; h + 1 < s.path.size(); ++h)
                n += p.owner(s.path[h]) != p.owner(s.path[h + 1]);
        return n;
    }

    inline std::uint64_t memory_imbalance(const net::Topology& t, const Partition& p)
    {
        std::vector<std::uint64_t> sums(p.num_workers, 0);
        for (const auto& r : t.routers)
            sums[p.owner(r.id)] += r.memories;
        const auto [lo, hi] = std::minmax_element(sums.begin(), sums.end());
        return *hi - *lo;
    }

    inline double energy_term(const net::Topology& t, const Partition& p, EnergyKind kind)
    {
        switch (kind)
        {
        case EnergyKind::CrossFlows: return static_cast<double>(cross_flows(t, p));
        case EnergyKind::CrossQChannels: return static_cast<double>(cross_qchannels(t, p));
        case EnergyKind::MemoryBalance: return static_cast<double>(memory_imbalance(t, p));
        }
        return 0.0;
    }

    inline double energy(const net::Topology& t, const Partition& p, const EnergySpec& spec)
    {
        double e = 0.0;
        if (spec.cross_flows != 0.0)
            e += spec.cross_flows * energy_term(t, p, EnergyKind::CrossFlows);
        if (spec.cross_qchannels != 0.0)
            e += spec.cross_qchannels * energy_term(t, p, EnergyKind::CrossQChannels);
        if (spec.memory_balance != 0.0)
            e += spec.memory_balance * energy_term(t, p, EnergyKind::MemoryBalance);
        return e;
    }
} // namespace qnetsim::part
