#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/net/topology.hpp"
#include "qnetsim/partition/energy.hpp"
#include "qnetsim/partition/partition.hpp"
#include "qnetsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace qnetsim::part
{
    /// Geometric cooling: T <- alpha * T after every proposal.
    struct AnnealSchedule
    {
        double t0 = 10.0;
        double alpha = 0.995;
        std::uint64_t iterations = 50'000;
    };

    /// Metropolis rule. `uniform` is a draw in [0, 1).
    inline bool accept_move(double delta, double temperature, double uniform) noexcept
    {
        return delta <= 0.0 || uniform < std::exp(-delta / temperature);
    }

    /// Energy bookkeeping that prices a single-router move without a full recount.
    class EnergyTracker
    {
    public:
        EnergyTracker(const net::Topology& t, const EnergySpec& spec, Partition p)
            : spec_(spec), part_(std::move(p)), qadj_(t.routers.size()), fadj_(t.routers.size()),
              memories_(t.routers.size()), mem_(part_.num_workers, 0), count_(part_.num_workers, 0)
        {
            for (const auto& q : t.qchannels)
            {
                qadj_[q.src].push_back(q.dst);
                qadj_[q.dst].push_back(q.src);
            }
            std::vector<std::map<EntityId, std::uint32_t>> flows(t.routers.size());
            for (const auto& s : t.sessions)
                for (std::size_t h = 0; h + 1 < s.path.size(); ++h)
                {
                    ++flows[s.path[h]][s.path[h + 1]];
                    ++flows[s.path[h + 1]][s.path[h]];
                }
            for (std::size_t r = 0; r < flows.size(); ++r)
                fadj_[r].assign(flows[r].begin(), flows[r].end());
            for (const auto& r : t.routers)
            {
                memories_[r.id] = r.memories;
                mem_[part_.owner(r.id)] += r.memories;
                ++count_[part_.owner(r.id)];
            }
            energy_ = part::energy(t, part_, spec_);
        }

        double energy() const noexcept { return energy_; }
        const Partition& partition() const noexcept { return part_; }

        /// Moves that would empty a worker are not allowed.
        bool movable(EntityId router) const { return count_[part_.owner(router)] > 1; }

        double delta(EntityId router, WorkerId to) const
        {
            const WorkerId from = part_.owner(router);
            if (from == to)
                return 0.0;
            double d = 0.0;
            if (spec_.cross_qchannels != 0.0)
            {
                long change = 0;
                for (EntityId v : qadj_[router])
                {
                    const WorkerId w = part_.owner(v);
                    change += (to != w) - (from != w);
                }
                d += spec_.cross_qchannels * static_cast<double>(change);
            }
            if (spec_.cross_flows != 0.0)
            {
                long change = 0;
                for (const auto& [v, n] : fadj_[router])
                {
                    const WorkerId w = part_.owner(v);
                    change += static_cast<long>(n) * ((to != w) - (from != w));
                }
                d += spec_.cross_flows * static_cast<double>(change);
            }
            if (spec_.memory_balance != 0.0)
            {
                auto spread = [&](std::uint64_t a, std::uint64_t b) {
                    std::uint64_t lo = UINT64_MAX, hi = 0;
                    for (WorkerId w = 0; w < mem_.size(); ++w)
                    {
                        const std::uint64_t m = w == from ? a : (w == to ? b : mem_[w]);
                        lo = std::min(lo, m);
                        hi = std::max(hi, m);
                    }
                    return static_cast<double>(hi - lo);
                };
                const std::uint64_t m = memories_[router];
                d += spec_.memory_balance * (spread(mem_[from] - m, mem_[to] + m) - spread(mem_[from], mem_[to]));
            }
            return d;
        }

        void apply(EntityId router, WorkerId to, double delta)
        {
            const WorkerId from = part_.owner(router);
            mem_[from] -= memories_[router];
            mem_[to] += memories_[router];
            --count_[from];
            ++count_[to];
            part_.assignment[router] = to;
            energy_ += delta;
        }

    private:
        EnergySpec spec_;
        Partition part_;
        std::vector<std::vector<EntityId>> qadj_;
        std::vector<std::vector<std::pair<EntityId, std::uint32_t>>> fadj_;
        std::vector<std::uint64_t> memories_;
        std::vector<std::uint64_t> mem_;
        std::vector<std::size_t> count_;
        double energy_ = 0.0;
    };

    /// Simulated annealing from the round-robin assignment. Each proposal
    /// moves one random router to a random other worker. Returns the best
    /// partition seen; deterministic for a given seed.
    inline Partition anneal(const net::Topology& t, const EnergySpec& spec, std::size_t num_workers,
                            const AnnealSchedule& schedule, std::uint64_t seed)
    {
        if (!(schedule.t0 > 0.0) || !(schedule.alpha > 0.0 && schedule.alpha < 1.0))
            throw Error(ErrorCode::InvalidSchedule, "need t0 > 0 and alpha in (0, 1)");
        if (num_workers == 0)
            throw Error(ErrorCode::InvalidParameter, "num_workers must be positive");
        if (t.routers.empty())
            throw Error(ErrorCode::EmptyTopology, "nothing to partition");

        EnergyTracker tracker(t, spec, Partition::round_robin(t.routers.size(), num_workers));
        Partition best = tracker.partition();
        double best_energy = tracker.energy();
        if (num_workers == 1)
            return best;

        SplitMix64 rng(derive_seed(seed, {0x616e6e65616cULL}));
        double temperature = schedule.t0;
        const std::uint64_t n = t.routers.size();
        for (std::uint64_t it = 0; it < schedule.iterations; ++it, temperature *= schedule.alpha)
        {
            const auto router = static_cast<EntityId>(rng.below(n));
            auto to = static_cast<WorkerId>(rng.below(num_workers - 1));
            const double u = rng.uniform();
            if (to >= tracker.partition().owner(router))
                ++to;
            if (!tracker.movable(router))
                continue;
            const double d = tracker.delta(router, to);
            if (!accept_move(d, temperature, u))
                continue;
            tracker.apply(router, to, d);
            if (tracker.energy() < best_energy - 1e-12)
            {
                best_energy = tracker.energy();
                best = tracker.partition();
            }
        }
        return best;
    }

    /// Best of `restarts` independent anneals (seeds derived from `seed`).
    /// Ties keep the earliest restart.
    inline Partition anneal_best_of(const net::Topology& t, const EnergySpec& spec, std::size_t num_workers,
                                    const AnnealSchedule& schedule, std::uint64_t seed, std::uint32_t restarts)
    {
        if (restarts == 0)
            throw Error(ErrorCode::InvalidParameter, "need at least one restart");
        if (restarts == 1)
            return anneal(t, spec, num_workers, schedule, seed);
        Partition best;
        double best_energy = 0.0;
        for (std::uint32_t r = 0; r < restarts; ++r)
        {
            Partition p = anneal(t, spec, num_workers, schedule, derive_seed(seed, {r}));
            const double e = energy(t, p, spec);
            if (r == 0 || e < best_energy - 1e-12)
            {
                best = std::move(p);
                best_energy = e;
            }
        }
        return best;
    }
} // namespace qnetsim::part
