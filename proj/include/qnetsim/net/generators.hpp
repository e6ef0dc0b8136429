#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/net/topology.hpp"
#include "qnetsim/rng.hpp"
#include "qnetsim/sim_time.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <set>
#include <vector>

namespace qnetsim::net
{
    /// Knobs shared by both generators. Photon emission rates and memory
    /// counts are configurable defaults, not reproductions of any upstream input.
    struct WorkloadParams
    {
        double attenuation_db_per_km = 0.2;
        SimTime classical_overhead = microseconds(1); // classical delay = quantum delay + this
        SimTime period = microseconds(1);
        std::uint32_t frame_photons = 32;
        std::uint32_t target_bits = 64;
        std::uint32_t max_frames = 16;
    };

    struct LinearParams
    {
        std::uint32_t routers = 16;
        double link_length_m = 2000.0;
        std::uint32_t memories = 16;
        std::uint64_t seed = 1;
        WorkloadParams workload{};
    };

    struct AsParams
    {
        std::uint32_t groups = 4;
        std::uint32_t routers_per_group = 4;
        std::uint64_t seed = 1;
        double access_length_m = 2000.0;    // spoke-hub links, jittered x[0.5, 1.5)
        double backbone_length_m = 20000.0; // hub-hub links, jittered x[0.5, 1.5)
        double extra_backbone_fraction = 0.5; // extra hub-hub edges beyond the spanning tree, per group
        double session_density = 0.5;         // probability of a session per group pair
        std::uint32_t hotspot_sessions = 0;   // extra sessions from group 0 spokes to its hub
        std::uint32_t memories_min = 8;
        std::uint32_t memories_max = 32;
        WorkloadParams workload{};
    };

    namespace detail
    {
        inline void add_link(Topology& t, EntityId a, EntityId b, double length_m, const WorkloadParams& w)
        {
            const SimTime qd = propagation_delay(length_m);
            t.qchannels.push_back({a, b, length_m, w.attenuation_db_per_km, qd});
            t.cchannels.push_back({a, b, qd + w.classical_overhead});
        }

        inline SessionSpec make_session(std::uint32_t id, std::vector<EntityId> path, SimTime start, const WorkloadParams& w)
        {
            SessionSpec s;
            s.id = id;
            s.path = std::move(path);
            s.start = start;
            s.period = w.period;
            s.frame_photons = w.frame_photons;
            s.target_bits = w.target_bits;
            s.max_frames = w.max_frames;
            return s;
        }

        /// Fewest-hop path; ties go to the lower-numbered predecessor.
        inline std::vector<EntityId> shortest_path(const Topology& t, EntityId from, EntityId to)
        {
            const TopologyIndex index(t);
            std::vector<std::int64_t> parent(t.routers.size(), -1);
            std::deque<EntityId> frontier{from};
            parent[from] = from;
            while (!frontier.empty())
            {
                const EntityId u = frontier.front();
                frontier.pop_front();
                if (u == to)
                    break;
                for (EntityId v : index.neighbors(u))
                    if (parent[v] < 0)
                    {
                        parent[v] = u;
                        frontier.push_back(v);
                    }
            }
            if (parent[to] < 0)
                throw Error(ErrorCode::InvalidParameter, "no path between routers");
            std::vector<EntityId> path{to};
            while (path.back() != from)
                path.push_back(static_cast<EntityId>(parent[path.back()]));
            std::reverse(path.begin(), path.end());
            return path;
        }

        inline void check_workload(const WorkloadParams& w)
        {
            if (w.period == SimTime::zero() || w.frame_photons == 0 || w.max_frames == 0)
                throw Error(ErrorCode::InvalidParameter, "period, frame_photons and max_frames must be positive");
            if (!(w.attenuation_db_per_km >= 0.0))
                throw Error(ErrorCode::InvalidParameter, "attenuation must be non-negative");
        }
    } // namespace detail

    /// Routers 0..n-1 in a chain, with one session from router 0 to router n-1.
    inline Topology gen_linear(const LinearParams& p)
    {
        if (p.routers < 2)
            throw Error(ErrorCode::InvalidParameter, "linear topology needs at least 2 routers");
        if (!(p.link_length_m > 0.0) || p.memories == 0)
            throw Error(ErrorCode::InvalidParameter, "link length and memory count must be positive");
        detail::check_workload(p.workload);
        Topology t;
        t.seed = p.seed;
        for (EntityId i = 0; i < p.routers; ++i)
            t.routers.push_back({i, p.memories});
        for (EntityId i = 0; i + 1 < p.routers; ++i)
            detail::add_link(t, i, i + 1, p.link_length_m, p.workload);
        std::vector<EntityId> path(p.routers);
        for (EntityId i = 0; i < p.routers; ++i)
            path[i] = i;
        t.sessions.push_back(detail::make_session(0, std::move(path), SimTime::zero(), p.workload));
        validate(t);
        return t;
    }

    /// Hierarchical AS-like topology: each group is a hub with spokes, hubs
    /// are joined by a seeded random tree plus extra random backbone edges.
    /// Sessions connect random routers of group pairs at `session_density`.
    inline Topology gen_as(const AsParams& p)
    {
        if (p.groups == 0 || p.routers_per_group == 0)
            throw Error(ErrorCode::InvalidParameter, "need at least one group of at least one router");
        if (p.memories_min == 0 || p.memories_max < p.memories_min)
            throw Error(ErrorCode::InvalidParameter, "bad memory range");
        if (!(p.session_density >= 0.0 && p.session_density <= 1.0) || !(p.extra_backbone_fraction >= 0.0))
            throw Error(ErrorCode::InvalidParameter, "density and backbone fraction out of range");
        if (!(p.access_length_m > 0.0) || !(p.backbone_length_m > 0.0))
            throw Error(ErrorCode::InvalidParameter, "link lengths must be positive");
        detail::check_workload(p.workload);

        SplitMix64 rng(derive_seed(p.seed, {0x41535f746f706fULL}));
        auto jitter = [&](double base) { return base * (0.5 + rng.uniform()); };

        Topology t;
        t.seed = p.seed;
        const std::uint32_t R = p.routers_per_group;
        const std::uint32_t n = p.groups * R;
        for (EntityId i = 0; i < n; ++i)
        {
            const auto span = p.memories_max - p.memories_min + 1;
            t.routers.push_back({i, p.memories_min + static_cast<std::uint32_t>(rng.below(span))});
        }
        auto hub = [&](std::uint32_t g) { return static_cast<EntityId>(g * R); };

        for (std::uint32_t g = 0; g < p.groups; ++g)
            for (std::uint32_t s = 1; s < R; ++s)
                detail::add_link(t, hub(g), hub(g) + s, jitter(p.access_length_m), p.workload);

        std::set<std::pair<std::uint32_t, std::uint32_t>> backbone;
        for (std::uint32_t g = 1; g < p.groups; ++g)
        {
            const auto parent = static_cast<std::uint32_t>(rng.below(g));
            backbone.emplace(parent, g);
            detail::add_link(t, hub(parent), hub(g), jitter(p.backbone_length_m), p.workload);
        }
        const std::uint64_t max_edges = static_cast<std::uint64_t>(p.groups) * (p.groups - 1) / 2;
        const auto extra = std::min<std::uint64_t>(
            static_cast<std::uint64_t>(p.extra_backbone_fraction * p.groups + 0.5), max_edges - backbone.size());
        for (std::uint64_t added = 0, attempts = 0; added < extra && attempts < 64 * (extra + 1); ++attempts)
        {
            auto a = static_cast<std::uint32_t>(rng.below(p.groups));
            auto b = static_cast<std::uint32_t>(rng.below(p.groups));
            if (a == b)
                continue;
            if (a > b)
                std::swap(a, b);
            if (!backbone.emplace(a, b).second)
                continue;
            detail::add_link(t, hub(a), hub(b), jitter(p.backbone_length_m), p.workload);
            ++added;
        }

        auto pick = [&](std::uint32_t g) {
            return R == 1 ? hub(g) : hub(g) + 1 + static_cast<EntityId>(rng.below(R - 1));
        };
        const SimTime frame_span{p.workload.period.ticks() * p.workload.frame_photons};
        std::uint32_t next_id = 0;
        for (std::uint32_t a = 0; a < p.groups; ++a)
            for (std::uint32_t b = a + 1; b < p.groups; ++b)
            {
                if (!(rng.uniform() < p.session_density))
                    continue;
                const EntityId src = pick(a);
                const EntityId dst = pick(b);
                const SimTime start{rng.below(frame_span.ticks())};
                t.sessions.push_back(detail::make_session(next_id++, detail::shortest_path(t, src, dst), start, p.workload));
            }
        // Hotspot sessions all end at group 0's hub, which then receives
        // every one of their photons.
        if (R >= 2)
            for (std::uint32_t k = 0; k < p.hotspot_sessions; ++k)
            {
                const EntityId src = pick(0);
                const SimTime start{rng.below(frame_span.ticks())};
                t.sessions.push_back(detail::make_session(next_id++, {src, hub(0)}, start, p.workload));
            }
        validate(t);
        return t;
    }
} // namespace qnetsim::net
