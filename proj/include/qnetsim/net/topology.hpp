#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"
#include "qnetsim/hash.hpp"
#include "qnetsim/sim_time.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace qnetsim::net
{
    struct RouterSpec
    {
        EntityId id = 0;
        std::uint32_t memories = 1;
    };

    /// Undirected quantum link.
    struct QChannel
    {
        EntityId src = 0;
        EntityId dst = 0;
        double distance_m = 0.0;
        double attenuation_db_per_km = 0.0;
        SimTime delay{};

        /// Photon survival probability 10^(-attenuation * km / 10).
        double survival_probability() const
        {
            return std::pow(10.0, -attenuation_db_per_km * (distance_m / 1000.0) / 10.0);
        }
    };

    /// Undirected, lossless classical link.
    struct CChannel
    {
        EntityId src = 0;
        EntityId dst = 0;
        SimTime delay{};
    };

    /// A QKD session relayed hop by hop along `path`.
    struct SessionSpec
    {
        std::uint32_t id = 0;
        std::vector<EntityId> path;
        SimTime start{};
        SimTime period{};               // spacing between photon emissions
        std::uint32_t frame_photons = 32; // photons per sifting frame
        std::uint32_t target_bits = 64; // source stops opening frames after this many sifted bits
        std::uint32_t max_frames = 16;

        EntityId source() const { return path.front(); }
        EntityId destination() const { return path.back(); }
        std::size_t hops() const { return path.size() - 1; }
    };

    inline constexpr std::uint32_t kMaxRouters = 1U << 20;
    inline constexpr std::uint32_t kMaxSessions = 1U << 12;

    struct Topology
    {
        std::uint64_t seed = 0;
        std::vector<RouterSpec> routers;
        std::vector<QChannel> qchannels;
        std::vector<CChannel> cchannels;
        std::vector<SessionSpec> sessions;
    };

    inline std::uint64_t link_key(EntityId a, EntityId b) noexcept
    {
        if (a > b)
            std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    /// Lookup tables derived from a validated topology.
    class TopologyIndex
    {
    public:
        explicit TopologyIndex(const Topology& t)
        {
            for (std::size_t i = 0; i < t.qchannels.size(); ++i)
                qchannel_.emplace(link_key(t.qchannels[i].src, t.qchannels[i].dst), i);
            for (std::size_t i = 0; i < t.cchannels.size(); ++i)
                cchannel_.emplace(link_key(t.cchannels[i].src, t.cchannels[i].dst), i);
            for (std::size_t i = 0; i < t.sessions.size(); ++i)
                session_.emplace(t.sessions[i].id, i);
            adjacency_.resize(t.routers.size());
            for (const auto& q : t.qchannels)
            {
                adjacency_[q.src].push_back(q.dst);
                adjacency_[q.dst].push_back(q.src);
            }
            for (auto& adj : adjacency_)
                std::sort(adj.begin(), adj.end());
        }

        const std::size_t* qchannel(EntityId a, EntityId b) const
        {
            auto it = qchannel_.find(link_key(a, b));
            return it == qchannel_.end() ? nullptr : &it->second;
        }
        const std::size_t* cchannel(EntityId a, EntityId b) const
        {
            auto it = cchannel_.find(link_key(a, b));
            return it == cchannel_.end() ? nullptr : &it->second;
        }
        const std::size_t* session(std::uint32_t id) const
        {
            auto it = session_.find(id);
            return it == session_.end() ? nullptr : &it->second;
        }
        const std::vector<EntityId>& neighbors(EntityId r) const { return adjacency_.at(r); }

    private:
        std::unordered_map<std::uint64_t, std::size_t> qchannel_;
        std::unordered_map<std::uint64_t, std::size_t> cchannel_;
        std::unordered_map<std::uint32_t, std::size_t> session_;
        std::vector<std::vector<EntityId>> adjacency_;
    };

    namespace detail
    {
        [[noreturn]] inline void schema(const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); }

        inline void check_link(std::size_t n, EntityId a, EntityId b, const char* what)
        {
            if (a >= n || b >= n)
                schema(std::string(what) + " references unknown router");
            if (a == b)
                schema(std::string(what) + " is a self-loop on router " + std::to_string(a));
        }
    } // namespace detail

    /// Checks every structural invariant; throws SchemaViolation (or
    /// EmptyTopology) on the first problem found.
    inline void validate(const Topology& t)
    {
        using detail::schema;
        const std::size_t n = t.routers.size();
        if (n == 0)
            throw Error(ErrorCode::EmptyTopology, "topology has no routers");
        if (n > kMaxRouters)
            schema("too many routers");
        for (std::size_t i = 0; i < n; ++i)
        {
            if (t.routers[i].id != i)
                schema("router ids must be 0..n-1 in order; found " + std::to_string(t.routers[i].id) + " at position " +
                       std::to_string(i));
            if (t.routers[i].memories == 0)
                schema("router " + std::to_string(i) + " has no memories");
        }

        std::unordered_map<std::uint64_t, SimTime> qdelay;
        for (const auto& q : t.qchannels)
        {
            detail::check_link(n, q.src, q.dst, "qconnection");
            if (q.delay == SimTime::zero() || q.delay.is_infinite())
                schema("qconnection delays must be positive and finite");
            if (!(q.distance_m >= 0.0) || !(q.attenuation_db_per_km >= 0.0))
                schema("qconnection distance and attenuation must be non-negative");
            if (!qdelay.emplace(link_key(q.src, q.dst), q.delay).second)
                schema("duplicate qconnection " + std::to_string(q.src) + "-" + std::to_string(q.dst));
        }
        std::unordered_set<std::uint64_t> cseen;
        for (const auto& c : t.cchannels)
        {
            detail::check_link(n, c.src, c.dst, "cconnection");
            if (c.delay == SimTime::zero() || c.delay.is_infinite())
                schema("cconnection delays must be positive and finite");
            if (!cseen.insert(link_key(c.src, c.dst)).second)
                schema("duplicate cconnection " + std::to_string(c.src) + "-" + std::to_string(c.dst));
            if (auto it = qdelay.find(link_key(c.src, c.dst)); it != qdelay.end() && c.delay < it->second)
                schema("classical delay below quantum delay on link " + std::to_string(c.src) + "-" + std::to_string(c.dst));
        }

        // Quantum graph must be connected.
        if (n > 1)
        {
            std::vector<std::vector<EntityId>> adj(n);
            for (const auto& q : t.qchannels)
            {
                adj[q.src].push_back(q.dst);
                adj[q.dst].push_back(q.src);
            }
            std::vector<bool> seen(n, false);
            std::vector<EntityId> stack{0};
            seen[0] = true;
            std::size_t reached = 1;
            while (!stack.empty())
            {
                const EntityId u = stack.back();
                stack.pop_back();
                for (EntityId v : adj[u])
                    if (!seen[v])
                    {
                        seen[v] = true;
                        ++reached;
                        stack.push_back(v);
                    }
            }
            if (reached != n)
                schema("quantum graph is not connected");
        }

        if (t.sessions.size() > kMaxSessions)
            schema("too many sessions");
        std::unordered_set<std::uint32_t> ids;
        for (const auto& s : t.sessions)
        {
            const std::string name = "session " + std::to_string(s.id);
            if (s.id >= kMaxSessions || !ids.insert(s.id).second)
                schema(name + ": id out of range or duplicated");
            if (s.path.size() < 2)
                schema(name + ": path needs at least two routers");
            std::unordered_set<EntityId> on_path;
            for (EntityId r : s.path)
                if (r >= n || !on_path.insert(r).second)
                    schema(name + ": path must be a simple path over known routers");
            for (std::size_t h = 0; h + 1 < s.path.size(); ++h)
            {
                const auto k = link_key(s.path[h], s.path[h + 1]);
                if (!qdelay.count(k) || !cseen.count(k))
                    schema(name + ": hop " + std::to_string(h) + " lacks a quantum or classical channel");
            }
            if (s.period == SimTime::zero() || s.frame_photons == 0 || s.max_frames == 0)
                schema(name + ": period, frame_photons and max_frames must be positive");
            if (static_cast<std::uint64_t>(s.frame_photons) * s.max_frames >= (1ULL << 31))
                schema(name + ": too many photons");
        }
    }

    // ---- JSON ----------------------------------------------------------------

    inline nlohmann::json to_json(const Topology& t)
    {
        using nlohmann::json;
        json j;
        j["seed"] = t.seed;
        j["routers"] = json::array();
        for (const auto& r : t.routers)
            j["routers"].push_back({{"id", r.id}, {"memories", r.memories}});
        j["qconnections"] = json::array();
        for (const auto& q : t.qchannels)
            j["qconnections"].push_back({{"src", q.src},
                                         {"dst", q.dst},
                                         {"distance_m", q.distance_m},
                                         {"attenuation_db_per_km", q.attenuation_db_per_km},
                                         {"delay_ps", q.delay.ticks()}});
        j["cconnections"] = json::array();
        for (const auto& c : t.cchannels)
            j["cconnections"].push_back({{"src", c.src}, {"dst", c.dst}, {"delay_ps", c.delay.ticks()}});
        j["sessions"] = json::array();
        for (const auto& s : t.sessions)
            j["sessions"].push_back({{"id", s.id},
                                     {"path", s.path},
                                     {"start_ps", s.start.ticks()},
                                     {"period_ps", s.period.ticks()},
                                     {"frame_photons", s.frame_photons},
                                     {"target_bits", s.target_bits},
                                     {"max_frames", s.max_frames}});
        return j;
    }

    namespace detail
    {
        template <class T>
        T field(const nlohmann::json& obj, const char* name, const std::string& where)
        {
            if (!obj.is_object() || !obj.contains(name))
                schema(where + ": missing \"" + name + "\"");
            try
            {
                return obj.at(name).get<T>();
            }
            catch (const nlohmann::json::exception&)
            {
                schema(where + ": \"" + name + "\" has the wrong type");
            }
        }

        inline const nlohmann::json& array_field(const nlohmann::json& j, const char* name)
        {
            if (!j.contains(name) || !j.at(name).is_array())
                schema(std::string("top-level \"") + name + "\" must be an array");
            return j.at(name);
        }
    } // namespace detail

    inline Topology topology_from_json(const nlohmann::json& j)
    {
        using detail::field;
        if (!j.is_object())
            detail::schema("topology must be a JSON object");
        Topology t;
        t.seed = field<std::uint64_t>(j, "seed", "topology");
        for (const auto& r : detail::array_field(j, "routers"))
            t.routers.push_back({field<EntityId>(r, "id", "router"), field<std::uint32_t>(r, "memories", "router")});
        for (const auto& q : detail::array_field(j, "qconnections"))
            t.qchannels.push_back({field<EntityId>(q, "src", "qconnection"),
                                   field<EntityId>(q, "dst", "qconnection"),
                                   field<double>(q, "distance_m", "qconnection"),
                                   field<double>(q, "attenuation_db_per_km", "qconnection"),
                                   SimTime{field<std::uint64_t>(q, "delay_ps", "qconnection")}});
        for (const auto& c : detail::array_field(j, "cconnections"))
            t.cchannels.push_back({field<EntityId>(c, "src", "cconnection"), field<EntityId>(c, "dst", "cconnection"),
                                   SimTime{field<std::uint64_t>(c, "delay_ps", "cconnection")}});
        for (const auto& s : detail::array_field(j, "sessions"))
        {
            SessionSpec spec;
            spec.id = field<std::uint32_t>(s, "id", "session");
            spec.path = field<std::vector<EntityId>>(s, "path", "session");
            spec.start = SimTime{field<std::uint64_t>(s, "start_ps", "session")};
            spec.period = SimTime{field<std::uint64_t>(s, "period_ps", "session")};
            spec.frame_photons = field<std::uint32_t>(s, "frame_photons", "session");
            spec.target_bits = field<std::uint32_t>(s, "target_bits", "session");
            spec.max_frames = field<std::uint32_t>(s, "max_frames", "session");
            t.sessions.push_back(std::move(spec));
        }
        validate(t);
        return t;
    }

    inline Topology load_topology(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::InvalidParameter, "cannot open topology file " + path);
        nlohmann::json j;
        try
        {
            in >> j;
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaViolation, std::string("topology is not valid JSON: ") + e.what());
        }
        return topology_from_json(j);
    }

    inline void save_topology(const Topology& t, const std::string& path)
    {
        std::ofstream out(path);
        if (!out)
            throw Error(ErrorCode::InvalidParameter, "cannot write " + path);
        out << to_json(t).dump(2) << '\n';
    }

    /// Stable digest of the topology's canonical JSON form.
    inline std::uint64_t topology_digest(const Topology& t)
    {
        return Fnv1a64{}.str(to_json(t).dump()).value();
    }
} // namespace qnetsim::net
