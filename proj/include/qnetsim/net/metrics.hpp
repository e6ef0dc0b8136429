#pragma once

#include "qnetsim/hash.hpp"
#include "qnetsim/net/qkd.hpp"
#include "qnetsim/net/topology.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qnetsim::net
{
    struct LedgerSummary
    {
        LedgerId id;
        std::vector<std::uint64_t> sifted;
        std::string bits; // one char per sifted photon: '0', '1', or '?' if never measured
    };

    /// Portable snapshot of a router after the run.
    struct RouterSummary
    {
        EntityId id = 0;
        std::uint64_t executed = 0;
        std::uint64_t log_hash = 0;
        std::array<std::uint64_t, kEventKindCount> census{};
        std::vector<LedgerSummary> ledgers;
    };

    inline RouterSummary summarize(const RouterState& r)
    {
        RouterSummary out;
        out.id = r.id;
        out.executed = r.executed;
        out.log_hash = r.log_hash;
        out.census = r.census;
        for (const auto& [id, ledger] : r.ledgers)
        {
            LedgerSummary ls;
            ls.id = id;
            ls.sifted = ledger.sifted;
            ls.bits.reserve(ledger.sifted.size());
            for (std::uint64_t photon : ledger.sifted)
            {
                auto it = ledger.outcomes.find(photon);
                ls.bits.push_back(it == ledger.outcomes.end() ? '?' : static_cast<char>('0' + it->second));
            }
            out.ledgers.push_back(std::move(ls));
        }
        return out;
    }

    struct HopMetrics
    {
        std::uint64_t sender_sifted = 0;
        std::uint64_t receiver_sifted = 0;
        bool keys_match = false; // identical photon lists and bit strings
    };

    struct SessionMetrics
    {
        std::uint32_t session = 0;
        std::vector<HopMetrics> hops;
        std::uint64_t delivered_bits = 0; // photons sifted on every hop
        bool end_to_end_consistent = false;
        std::uint64_t key_digest = 0;
    };

    inline std::vector<SessionMetrics> session_metrics(const Topology& t, std::span<const RouterSummary> routers)
    {
        std::map<std::pair<EntityId, LedgerId>, const LedgerSummary*> by_id;
        for (const auto& r : routers)
            for (const auto& l : r.ledgers)
                by_id[{r.id, l.id}] = &l;
        static const LedgerSummary empty{};
        auto find = [&](EntityId router, std::uint32_t s, std::uint32_t h, Role role) -> const LedgerSummary& {
            auto it = by_id.find({router, LedgerId{s, h, role}});
            return it == by_id.end() ? empty : *it->second;
        };

        std::vector<SessionMetrics> out;
        for (const auto& s : t.sessions)
        {
            SessionMetrics m;
            m.session = s.id;
            Fnv1a64 digest;
            std::vector<const LedgerSummary*> send, recv;
            for (std::uint32_t h = 0; h < s.hops(); ++h)
            {
                const LedgerSummary& a = find(s.path[h], s.id, h, Role::Sender);
                const LedgerSummary& b = find(s.path[h + 1], s.id, h, Role::Receiver);
                m.hops.push_back({a.sifted.size(), b.sifted.size(), a.sifted == b.sifted && a.bits == b.bits});
                send.push_back(&a);
                recv.push_back(&b);
                for (std::uint64_t p : a.sifted)
                    digest.u64(p);
                digest.str(a.bits).str(b.bits);
            }

            // Trusted relay: hop keys are independent and combined by position.
            // Bit k reaches the destination once every hop has k+1 sifted bits;
            // the destination undoes each relay's (received xor forwarded)
            // correction to recover the source's bit k.
            bool consistent = true;
            std::size_t delivered = s.hops() == 0 ? 0 : SIZE_MAX;
            for (std::uint32_t h = 0; h < s.hops(); ++h)
                delivered = std::min({delivered, send[h]->bits.size(), recv[h]->bits.size()});
            m.delivered_bits = delivered;
            auto bit = [](const LedgerSummary& l, std::size_t k) { return l.bits[k] == '?' ? -1 : l.bits[k] - '0'; };
            for (std::size_t k = 0; k < delivered; ++k)
            {
                const int source_bit = bit(*send.front(), k);
                int rebuilt = bit(*recv.back(), k);
                bool known = source_bit >= 0 && rebuilt >= 0;
                for (std::uint32_t h = 1; h < s.hops(); ++h)
                {
                    const int a = bit(*recv[h - 1], k), b = bit(*send[h], k);
                    known = known && a >= 0 && b >= 0;
                    rebuilt ^= a ^ b;
                }
                if (!known || rebuilt != source_bit)
                    consistent = false;
            }
            for (const auto& hm : m.hops)
                consistent = consistent && hm.keys_match;
            m.end_to_end_consistent = consistent;
            m.key_digest = digest.value();
            out.push_back(std::move(m));
        }
        return out;
    }

    /// Digest over every router's execution log and every session's keys.
    /// Equal digests across worker counts mean the runs were equivalent.
    inline std::uint64_t equivalence_digest(std::span<const RouterSummary> routers, std::span<const SessionMetrics> sessions)
    {
        std::vector<const RouterSummary*> sorted;
        for (const auto& r : routers)
            sorted.push_back(&r);
        std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
        Fnv1a64 h;
        for (const auto* r : sorted)
            h.u64(r->id).u64(r->executed).u64(r->log_hash);
        for (const auto& s : sessions)
            h.u64(s.session).u64(s.delivered_bits).u64(s.key_digest);
        return h.value();
    }

    inline nlohmann::json to_json(const RouterSummary& r)
    {
        nlohmann::json ledgers = nlohmann::json::array();
        for (const auto& l : r.ledgers)
            ledgers.push_back({{"session", l.id.session},
                               {"hop", l.id.hop},
                               {"role", static_cast<int>(l.id.role)},
                               {"sifted", l.sifted},
                               {"bits", l.bits}});
        return {{"id", r.id}, {"executed", r.executed}, {"log_hash", r.log_hash}, {"census", r.census}, {"ledgers", ledgers}};
    }

    inline RouterSummary router_summary_from_json(const nlohmann::json& j)
    {
        RouterSummary r;
        r.id = j.at("id").get<EntityId>();
        r.executed = j.at("executed").get<std::uint64_t>();
        r.log_hash = j.at("log_hash").get<std::uint64_t>();
        r.census = j.at("census").get<std::array<std::uint64_t, kEventKindCount>>();
        for (const auto& l : j.at("ledgers"))
        {
            LedgerSummary ls;
            ls.id = LedgerId{l.at("session").get<std::uint32_t>(), l.at("hop").get<std::uint32_t>(),
                             static_cast<Role>(l.at("role").get<int>())};
            ls.sifted = l.at("sifted").get<std::vector<std::uint64_t>>();
            ls.bits = l.at("bits").get<std::string>();
            r.ledgers.push_back(std::move(ls));
        }
        return r;
    }
} // namespace qnetsim::net
