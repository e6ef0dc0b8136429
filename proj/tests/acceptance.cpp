// Acceptance checks. One PASS/FAIL line each; exit status is the number of failures.
#include "qnetsim/harness/report.hpp"
#include "qnetsim/net/generators.hpp"
#include "qnetsim/net/qkd.hpp"
#include "qnetsim/partition/anneal.hpp"
#include "qnetsim/partition/energy.hpp"
#include "qnetsim/qsm/request.hpp"
#include "qnetsim/qsm/service.hpp"
#include "qnetsim/qsm/store.hpp"
#include "qnetsim/qsm/transport.hpp"
#include "qnetsim/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace qnetsim;

namespace
{
    int failures = 0;

    void report(const char* name, bool ok, const std::string& detail, double seconds)
    {
        std::printf("%s %s (%.1fs) %s\n", ok ? "PASS" : "FAIL", name, seconds, detail.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }

    template <class F>
    void check(const char* name, double budget_s, F&& body)
    {
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        std::string detail;
        try
        {
            ok = body(detail);
        }
        catch (const std::exception& e)
        {
            detail += std::string(" threw: ") + e.what();
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (s > budget_s)
        {
            ok = false;
            detail += " over time budget";
        }
        report(name, ok, detail, s);
    }

    double median(std::vector<double> v)
    {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
    }

    std::vector<net::Topology> equivalence_topologies()
    {
        net::LinearParams lp;
        lp.routers = 16;
        net::AsParams ap;
        ap.groups = 4;
        ap.routers_per_group = 4;
        return {net::gen_linear(lp), net::gen_as(ap)};
    }

    // ---- partitioner oracle helpers

    net::Topology random_graph(SplitMix64& rng, std::size_t n)
    {
        net::Topology t;
        for (EntityId i = 0; i < n; ++i)
            t.routers.push_back({i, 1 + static_cast<std::uint32_t>(rng.below(16))});
        std::set<std::pair<EntityId, EntityId>> seen;
        auto link = [&](EntityId a, EntityId b) {
            if (a > b)
                std::swap(a, b);
            if (a == b || !seen.emplace(a, b).second)
                return;
            t.qchannels.push_back({a, b, 1000.0, 0.2, SimTime{1000}});
            t.cchannels.push_back({a, b, SimTime{2000}});
        };
        for (EntityId v = 1; v < n; ++v)
            link(static_cast<EntityId>(rng.below(v)), v);
        const std::size_t extra = rng.below(n + 1);
        for (std::size_t i = 0; i < extra; ++i)
            link(static_cast<EntityId>(rng.below(n)), static_cast<EntityId>(rng.below(n)));
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

    std::uint64_t count_cross_q(const net::Topology& t, const std::vector<WorkerId>& a)
    {
        std::uint64_t n = 0;
        for (const auto& q : t.qchannels)
            n += a[q.src] != a[q.dst];
        return n;
    }

    std::uint64_t count_cross_flows(const net::Topology& t, const std::vector<WorkerId>& a)
    {
        std::uint64_t n = 0;
        for (const auto& s : t.sessions)
            for (std::size_t i = 1; i < s.path.size(); ++i)
                n += a[s.path[i - 1]] != a[s.path[i]];
        return n;
    }

    std::uint64_t count_mem_spread(const net::Topology& t, const std::vector<WorkerId>& a, std::size_t k)
    {
        std::vector<std::uint64_t> sum(k, 0);
        for (std::size_t r = 0; r < a.size(); ++r)
            sum[a[r]] += t.routers[r].memories;
        return *std::max_element(sum.begin(), sum.end()) - *std::min_element(sum.begin(), sum.end());
    }

    // ---- QSM oracle helpers

    std::vector<qsm::Amplitude> random_state(SplitMix64& rng, std::size_t n)
    {
        std::vector<qsm::Amplitude> v(std::size_t{1} << n);
        double s = 0;
        for (auto& a : v)
        {
            a = {rng.uniform() - 0.5, rng.uniform() - 0.5};
            s += std::norm(a);
        }
        for (auto& a : v)
            a /= std::sqrt(s);
        return v;
    }

    bool normalized_everywhere(const qsm::StateStore& s, const std::vector<qsm::MemoryKey>& keys)
    {
        for (auto k : keys)
            if (s.contains(k) && std::abs(qsm::norm_squared(s.get(k).amplitudes) - 1.0) > 1e-9)
                return false;
        return true;
    }
} // namespace

int main()
{
    const auto topologies = equivalence_topologies();
    const std::vector<std::size_t> worker_counts{1, 2, 4, 8};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    std::uint64_t violations = 0;

    check("serial-parallel-equivalence", 120, [&](std::string& d) {
        bool ok = true;
        std::size_t runs = 0;
        for (const auto& t : topologies)
            for (auto seed : seeds)
            {
                std::uint64_t serial = 0;
                for (auto k : worker_counts)
                {
                    par::RunConfig cfg{.num_workers = k};
                    cfg.seed = seed;
                    std::uint64_t digest = 0;
                    try
                    {
                        digest = par::run_simulation(t, part::Partition::round_robin(t.routers.size(), k), cfg).digest;
                    }
                    catch (const Error& e)
                    {
                        if (e.code() == ErrorCode::CausalityViolation)
                            ++violations;
                        throw;
                    }
                    ++runs;
                    if (k == 1)
                        serial = digest;
                    else if (digest != serial)
                    {
                        ok = false;
                        d += " mismatch seed=" + std::to_string(seed) + " k=" + std::to_string(k);
                    }
                }
            }
        d += std::to_string(runs) + " runs";
        return ok;
    });

    check("causality", 60, [&](std::string& d) {
        // Zero violations were seen above; the inflated-lookahead mutation must be caught early.
        bool ok = violations == 0;
        d = "violations_in_matrix=" + std::to_string(violations);
        const auto& t = topologies[0];
        const auto p = part::Partition::round_robin(t.routers.size(), 4);
        for (SimTime extra : {SimTime{1}, par::compute_lookahead(t, p)})
        {
            par::RunConfig cfg{.num_workers = 4};
            cfg.lookahead = par::compute_lookahead(t, p) + extra;
            try
            {
                par::run_simulation(t, p, cfg);
                ok = false;
                d += " mutation not caught";
            }
            catch (const Error& e)
            {
                const std::string msg = e.what();
                const auto at = msg.find("epoch ");
                const long epoch = at == std::string::npos ? -1 : std::stol(msg.substr(at + 6));
                ok = ok && e.code() == ErrorCode::CausalityViolation && epoch >= 0 && epoch < 100;
                d += " caught_at_epoch=" + std::to_string(epoch);
            }
        }
        return ok;
    });

    check("qsm-batching-transparency", 60, [&](std::string& d) {
        SplitMix64 rng(2024);
        std::size_t mismatches = 0, bad_norm = 0;
        for (int trial = 0; trial < 1000; ++trial)
        {
            const std::size_t len = 1 + rng.below(60);
            std::vector<qsm::Request> reqs;
            std::vector<qsm::MemoryKey> keys;
            for (std::size_t i = 0; i < len; ++i)
            {
                const qsm::MemoryKey a = rng.below(6), b = 100 + rng.below(6), c = 200 + rng.below(6);
                keys.insert(keys.end(), {a, b, c});
                switch (rng.below(5))
                {
                case 0:
                    reqs.push_back(qsm::Request::set({a, b}, random_state(rng, 2)));
                    break;
                case 1:
                    reqs.push_back(qsm::Request::set({a, b, c}, random_state(rng, 3)));
                    break;
                case 2:
                    reqs.push_back(qsm::Request::set({c}, random_state(rng, 1)));
                    break;
                default:
                    reqs.push_back(qsm::Request::measure(std::array{a, b, c}[rng.below(3)], rng.uniform()));
                    break;
                }
            }

            // Sequential oracle, checking norms after every measurement.
            qsm::StateStore oracle;
            std::vector<qsm::Response> expected;
            for (const auto& r : reqs)
            {
                expected.push_back(qsm::apply_all(oracle, std::vector<qsm::Request>{r})[0]);
                if (r.op == qsm::Op::Measure && !normalized_everywhere(oracle, keys))
                    ++bad_norm;
            }

            qsm::GlobalQsmService svc(1, {});
            qsm::InProcConnection conn(svc);
            std::vector<qsm::Response> got;
            for (std::size_t i = 0, epoch = 0; i < reqs.size(); ++epoch)
            {
                const std::size_t n = std::min<std::size_t>(rng.below(12), reqs.size() - i);
                const qsm::RequestBatch b{0, epoch, {reqs.begin() + i, reqs.begin() + i + n}};
                const auto resp = conn.flush(b);
                got.insert(got.end(), resp.responses.begin(), resp.responses.end());
                i += n;
                if (!normalized_everywhere(svc.store(), keys))
                    ++bad_norm;
            }
            if (got != expected || svc.store().canonical_dump() != oracle.canonical_dump())
                ++mismatches;
        }
        d = "mismatches=" + std::to_string(mismatches) + " norm_failures=" + std::to_string(bad_norm);
        return mismatches == 0 && bad_norm == 0;
    });

    check("partitioner-oracle", 120, [&](std::string& d) {
        SplitMix64 rng(31337);
        int optimal = 0, over_by_more = 0, energy_mismatch = 0;
        for (int i = 0; i < 20; ++i)
        {
            const std::size_t n = 4 + rng.below(9);
            const net::Topology t = random_graph(rng, n);

            std::uint64_t best = UINT64_MAX;
            std::vector<WorkerId> a(n);
            for (std::uint64_t mask = 1; mask + 1 < (1ULL << n); ++mask)
            {
                for (std::size_t r = 0; r < n; ++r)
                    a[r] = (mask >> r) & 1;
                best = std::min(best, count_cross_q(t, a));
                if (mask % 7 == 0)
                {
                    part::Partition p{2, a};
                    energy_mismatch += part::energy(t, p, part::EnergySpec::only(part::EnergyKind::CrossQChannels)) !=
                                       static_cast<double>(count_cross_q(t, a));
                    energy_mismatch += part::energy(t, p, part::EnergySpec::only(part::EnergyKind::CrossFlows)) !=
                                       static_cast<double>(count_cross_flows(t, a));
                    energy_mismatch += part::energy(t, p, part::EnergySpec::only(part::EnergyKind::MemoryBalance)) !=
                                       static_cast<double>(count_mem_spread(t, a, 2));
                }
            }

            const auto p = part::anneal(t, part::EnergySpec::only(part::EnergyKind::CrossQChannels), 2,
                                        part::AnnealSchedule{10.0, 0.999, 20000}, 100 + i);
            const auto got = count_cross_q(t, p.assignment);
            optimal += got == best;
            over_by_more += got > best + 1;
        }
        d = "optimal=" + std::to_string(optimal) + "/20 over_by_more_than_1=" + std::to_string(over_by_more) +
            " energy_mismatches=" + std::to_string(energy_mismatch);
        return optimal >= 18 && over_by_more == 0 && energy_mismatch == 0;
    });

    check("timing-accounting", 300, [&](std::string& d) {
        bool ok = true;
        double lo = 1e9, hi = 0;
        for (const auto& t : topologies)
        {
            const auto sweep = harness::run_sweep(
                t, {1, 2, 4, 8}, [&](std::size_t k) { return part::Partition::round_robin(t.routers.size(), k); },
                par::RunConfig{});
            for (const auto& run : sweep.runs)
                for (const auto& w : run.workers)
                {
                    const double f = static_cast<double>(w.accounted_ns()) / static_cast<double>(w.wall_ns);
                    lo = std::min(lo, f);
                    hi = std::max(hi, f);
                }
            const auto legacy = harness::report_breakdown(sweep, harness::BreakdownMode::Legacy);
            const auto split = harness::report_breakdown(sweep, harness::BreakdownMode::Split);
            const auto redefined = harness::report_breakdown(sweep, harness::BreakdownMode::Redefined);
            for (std::size_t i = 0; i < split.size(); ++i)
                ok = ok && legacy[i].sync_ns == split[i].wait_ns + split[i].exchange_ns &&
                     redefined[i].compute_ns == split[i].compute_ns + split[i].wait_ns;
        }
        std::ostringstream os;
        os << "accounted/wall in [" << lo << ", " << hi << "] identities=" << (ok ? "exact" : "broken");
        d = os.str();
        return ok && lo >= 0.90 && hi <= 1.00;
    });

    check("straggler-trend", 300, [&](std::string& d) {
        net::AsParams ap;
        ap.groups = 4;
        ap.routers_per_group = 10;
        ap.hotspot_sessions = 4;
        ap.session_density = 0.3;
        ap.seed = 3;
        ap.workload.max_frames = 48;
        ap.workload.target_bits = 1u << 30;
        const auto t = net::gen_as(ap);
        const std::vector<std::size_t> ks{1, 2, 4, 8, 16};
        std::map<std::size_t, part::Partition> parts;
        for (auto k : ks)
        {
            part::EnergySpec es;
            es.cross_flows = 0.5;
            parts[k] = part::anneal_best_of(t, es, k, part::AnnealSchedule{10.0, 0.9999, 100000}, 11, 8);
        }

        std::map<std::size_t, std::vector<double>> max_compute, idle_wait, wall;
        std::map<std::size_t, double> ratio;
        for (int rep = 0; rep < 15; ++rep)
        {
            // Rotate the order so no worker count always runs first.
            std::vector<std::size_t> order(ks);
            std::rotate(order.begin(), order.begin() + rep % order.size(), order.end());
            const auto sweep = harness::run_sweep(t, order, [&](std::size_t k) { return parts[k]; }, par::RunConfig{});
            for (const auto& r : sweep.runs)
            {
                std::vector<double> events;
                WorkerId straggler = 0;
                double most = -1, maxc = 0, wsum = 0;
                for (const auto& w : r.workers)
                {
                    events.push_back(static_cast<double>(w.events_executed));
                    if (static_cast<double>(w.events_executed) > most)
                    {
                        most = static_cast<double>(w.events_executed);
                        straggler = w.worker;
                    }
                }
                for (const auto& w : r.workers)
                {
                    maxc = std::max(maxc, static_cast<double>(w.compute_ns));
                    if (w.worker != straggler)
                        wsum += static_cast<double>(w.barrier_wait_ns);
                }
                max_compute[r.num_workers].push_back(maxc);
                idle_wait[r.num_workers].push_back(r.workers.size() > 1 ? wsum / (r.workers.size() - 1) : 0.0);
                wall[r.num_workers].push_back(static_cast<double>(r.wall_ns));
                ratio[r.num_workers] = most / std::max(1.0, median(events));
            }
        }

        std::size_t imbalance = 0;
        for (auto k : ks)
            if (k > 1 && ratio[k] >= 4.0)
            {
                imbalance = k;
                break;
            }
        std::ostringstream os;
        os << std::fixed;
        os.precision(1);
        for (auto k : ks)
            os << " k=" << k << "[ratio=" << ratio[k] << " maxc=" << median(max_compute[k]) / 1e6
               << "ms wait=" << median(idle_wait[k]) / 1e6 << "ms wall=" << median(wall[k]) / 1e6 << "ms]";
        if (imbalance == 0)
        {
            d = "no worker count reached 4x imbalance" + os.str();
            return false;
        }
        bool a = true, b = true;
        for (auto k : ks)
            if (k > imbalance)
                a = a && median(max_compute[k]) >= 0.85 * median(max_compute[imbalance]);
        for (std::size_t i = 2; i < ks.size(); ++i)
            b = b && median(idle_wait[ks[i]]) > median(idle_wait[ks[i - 1]]);
        std::size_t best = ks[0];
        for (auto k : ks)
            if (median(wall[k]) < median(wall[best]))
                best = k;
        const bool c = best < 16;
        d = "imbalance_at=" + std::to_string(imbalance) + " (a)=" + (a ? "ok" : "no") + " (b)=" + (b ? "ok" : "no") +
            " (c)best_k=" + std::to_string(best) + os.str();
        return a && b && c;
    });

    check("quantum-event-dominance", 60, [&](std::string& d) {
        const auto& t = topologies[0];
        const auto r = par::run_simulation(t, part::Partition::round_robin(t.routers.size(), 1), par::RunConfig{});
        const double f = r.quantum_event_fraction();
        d = "photon_arrival_fraction=" + std::to_string(f);
        return f >= 0.8;
    });

    check("loss-model", 60, [&](std::string& d) {
        bool ok = true;
        const std::uint64_t n = 100'000;
        struct Setting
        {
            double db_per_km, meters;
        };
        for (const Setting s : {Setting{0.2, 50'000.0}, Setting{0.2, 10'000.0}, Setting{0.5, 30'000.0}})
        {
            net::LinearParams lp;
            lp.routers = 2;
            lp.link_length_m = s.meters;
            lp.workload.attenuation_db_per_km = s.db_per_km;
            const auto t = net::gen_linear(lp);
            const net::QkdModel m(t, 4242);
            std::uint64_t survived = 0;
            for (std::uint64_t photon = 0; photon < n; ++photon)
                survived += m.survives(0, 0, photon);
            const double p = std::pow(10.0, -s.db_per_km * (s.meters / 1000.0) / 10.0);
            const double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
            const double dev = std::abs(static_cast<double>(survived) - static_cast<double>(n) * p) / sigma;
            ok = ok && dev <= 3.0;
            std::ostringstream os;
            os.precision(3);
            os << " (" << s.db_per_km << "dB/km," << s.meters / 1000 << "km): p=" << p << " dev=" << dev << "sigma";
            d += os.str();
        }
        return ok;
    });

    return failures;
}
