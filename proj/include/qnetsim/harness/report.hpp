#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/hash.hpp"
#include "qnetsim/net/topology.hpp"
#include "qnetsim/parallel/simulation.hpp"
#include "qnetsim/partition/partition.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace qnetsim::harness
{
    inline const char* kEpochCsvHeader = "worker,epoch,compute_ns,barrier_wait_ns,exchange_ns,qsm_socket_ns,events_executed";

    struct WorkerTotals
    {
        WorkerId worker = 0;
        std::int64_t compute_ns = 0;
        std::int64_t barrier_wait_ns = 0;
        std::int64_t exchange_ns = 0;
        std::int64_t qsm_socket_ns = 0;
        std::int64_t wall_ns = 0;
        std::uint64_t events_executed = 0;
        std::uint64_t epochs = 0;

        std::int64_t accounted_ns() const noexcept { return compute_ns + barrier_wait_ns + exchange_ns + qsm_socket_ns; }
    };

    struct SessionLine
    {
        std::uint32_t session = 0;
        std::uint64_t delivered_bits = 0;
        bool consistent = false;
        std::vector<std::uint64_t> sifted_per_hop; // receiver side
    };

    /// Everything a run produced, plus enough configuration to rerun it.
    struct RunReport
    {
        std::string topology_path;
        std::string partition_path;
        std::string topology_digest;
        std::uint64_t seed = 0;
        std::size_t num_workers = 1;
        SimTime stop_time = kTimeInfinity;
        std::string qsm_transport = "inproc";
        std::string worker_transport = "threads";
        std::vector<WorkerId> assignment;
        SimTime lookahead = kTimeInfinity;

        std::vector<WorkerTotals> workers;
        std::vector<par::EpochTiming> epochs;
        std::vector<SessionLine> sessions;
        std::array<std::uint64_t, kEventKindCount> census{};
        std::uint64_t events_executed = 0;
        std::uint64_t digest = 0;
        std::int64_t wall_ns = 0;
    };

    inline const char* to_string(par::QsmTransport t) { return t == par::QsmTransport::Socket ? "socket" : "inproc"; }

    inline const char* to_string(par::WorkerTransport t)
    {
        switch (t)
        {
        case par::WorkerTransport::Socket:
            return "socket";
        case par::WorkerTransport::Process:
            return "process";
        default:
            return "threads";
        }
    }

    inline WorkerTotals totals_of(const par::WorkerResult& w)
    {
        WorkerTotals t;
        t.worker = w.worker;
        t.wall_ns = w.wall_ns;
        t.events_executed = w.events_executed;
        t.epochs = w.epochs.size();
        for (const auto& e : w.epochs)
        {
            t.compute_ns += e.compute_ns;
            t.barrier_wait_ns += e.barrier_wait_ns;
            t.exchange_ns += e.exchange_ns;
            t.qsm_socket_ns += e.qsm_socket_ns;
        }
        return t;
    }

    inline RunReport make_report(const net::Topology& topology, const part::Partition& partition, const par::RunConfig& cfg,
                                 const par::RunResult& r)
    {
        RunReport rep;
        rep.topology_digest = to_hex(net::topology_digest(topology));
        rep.seed = cfg.seed;
        rep.num_workers = cfg.num_workers;
        rep.stop_time = cfg.stop_time;
        rep.qsm_transport = to_string(cfg.qsm);
        rep.worker_transport = to_string(cfg.transport);
        rep.assignment = partition.assignment;
        rep.lookahead = r.lookahead;
        for (const auto& w : r.workers)
        {
            rep.workers.push_back(totals_of(w));
            rep.epochs.insert(rep.epochs.end(), w.epochs.begin(), w.epochs.end());
        }
        std::stable_sort(rep.epochs.begin(), rep.epochs.end(), [](const auto& a, const auto& b) {
            return std::tie(a.worker, a.epoch_index) < std::tie(b.worker, b.epoch_index);
        });
        for (const auto& s : r.sessions)
        {
            SessionLine line{s.session, s.delivered_bits, s.end_to_end_consistent, {}};
            for (const auto& h : s.hops)
                line.sifted_per_hop.push_back(h.receiver_sifted);
            rep.sessions.push_back(std::move(line));
        }
        rep.census = r.census;
        rep.events_executed = r.events_executed;
        rep.digest = r.digest;
        rep.wall_ns = r.wall_ns;
        return rep;
    }

    inline nlohmann::json to_json(const RunReport& r)
    {
        nlohmann::json workers = nlohmann::json::array();
        for (const auto& w : r.workers)
            workers.push_back({{"worker", w.worker},
                               {"compute_ns", w.compute_ns},
                               {"barrier_wait_ns", w.barrier_wait_ns},
                               {"exchange_ns", w.exchange_ns},
                               {"qsm_socket_ns", w.qsm_socket_ns},
                               {"wall_ns", w.wall_ns},
                               {"events_executed", w.events_executed},
                               {"epochs", w.epochs}});
        nlohmann::json epochs = nlohmann::json::array();
        for (const auto& e : r.epochs)
            epochs.push_back(par::to_json(e));
        nlohmann::json sessions = nlohmann::json::array();
        for (const auto& s : r.sessions)
            sessions.push_back({{"session", s.session},
                                {"delivered_bits", s.delivered_bits},
                                {"consistent", s.consistent},
                                {"sifted_per_hop", s.sifted_per_hop}});
        nlohmann::json census;
        for (std::size_t k = 0; k < kEventKindCount; ++k)
            census[to_string(static_cast<EventKind>(k))] = r.census[k];
        return {{"config",
                 {{"topology", r.topology_path},
                  {"partition", r.partition_path},
                  {"topology_digest", r.topology_digest},
                  {"seed", r.seed},
                  {"num_workers", r.num_workers},
                  {"stop_time_ps", r.stop_time.ticks()},
                  {"qsm_transport", r.qsm_transport},
                  {"worker_transport", r.worker_transport},
                  {"assignment", r.assignment}}},
                {"lookahead_ps", r.lookahead.ticks()},
                {"workers", workers},
                {"epochs", epochs},
                {"sessions", sessions},
                {"census", census},
                {"events_executed", r.events_executed},
                {"digest", to_hex(r.digest)},
                {"wall_ns", r.wall_ns}};
    }

    inline RunReport run_report_from_json(const nlohmann::json& j)
    {
        try
        {
            RunReport r;
            const auto& c = j.at("config");
            r.topology_path = c.at("topology").get<std::string>();
            r.partition_path = c.at("partition").get<std::string>();
            r.topology_digest = c.at("topology_digest").get<std::string>();
            r.seed = c.at("seed").get<std::uint64_t>();
            r.num_workers = c.at("num_workers").get<std::size_t>();
            r.stop_time = SimTime{c.at("stop_time_ps").get<std::uint64_t>()};
            r.qsm_transport = c.at("qsm_transport").get<std::string>();
            r.worker_transport = c.at("worker_transport").get<std::string>();
            r.assignment = c.at("assignment").get<std::vector<WorkerId>>();
            r.lookahead = SimTime{j.at("lookahead_ps").get<std::uint64_t>()};
            for (const auto& w : j.at("workers"))
            {
                WorkerTotals t;
                t.worker = w.at("worker").get<WorkerId>();
                t.compute_ns = w.at("compute_ns").get<std::int64_t>();
                t.barrier_wait_ns = w.at("barrier_wait_ns").get<std::int64_t>();
                t.exchange_ns = w.at("exchange_ns").get<std::int64_t>();
                t.qsm_socket_ns = w.at("qsm_socket_ns").get<std::int64_t>();
                t.wall_ns = w.at("wall_ns").get<std::int64_t>();
                t.events_executed = w.at("events_executed").get<std::uint64_t>();
                t.epochs = w.at("epochs").get<std::uint64_t>();
                r.workers.push_back(t);
            }
            for (const auto& e : j.at("epochs"))
                r.epochs.push_back(par::epoch_timing_from_json(e));
            for (const auto& s : j.at("sessions"))
                r.sessions.push_back({s.at("session").get<std::uint32_t>(), s.at("delivered_bits").get<std::uint64_t>(),
                                      s.at("consistent").get<bool>(),
                                      s.at("sifted_per_hop").get<std::vector<std::uint64_t>>()});
            for (std::size_t k = 0; k < kEventKindCount; ++k)
                r.census[k] = j.at("census").at(to_string(static_cast<EventKind>(k))).get<std::uint64_t>();
            r.events_executed = j.at("events_executed").get<std::uint64_t>();
            r.digest = std::stoull(j.at("digest").get<std::string>(), nullptr, 16);
            r.wall_ns = j.at("wall_ns").get<std::int64_t>();
            return r;
        }
        catch (const nlohmann::json::exception& e)
        {
            throw Error(ErrorCode::SchemaViolation, std::string("run report: ") + e.what());
        }
    }

    inline void write_epoch_csv(std::ostream& os, const std::vector<par::EpochTiming>& epochs)
    {
        os << kEpochCsvHeader << '\n';
        for (const auto& e : epochs)
            os << e.worker << ',' << e.epoch_index << ',' << e.compute_ns << ',' << e.barrier_wait_ns << ','
               << e.exchange_ns << ',' << e.qsm_socket_ns << ',' << e.events_executed << '\n';
    }

    /// One point of the per-worker compute series.
    struct TracePoint
    {
        WorkerId worker = 0;
        std::uint64_t group = 0;
        std::uint64_t first_epoch = 0;
        std::uint64_t epochs = 0; // constituents; the last group may be short
        std::int64_t compute_ns = 0;

        bool operator==(const TracePoint&) const = default;
    };

    /// Sums compute_ns over consecutive runs of k epochs, per worker.
    inline std::vector<TracePoint> aggregate_trace(const std::vector<par::EpochTiming>& epochs, std::uint64_t k)
    {
        if (k == 0)
            throw Error(ErrorCode::InvalidParameter, "collapse factor must be at least 1");
        std::map<WorkerId, std::vector<const par::EpochTiming*>> by_worker;
        for (const auto& e : epochs)
            by_worker[e.worker].push_back(&e);
        std::vector<TracePoint> out;
        for (auto& [worker, list] : by_worker)
        {
            std::stable_sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->epoch_index < b->epoch_index; });
            for (std::size_t i = 0; i < list.size(); ++i)
            {
                if (i % k == 0)
                    out.push_back({worker, i / k, list[i]->epoch_index, 0, 0});
                out.back().epochs += 1;
                out.back().compute_ns += list[i]->compute_ns;
            }
        }
        return out;
    }

    inline void write_trace_csv(std::ostream& os, const std::vector<TracePoint>& trace)
    {
        os << "worker,group,first_epoch,epochs,compute_ns\n";
        for (const auto& p : trace)
            os << p.worker << ',' << p.group << ',' << p.first_epoch << ',' << p.epochs << ',' << p.compute_ns << '\n';
    }

    /// Runs of one workload at several worker counts.
    struct ScalingSweep
    {
        std::string topology_digest;
        std::uint64_t seed = 0;
        std::vector<RunReport> runs;
    };

    using PartitionFor = std::function<part::Partition(std::size_t workers)>;

    inline ScalingSweep run_sweep(const net::Topology& topology, const std::vector<std::size_t>& worker_counts,
                                  const PartitionFor& partition_for, par::RunConfig cfg)
    {
        ScalingSweep sweep;
        sweep.topology_digest = to_hex(net::topology_digest(topology));
        sweep.seed = cfg.seed;
        for (std::size_t k : worker_counts)
        {
            const part::Partition p = partition_for(k);
            cfg.num_workers = k;
            const par::RunResult r = par::run_simulation(topology, p, cfg);
            sweep.runs.push_back(make_report(topology, p, cfg, r));
        }
        return sweep;
    }

    inline nlohmann::json to_json(const ScalingSweep& s)
    {
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& r : s.runs)
            runs.push_back(to_json(r));
        return {{"topology_digest", s.topology_digest}, {"seed", s.seed}, {"runs", runs}};
    }

    inline ScalingSweep sweep_from_json(const nlohmann::json& j)
    {
        ScalingSweep s;
        if (j.contains("runs"))
        {
            s.topology_digest = j.at("topology_digest").get<std::string>();
            s.seed = j.at("seed").get<std::uint64_t>();
            for (const auto& r : j.at("runs"))
                s.runs.push_back(run_report_from_json(r));
        }
        else
        {
            // A single run report reads as a one-point sweep.
            s.runs.push_back(run_report_from_json(j));
            s.topology_digest = s.runs[0].topology_digest;
            s.seed = s.runs[0].seed;
        }
        for (const auto& r : s.runs)
            if (r.topology_digest != s.topology_digest || r.seed != s.seed)
                throw Error(ErrorCode::SchemaViolation, "sweep mixes topologies or seeds");
        return s;
    }

    enum class BreakdownMode
    {
        Legacy,    // wait and exchange merged into one sync column
        Split,     // wait and exchange reported separately
        Redefined, // wait counted as compute
    };

    inline BreakdownMode parse_mode(const std::string& s)
    {
        if (s == "legacy")
            return BreakdownMode::Legacy;
        if (s == "split")
            return BreakdownMode::Split;
        if (s == "redefined")
            return BreakdownMode::Redefined;
        throw Error(ErrorCode::InvalidParameter, "unknown mode '" + s + "' (legacy, split, redefined)");
    }

    /// One worker of one run, in the columns of the chosen mode. Columns a
    /// mode does not use are zero.
    struct BreakdownRow
    {
        std::size_t workers = 0;
        WorkerId worker = 0;
        std::int64_t compute_ns = 0;
        std::int64_t wait_ns = 0;
        std::int64_t exchange_ns = 0;
        std::int64_t sync_ns = 0;
        std::int64_t socket_ns = 0;
        std::uint64_t events = 0;
    };

    inline std::vector<BreakdownRow> report_breakdown(const ScalingSweep& sweep, BreakdownMode mode)
    {
        std::vector<BreakdownRow> rows;
        for (const auto& run : sweep.runs)
            for (const auto& w : run.workers)
            {
                BreakdownRow row;
                row.workers = run.num_workers;
                row.worker = w.worker;
                row.socket_ns = w.qsm_socket_ns;
                row.events = w.events_executed;
                switch (mode)
                {
                case BreakdownMode::Legacy:
                    row.compute_ns = w.compute_ns;
                    row.sync_ns = w.barrier_wait_ns + w.exchange_ns;
                    break;
                case BreakdownMode::Split:
                    row.compute_ns = w.compute_ns;
                    row.wait_ns = w.barrier_wait_ns;
                    row.exchange_ns = w.exchange_ns;
                    break;
                case BreakdownMode::Redefined:
                    row.compute_ns = w.compute_ns + w.barrier_wait_ns;
                    row.exchange_ns = w.exchange_ns;
                    break;
                }
                rows.push_back(row);
            }
        return rows;
    }

    inline void write_breakdown_csv(std::ostream& os, const std::vector<BreakdownRow>& rows, BreakdownMode mode)
    {
        switch (mode)
        {
        case BreakdownMode::Legacy:
            os << "workers,worker,compute_ns,sync_ns,socket_ns,events\n";
            for (const auto& r : rows)
                os << r.workers << ',' << r.worker << ',' << r.compute_ns << ',' << r.sync_ns << ',' << r.socket_ns << ','
                   << r.events << '\n';
            break;
        case BreakdownMode::Split:
            os << "workers,worker,compute_ns,wait_ns,exchange_ns,socket_ns,events\n";
            for (const auto& r : rows)
                os << r.workers << ',' << r.worker << ',' << r.compute_ns << ',' << r.wait_ns << ',' << r.exchange_ns << ','
                   << r.socket_ns << ',' << r.events << '\n';
            break;
        case BreakdownMode::Redefined:
            os << "workers,worker,compute_ns,exchange_ns,socket_ns,events\n";
            for (const auto& r : rows)
                os << r.workers << ',' << r.worker << ',' << r.compute_ns << ',' << r.exchange_ns << ',' << r.socket_ns
                   << ',' << r.events << '\n';
            break;
        }
    }

    /// Per worker count: mean over workers of each column, in milliseconds.
    inline void write_breakdown_table(std::ostream& os, const std::vector<BreakdownRow>& rows, BreakdownMode mode)
    {
        std::map<std::size_t, std::vector<const BreakdownRow*>> by_run;
        for (const auto& r : rows)
            by_run[r.workers].push_back(&r);
        auto ms = [](double ns) { return ns / 1e6; };
        os << std::fixed << std::setprecision(3);
        const bool legacy = mode == BreakdownMode::Legacy, split = mode == BreakdownMode::Split;
        os << std::setw(8) << "workers" << std::setw(14) << "compute_ms";
        if (legacy)
            os << std::setw(14) << "sync_ms";
        if (split)
            os << std::setw(14) << "wait_ms";
        if (!legacy)
            os << std::setw(14) << "exchange_ms";
        os << std::setw(14) << "socket_ms" << std::setw(16) << "max_compute_ms" << '\n';
        for (const auto& [k, list] : by_run)
        {
            double c = 0, s = 0, w = 0, x = 0, q = 0, mx = 0;
            for (const auto* r : list)
            {
                c += r->compute_ns;
                s += r->sync_ns;
                w += r->wait_ns;
                x += r->exchange_ns;
                q += r->socket_ns;
                mx = std::max(mx, static_cast<double>(r->compute_ns));
            }
            const double n = static_cast<double>(list.size());
            os << std::setw(8) << k << std::setw(14) << ms(c / n);
            if (legacy)
                os << std::setw(14) << ms(s / n);
            if (split)
                os << std::setw(14) << ms(w / n);
            if (!legacy)
                os << std::setw(14) << ms(x / n);
            os << std::setw(14) << ms(q / n) << std::setw(16) << ms(mx) << '\n';
        }
    }

    /// compute_ns per executed event for each run (workers with no events skipped).
    /// Large spread across worker counts points at per-worker overhead.
    inline std::map<std::size_t, double> per_event_compute(const ScalingSweep& sweep)
    {
        std::map<std::size_t, double> out;
        for (const auto& run : sweep.runs)
        {
            double ns = 0, events = 0;
            for (const auto& w : run.workers)
                if (w.events_executed > 0)
                {
                    ns += static_cast<double>(w.compute_ns);
                    events += static_cast<double>(w.events_executed);
                }
            out[run.num_workers] = events > 0 ? ns / events : 0.0;
        }
        return out;
    }
} // namespace qnetsim::harness
