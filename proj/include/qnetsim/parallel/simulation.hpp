#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/net/metrics.hpp"
#include "qnetsim/net/qkd.hpp"
#include "qnetsim/net/topology.hpp"
#include "qnetsim/parallel/exchange.hpp"
#include "qnetsim/parallel/plan.hpp"
#include "qnetsim/parallel/socket_exchange.hpp"
#include "qnetsim/parallel/worker.hpp"
#include "qnetsim/partition/partition.hpp"
#include "qnetsim/qsm/service.hpp"
#include "qnetsim/qsm/transport.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

namespace qnetsim::par
{
    enum class QsmTransport
    {
        InProc,
        Socket,
    };

    /// How workers reach each other. Threads share memory; Socket runs the
    /// workers as threads talking to a hub over TCP; Process forks one OS
    /// process per worker (the global QSM is then always reached over TCP).
    enum class WorkerTransport
    {
        Threads,
        Socket,
        Process,
    };

    struct RunConfig
    {
        std::size_t num_workers = 1;
        std::uint64_t seed = 1;
        SimTime stop_time = kTimeInfinity;
        QsmTransport qsm = QsmTransport::InProc;
        std::optional<net_io::Endpoint> qsm_addr{}; // external global QSM server
        WorkerTransport transport = WorkerTransport::Threads;
        std::optional<SimTime> lookahead{}; // overrides the computed value
    };

    struct RunResult
    {
        SimTime lookahead{};
        std::vector<WorkerResult> workers;
        std::vector<net::RouterSummary> routers;
        std::vector<net::SessionMetrics> sessions;
        std::uint64_t digest = 0;
        std::array<std::uint64_t, kEventKindCount> census{};
        std::uint64_t events_executed = 0;
        std::uint64_t epochs = 0;
        std::int64_t wall_ns = 0;

        double quantum_event_fraction() const noexcept
        {
            return events_executed == 0
                       ? 0.0
                       : static_cast<double>(census[static_cast<std::size_t>(EventKind::PhotonArrival)]) /
                             static_cast<double>(events_executed);
        }
    };

    namespace detail
    {
        inline std::vector<WorkerResult> run_threads(const net::QkdModel& model, const part::Partition& p,
                                                     const RunConfig& cfg, SimTime lookahead)
        {
            const std::size_t n = cfg.num_workers;
            std::vector<WorkerResult> results(n);

            std::optional<qsm::GlobalQsmService> service;
            std::unique_ptr<qsm::Server> server;
            std::optional<net_io::Endpoint> qsm_ep;
            if (n > 1)
            {
                if (cfg.qsm == QsmTransport::Socket)
                {
                    if (cfg.qsm_addr)
                        qsm_ep = cfg.qsm_addr;
                    else
                    {
                        service.emplace(n, [&p](qsm::MemoryKey k) { return p.owner(net::key_router(k)); });
                        server = std::make_unique<qsm::Server>(*service, net_io::Endpoint{"127.0.0.1", 0});
                        qsm_ep = net_io::Endpoint{"127.0.0.1", server->port()};
                        server->start(n);
                    }
                }
                else
                    service.emplace(n, [&p](qsm::MemoryKey k) { return p.owner(net::key_router(k)); });
            }

            std::optional<InProcFabric> fabric;
            std::unique_ptr<SyncHub> hub;
            std::thread hub_thread;
            std::exception_ptr hub_error;
            if (n > 1 && cfg.transport == WorkerTransport::Socket)
            {
                hub = std::make_unique<SyncHub>(n, p.assignment, net_io::Endpoint{"127.0.0.1", 0});
                hub_thread = std::thread([&] {
                    try
                    {
                        hub->serve();
                    }
                    catch (...)
                    {
                        hub_error = std::current_exception();
                    }
                });
            }
            else if (n > 1)
                fabric.emplace(n);
            const std::uint16_t hub_port = hub ? hub->port() : 0;

            auto body = [&](WorkerId rank) {
                WorkerResult& out = results[rank];
                out.worker = rank;
                try
                {
                    std::unique_ptr<Exchange> ex;
                    if (n == 1)
                        ex = std::make_unique<LocalExchange>();
                    else if (hub)
                        ex = std::make_unique<SocketExchange>(rank, n, net_io::Endpoint{"127.0.0.1", hub_port});
                    else
                        ex = std::make_unique<InProcFabric::Endpoint>(fabric->endpoint(rank));
                    std::unique_ptr<qsm::Connection> conn;
                    if (qsm_ep)
                        conn = std::make_unique<qsm::SocketConnection>(*qsm_ep);
                    else if (service)
                        conn = std::make_unique<qsm::InProcConnection>(*service);
                    Worker w(model, p, WorkerConfig{rank, n, lookahead, cfg.stop_time}, *ex, conn.get());
                    out = w.run();
                }
                catch (const Error& e)
                {
                    out.error_code = e.code();
                    out.error = e.what();
                    if (service)
                        service->abort();
                    if (hub)
                        hub->cancel();
                }
            };

            std::vector<std::thread> threads;
            for (WorkerId r = 1; r < n; ++r)
                threads.emplace_back(body, r);
            body(0);
            for (auto& t : threads)
                t.join();
            if (hub_thread.joinable())
                hub_thread.join();
            if (server)
                server->wait();
            return results;
        }

        inline std::vector<WorkerResult> run_processes(const net::QkdModel& model, const part::Partition& p,
                                                       const RunConfig& cfg, SimTime lookahead)
        {
            const std::size_t n = cfg.num_workers;
            namespace fs = std::filesystem;
            std::string tmpl = (fs::temp_directory_path() / "qnetsim-XXXXXX").string();
            if (::mkdtemp(tmpl.data()) == nullptr)
                throw Error(ErrorCode::TransportFailure, "mkdtemp failed");
            const fs::path dir = tmpl;

            // Sockets are bound before forking so children can connect at once;
            // no threads may exist in this process until every fork is done.
            std::optional<qsm::GlobalQsmService> service;
            std::unique_ptr<qsm::Server> server;
            net_io::Endpoint qsm_ep;
            if (cfg.qsm_addr)
                qsm_ep = *cfg.qsm_addr;
            else
            {
                service.emplace(n, [&p](qsm::MemoryKey k) { return p.owner(net::key_router(k)); });
                server = std::make_unique<qsm::Server>(*service, net_io::Endpoint{"127.0.0.1", 0});
                qsm_ep = net_io::Endpoint{"127.0.0.1", server->port()};
            }
            SyncHub hub(n, p.assignment, net_io::Endpoint{"127.0.0.1", 0});
            const net_io::Endpoint hub_ep{"127.0.0.1", hub.port()};

            std::vector<pid_t> children;
            for (WorkerId rank = 0; rank < n; ++rank)
            {
                const pid_t pid = ::fork();
                if (pid < 0)
                    throw Error(ErrorCode::TransportFailure, "fork failed");
                if (pid == 0)
                {
                    WorkerResult out;
                    out.worker = rank;
                    try
                    {
                        SocketExchange ex(rank, n, hub_ep);
                        qsm::SocketConnection conn(qsm_ep);
                        Worker w(model, p, WorkerConfig{rank, n, lookahead, cfg.stop_time}, ex, &conn);
                        out = w.run();
                    }
                    catch (const Error& e)
                    {
                        out.error_code = e.code();
                        out.error = e.what();
                    }
                    catch (const std::exception& e)
                    {
                        out.error_code = ErrorCode::TransportFailure;
                        out.error = e.what();
                    }
                    std::ofstream(dir / ("worker_" + std::to_string(rank) + ".json")) << to_json(out).dump();
                    std::_Exit(out.error_code ? 1 : 0);
                }
                children.push_back(pid);
            }

            if (server)
                server->start(n);
            std::exception_ptr hub_error;
            try
            {
                hub.serve();
            }
            catch (...)
            {
                hub_error = std::current_exception();
            }
            for (pid_t c : children)
            {
                int status = 0;
                ::waitpid(c, &status, 0);
            }
            if (server)
            {
                if (hub_error)
                    server->stop();
                else
                    server->wait();
            }

            std::vector<WorkerResult> results(n);
            for (WorkerId rank = 0; rank < n; ++rank)
            {
                const fs::path file = dir / ("worker_" + std::to_string(rank) + ".json");
                std::ifstream in(file);
                if (!in)
                {
                    results[rank].worker = rank;
                    results[rank].error_code = ErrorCode::TransportFailure;
                    results[rank].error = "worker process " + std::to_string(rank) + " left no result";
                    continue;
                }
                results[rank] = worker_result_from_json(nlohmann::json::parse(in));
            }
            std::error_code ec;
            fs::remove_all(dir, ec);
            return results;
        }
    } // namespace detail

    /// Runs the QKD workload over `partition` and gathers per-worker results.
    /// Throws the first worker error (by rank); causality violations surface
    /// this way.
    inline RunResult run_simulation(const net::Topology& topology, const part::Partition& partition, const RunConfig& cfg)
    {
        net::validate(topology);
        part::validate(partition, topology.routers.size());
        if (cfg.num_workers == 0 || partition.num_workers != cfg.num_workers)
            throw Error(ErrorCode::InvalidParameter, "partition is for " + std::to_string(partition.num_workers) +
                                                         " workers, run asked for " + std::to_string(cfg.num_workers));
        const net::QkdModel model(topology, cfg.seed);

        RunResult r;
        r.lookahead = cfg.lookahead ? *cfg.lookahead : compute_lookahead(topology, partition);
        if (cfg.num_workers > 1 && r.lookahead == SimTime::zero())
            throw Error(ErrorCode::InvalidParameter, "lookahead must be positive");

        const auto start = std::chrono::steady_clock::now();
        if (cfg.transport == WorkerTransport::Process && cfg.num_workers > 1)
            r.workers = detail::run_processes(model, partition, cfg, r.lookahead);
        else
            r.workers = detail::run_threads(model, partition, cfg, r.lookahead);
        r.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();

        // Prefer the root cause over the follow-on transport errors it triggers.
        const WorkerResult* failed = nullptr;
        for (const auto& w : r.workers)
            if (w.error_code && (failed == nullptr || (failed->error_code == ErrorCode::TransportFailure &&
                                                       w.error_code != ErrorCode::TransportFailure)))
                failed = &w;
        if (failed != nullptr)
            throw Error(*failed->error_code, "worker " + std::to_string(failed->worker) + ": " + failed->error);

        for (auto& w : r.workers)
        {
            r.events_executed += w.events_executed;
            r.epochs = std::max<std::uint64_t>(r.epochs, w.epochs.size());
            for (const auto& s : w.routers)
            {
                for (std::size_t k = 0; k < kEventKindCount; ++k)
                    r.census[k] += s.census[k];
                r.routers.push_back(s);
            }
        }
        std::sort(r.routers.begin(), r.routers.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        r.sessions = net::session_metrics(topology, r.routers);
        r.digest = net::equivalence_digest(r.routers, r.sessions);
        return r;
    }
} // namespace qnetsim::par
