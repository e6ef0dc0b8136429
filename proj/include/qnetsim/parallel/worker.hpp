#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/net/metrics.hpp"
#include "qnetsim/net/qkd.hpp"
#include "qnetsim/parallel/exchange.hpp"
#include "qnetsim/parallel/plan.hpp"
#include "qnetsim/partition/partition.hpp"
#include "qnetsim/qsm/hierarchy.hpp"
#include "qnetsim/timeline.hpp"

#include <nlohmann/json.hpp>

#include <time.h>

#include <algorithm>
#include <chrono>
#include <exception>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qnetsim::par
{
    /// Wall-clock breakdown of one epoch on one worker.
    struct EpochTiming
    {
        WorkerId worker = 0;
        std::uint64_t epoch_index = 0;
        std::int64_t compute_ns = 0;
        std::int64_t barrier_wait_ns = 0;
        std::int64_t exchange_ns = 0;
        std::int64_t qsm_socket_ns = 0;
        std::uint64_t events_executed = 0;

        std::int64_t total_ns() const noexcept { return compute_ns + barrier_wait_ns + exchange_ns + qsm_socket_ns; }
    };

    struct WorkerResult
    {
        WorkerId worker = 0;
        std::vector<EpochTiming> epochs;
        std::vector<EpochPlan> plans;
        std::int64_t setup_ns = 0; // bootstrap and first negotiation, outside any epoch
        std::int64_t wall_ns = 0;  // span of the epoch loop
        std::uint64_t events_executed = 0;
        std::uint64_t remote_sent = 0;
        std::uint64_t remote_received = 0;
        std::uint64_t qsm_local = 0;
        std::uint64_t qsm_global = 0;
        std::uint64_t qsm_handbacks = 0;
        std::vector<net::RouterSummary> routers;
        std::optional<ErrorCode> error_code; // set when this worker failed
        std::string error;
    };

    struct WorkerConfig
    {
        WorkerId rank = 0;
        std::size_t num_workers = 1;
        SimTime lookahead = kTimeInfinity;
        SimTime stop_time = kTimeInfinity;
    };

    inline std::int64_t thread_cpu_ns() noexcept
    {
        timespec ts{};
        ::clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
        return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
    }

    /// Runs the epoch loop for the routers one worker owns.
    ///
    /// Per epoch: compute (run_until horizon) | barrier | global QSM flush |
    /// event exchange + horizon all-reduce. The four categories tile the
    /// interval between consecutive all-reduce releases, so they add up to
    /// the loop's wall time.
    class Worker final : private net::Context
    {
    public:
        Worker(const net::QkdModel& model, const part::Partition& partition, WorkerConfig config, Exchange& exchange,
               qsm::Connection* global_qsm)
            : model_(model), partition_(partition), config_(config), exchange_(exchange), global_(global_qsm),
              timeline_(config.stop_time, config.rank),
              qsm_(config.rank, config.num_workers,
                   [&p = partition_](qsm::MemoryKey k) { return p.owner(net::key_router(k)); }),
              outbox_(config.num_workers)
        {
            for (EntityId r = 0; r < partition.routers(); ++r)
                if (partition.owner(r) == config.rank)
                    routers_.emplace(r, net::RouterState(r));
            timeline_.set_handler([this](const Event& e) {
                auto it = routers_.find(e.target);
                if (it == routers_.end())
                    throw Error(ErrorCode::InvalidParameter,
                                "worker " + std::to_string(config_.rank) + " got event for router " + std::to_string(e.target));
                model_.handle(it->second, e, *this);
            });
        }

        WorkerResult run()
        {
            using clock = SyncClock;
            auto ns = [](clock::time_point a, clock::time_point b) {
                return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
            };
            const bool serial = config_.num_workers == 1;
            WorkerResult out;
            out.worker = config_.rank;

            const auto setup_start = clock::now();
            std::exception_ptr failure;
            try
            {
                for (auto& [id, state] : routers_)
                    model_.bootstrap(state, *this);
            }
            catch (...)
            {
                failure = std::current_exception();
            }
            ReduceResult rr = exchange_.reduce(failure ? kTimeInfinity : timeline_.peek_next_time(), failure != nullptr);
            plan_ = plan_from_min(rr.min_next, config_.lookahead, config_.stop_time, 0, SimTime::zero());
            // Epoch boundaries are the release instants of the closing
            // all-reduce, shared by every worker.
            auto t = rr.released_at;
            out.setup_ns = ns(setup_start, t);
            const auto loop_start = t;

            while (!plan_.complete && !rr.abort)
            {
                out.plans.push_back(plan_);
                EpochTiming timing;
                timing.worker = config_.rank;
                timing.epoch_index = plan_.epoch_index;
                const auto t0 = t;
                const std::uint64_t before = timeline_.events_executed();
                const std::int64_t cpu0 = thread_cpu_ns();
                try
                {
                    timeline_.run_until(plan_.horizon);
                }
                catch (...)
                {
                    failure = std::current_exception();
                }
                const std::int64_t cpu = thread_cpu_ns() - cpu0;
                timing.events_executed = timeline_.events_executed() - before;
                const auto t1 = clock::now();
                const auto t2 = exchange_.barrier();
                if (!serial && global_ != nullptr)
                {
                    try
                    {
                        qsm_.flush(*global_, plan_.epoch_index);
                    }
                    catch (...)
                    {
                        if (!failure)
                            failure = std::current_exception();
                    }
                }
                const auto t3 = clock::now();
                std::vector<RemoteEventBatch> outgoing;
                for (WorkerId w = 0; w < outbox_.size(); ++w)
                    if (!outbox_[w].empty())
                    {
                        out.remote_sent += outbox_[w].size();
                        outgoing.push_back({config_.rank, w, std::move(outbox_[w])});
                        outbox_[w].clear();
                    }
                auto incoming = exchange_.exchange(std::move(outgoing));
                if (!failure)
                {
                    try
                    {
                        out.remote_received += merge_remote_events(timeline_, std::move(incoming));
                    }
                    catch (...)
                    {
                        failure = std::current_exception();
                    }
                }
                rr = exchange_.reduce(failure ? kTimeInfinity : timeline_.peek_next_time(), failure != nullptr);
                const EpochPlan next =
                    plan_from_min(rr.min_next, config_.lookahead, config_.stop_time, plan_.epoch_index + 1, plan_.horizon);
                t = rr.released_at;
                if (serial)
                    timing.compute_ns = ns(t0, t);
                else
                {
                    // Compute is CPU time spent executing events. Anything else
                    // before the barrier released (including time spent
                    // descheduled while peers ran) counts as waiting.
                    const std::int64_t to_release = ns(t0, t2);
                    timing.compute_ns = std::clamp<std::int64_t>(cpu, 0, std::min(ns(t0, t1), to_release));
                    timing.barrier_wait_ns = to_release - timing.compute_ns;
                    timing.qsm_socket_ns = ns(t2, t3);
                    timing.exchange_ns = ns(t3, t);
                }
                out.epochs.push_back(timing);
                plan_ = next;
            }
            out.wall_ns = ns(loop_start, t);
            exchange_.finish();

            out.events_executed = timeline_.events_executed();
            out.qsm_local = qsm_.local_requests();
            out.qsm_global = qsm_.global_requests();
            out.qsm_handbacks = qsm_.handbacks();
            for (const auto& [id, state] : routers_)
                out.routers.push_back(net::summarize(state));
            if (failure)
            {
                try
                {
                    std::rethrow_exception(failure);
                }
                catch (const Error& e)
                {
                    out.error_code = e.code();
                    out.error = e.what();
                }
                catch (const std::exception& e)
                {
                    out.error_code = ErrorCode::InvalidParameter;
                    out.error = e.what();
                }
            }
            else if (rr.abort)
            {
                out.error = "aborted by another worker";
            }
            return out;
        }

        const Timeline& timeline() const noexcept { return timeline_; }

    private:
        SimTime now() const override { return timeline_.now(); }

        void send(Event e) override
        {
            const WorkerId dest = partition_.owner(e.target);
            if (dest == config_.rank)
            {
                timeline_.schedule(std::move(e));
                return;
            }
            if (e.time < plan_.epoch_start + config_.lookahead)
            {
                std::ostringstream msg;
                msg << "epoch " << plan_.epoch_index << ": worker " << config_.rank << " sent an event for " << e.time << " to worker " << dest
                    << ", before epoch start " << plan_.epoch_start << " + lookahead " << config_.lookahead;
                throw Error(ErrorCode::CausalityViolation, msg.str());
            }
            outbox_[dest].push_back(std::move(e));
        }

        qsm::Hierarchy& qsm() override { return qsm_; }

        const net::QkdModel& model_;
        const part::Partition& partition_;
        WorkerConfig config_;
        Exchange& exchange_;
        qsm::Connection* global_;
        Timeline timeline_;
        qsm::Hierarchy qsm_;
        std::map<EntityId, net::RouterState> routers_;
        std::vector<std::vector<Event>> outbox_;
        EpochPlan plan_{};
    };

    inline nlohmann::json to_json(const EpochTiming& t)
    {
        return {{"worker", t.worker},           {"epoch", t.epoch_index},         {"compute_ns", t.compute_ns},
                {"barrier_wait_ns", t.barrier_wait_ns}, {"exchange_ns", t.exchange_ns}, {"qsm_socket_ns", t.qsm_socket_ns},
                {"events_executed", t.events_executed}};
    }

    inline EpochTiming epoch_timing_from_json(const nlohmann::json& j)
    {
        EpochTiming t;
        t.worker = j.at("worker").get<WorkerId>();
        t.epoch_index = j.at("epoch").get<std::uint64_t>();
        t.compute_ns = j.at("compute_ns").get<std::int64_t>();
        t.barrier_wait_ns = j.at("barrier_wait_ns").get<std::int64_t>();
        t.exchange_ns = j.at("exchange_ns").get<std::int64_t>();
        t.qsm_socket_ns = j.at("qsm_socket_ns").get<std::int64_t>();
        t.events_executed = j.at("events_executed").get<std::uint64_t>();
        return t;
    }

    inline nlohmann::json to_json(const EpochPlan& p)
    {
        return {{"epoch", p.epoch_index}, {"start", p.epoch_start.ticks()}, {"horizon", p.horizon.ticks()}};
    }

    /// Lossless form used to ship a worker's result out of a child process.
    inline nlohmann::json to_json(const WorkerResult& r)
    {
        nlohmann::json epochs = nlohmann::json::array();
        for (const auto& e : r.epochs)
            epochs.push_back(to_json(e));
        nlohmann::json plans = nlohmann::json::array();
        for (const auto& p : r.plans)
            plans.push_back({p.epoch_index, p.epoch_start.ticks(), p.horizon.ticks(), p.lookahead.ticks()});
        nlohmann::json routers = nlohmann::json::array();
        for (const auto& s : r.routers)
            routers.push_back(net::to_json(s));
        nlohmann::json j = {{"worker", r.worker},
                            {"epochs", epochs},
                            {"plans", plans},
                            {"setup_ns", r.setup_ns},
                            {"wall_ns", r.wall_ns},
                            {"events_executed", r.events_executed},
                            {"remote_sent", r.remote_sent},
                            {"remote_received", r.remote_received},
                            {"qsm_local", r.qsm_local},
                            {"qsm_global", r.qsm_global},
                            {"qsm_handbacks", r.qsm_handbacks},
                            {"routers", routers},
                            {"error", r.error}};
        if (r.error_code)
            j["error_code"] = static_cast<int>(*r.error_code);
        return j;
    }

    inline WorkerResult worker_result_from_json(const nlohmann::json& j)
    {
        WorkerResult r;
        r.worker = j.at("worker").get<WorkerId>();
        for (const auto& e : j.at("epochs"))
            r.epochs.push_back(epoch_timing_from_json(e));
        for (const auto& p : j.at("plans"))
            r.plans.push_back({p.at(0).get<std::uint64_t>(), SimTime{p.at(1).get<std::uint64_t>()},
                               SimTime{p.at(2).get<std::uint64_t>()}, SimTime{p.at(3).get<std::uint64_t>()}, false});
        r.setup_ns = j.at("setup_ns").get<std::int64_t>();
        r.wall_ns = j.at("wall_ns").get<std::int64_t>();
        r.events_executed = j.at("events_executed").get<std::uint64_t>();
        r.remote_sent = j.at("remote_sent").get<std::uint64_t>();
        r.remote_received = j.at("remote_received").get<std::uint64_t>();
        r.qsm_local = j.at("qsm_local").get<std::uint64_t>();
        r.qsm_global = j.at("qsm_global").get<std::uint64_t>();
        r.qsm_handbacks = j.at("qsm_handbacks").get<std::uint64_t>();
        for (const auto& s : j.at("routers"))
            r.routers.push_back(net::router_summary_from_json(s));
        r.error = j.at("error").get<std::string>();
        if (j.contains("error_code"))
            r.error_code = static_cast<ErrorCode>(j.at("error_code").get<int>());
        return r;
    }
} // namespace qnetsim::par
