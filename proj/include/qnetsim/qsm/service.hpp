#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"
#include "qnetsim/qsm/request.hpp"
#include "qnetsim/qsm/store.hpp"

#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

namespace qnetsim::qsm
{
    /// Maps a memory key to the worker that owns the memory.
    using KeyOwner = std::function<WorkerId(MemoryKey)>;

    /// The global quantum state manager. Single-threaded in effect: batches
    /// for an epoch are collected from every worker and applied one worker
    /// at a time in ascending WorkerId order, then epoch by epoch. Callers
    /// block until their epoch has been served.
    class GlobalQsmService
    {
    public:
        GlobalQsmService(std::size_t num_workers, KeyOwner owner)
            : num_workers_(num_workers), owner_(std::move(owner))
        {
            if (num_workers_ == 0)
                throw Error(ErrorCode::InvalidParameter, "global QSM needs at least one worker");
        }

        BatchResponse submit(RequestBatch batch)
        {
            std::unique_lock lock(mutex_);
            if (aborted_)
                throw Error(ErrorCode::TransportFailure, "global QSM aborted");
            if (batch.worker >= num_workers_)
                throw Error(ErrorCode::InvalidParameter, "batch from unknown worker " + std::to_string(batch.worker));
            const std::uint64_t epoch = batch.epoch_index;
            const WorkerId worker = batch.worker;
            Round& round = rounds_[epoch];
            if (round.batches.empty())
            {
                round.batches.resize(num_workers_);
                round.results.resize(num_workers_);
            }
            if (round.batches[worker] || round.results[worker])
                throw Error(ErrorCode::InvalidParameter, "duplicate batch for epoch " + std::to_string(epoch));
            round.batches[worker] = std::move(batch);
            if (++round.arrived == num_workers_)
            {
                serve(epoch, round);
                cv_.notify_all();
            }
            cv_.wait(lock, [&] { return aborted_ || round.results[worker].has_value(); });
            if (!round.results[worker])
                throw Error(ErrorCode::TransportFailure, "global QSM aborted");
            BatchResponse out = std::move(*round.results[worker]);
            round.results[worker].reset();
            if (++round.collected == num_workers_)
                rounds_.erase(epoch);
            return out;
        }

        /// Wakes all blocked callers with a transport failure.
        void abort()
        {
            std::lock_guard lock(mutex_);
            aborted_ = true;
            cv_.notify_all();
        }

        /// Only meaningful while no submit() is in flight.
        const StateStore& store() const noexcept { return store_; }
        std::uint64_t batches_served() const noexcept { return batches_served_; }
        std::uint64_t requests_applied() const noexcept { return requests_applied_; }

    private:
        struct Round
        {
            std::vector<std::optional<RequestBatch>> batches;
            std::vector<std::optional<BatchResponse>> results;
            std::size_t arrived = 0;
            std::size_t collected = 0;
        };

        void serve(std::uint64_t epoch, Round& round)
        {
            for (WorkerId w = 0; w < num_workers_; ++w)
            {
                RequestBatch& b = *round.batches[w];
                BatchResponse resp;
                resp.epoch_index = epoch;
                resp.worker = w;
                resp.responses = apply_all(store_, b.requests);
                requests_applied_ += b.requests.size();
                ++batches_served_;
                round.results[w] = std::move(resp);
                round.batches[w].reset();
            }
            // Hand states that no longer span workers back to their owner.
            // Without an owner map everything stays here.
            if (!owner_)
                return;
            auto confined = store_.extract_if([&](const QuantumState& s) {
                const WorkerId first = owner_(s.keys.front());
                if (first >= num_workers_)
                    return false;
                for (MemoryKey k : s.keys)
                    if (owner_(k) != first)
                        return false;
                return true;
            });
            for (auto& s : confined)
            {
                const WorkerId w = owner_(s.keys.front());
                round.results[w]->handbacks.push_back(std::move(s));
            }
        }

        std::size_t num_workers_;
        KeyOwner owner_;
        StateStore store_;
        std::mutex mutex_;
        std::condition_variable cv_;
        std::map<std::uint64_t, Round> rounds_;
        bool aborted_ = false;
        std::uint64_t batches_served_ = 0;
        std::uint64_t requests_applied_ = 0;
    };
} // namespace qnetsim::qsm
