#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/qsm/request.hpp"
#include "qnetsim/qsm/service.hpp"
#include "qnetsim/qsm/store.hpp"
#include "qnetsim/qsm/transport.hpp"

#include <functional>
#include <unordered_set>
#include <vector>

namespace qnetsim::qsm
{
    enum class Route
    {
        Local,
        Global,
    };

    /// One worker's view of the QSM hierarchy: its local store plus the
    /// pending batch for the global QSM.
    ///
    /// A request stays local when every key belongs to this worker and, for
    /// anything but SET, every key currently lives in the local store. All
    /// other requests are queued in program order and answered at flush().
    class Hierarchy
    {
    public:
        using Callback = std::function<void(const Response&)>;

        Hierarchy(WorkerId self, std::size_t num_workers, KeyOwner owner)
            : self_(self), num_workers_(num_workers), owner_(std::move(owner))
        {
        }

        Route route(const Request& req) const
        {
            if (num_workers_ == 1)
                return Route::Local;
            for (MemoryKey k : req.keys)
            {
                if (owner_(k) != self_)
                    return Route::Global;
                if (req.op == Op::Set ? global_resident_.count(k) != 0 : !local_.contains(k))
                    return Route::Global;
            }
            return Route::Local;
        }

        /// Local requests run now and invoke `done` immediately; global ones
        /// invoke it during the flush that serves them.
        Route submit(Request req, Callback done = {})
        {
            const Route r = route(req);
            if (r == Route::Local)
            {
                ++local_requests_;
                const Response resp = apply(local_, req);
                if (done)
                    done(resp);
                return r;
            }
            ++global_requests_;
            track_global(req);
            pending_.push_back(std::move(req));
            callbacks_.push_back(std::move(done));
            return r;
        }

        std::size_t pending() const noexcept { return pending_.size(); }

        /// Sends the pending batch (possibly empty), dispatches responses in
        /// order and adopts states handed back by the global QSM.
        void flush(Connection& conn, std::uint64_t epoch_index)
        {
            RequestBatch batch{self_, epoch_index, std::move(pending_)};
            pending_.clear();
            std::vector<Callback> callbacks = std::move(callbacks_);
            callbacks_.clear();
            BatchResponse resp = conn.flush(batch);
            if (resp.responses.size() != callbacks.size())
                throw Error(ErrorCode::TransportFailure, "global QSM answered " + std::to_string(resp.responses.size()) +
                                                             " of " + std::to_string(callbacks.size()) + " requests");
            for (auto& s : resp.handbacks)
            {
                for (MemoryKey k : s.keys)
                    global_resident_.erase(k);
                local_.adopt(std::move(s));
                ++handbacks_;
            }
            for (std::size_t i = 0; i < callbacks.size(); ++i)
                if (callbacks[i])
                    callbacks[i](resp.responses[i]);
        }

        StateStore& local() noexcept { return local_; }
        const StateStore& local() const noexcept { return local_; }

        std::uint64_t local_requests() const noexcept { return local_requests_; }
        std::uint64_t global_requests() const noexcept { return global_requests_; }
        std::uint64_t handbacks() const noexcept { return handbacks_; }

    private:
        void track_global(const Request& req)
        {
            switch (req.op)
            {
            case Op::Set:
                for (MemoryKey k : req.keys)
                    if (owner_(k) == self_)
                        global_resident_.insert(k);
                break;
            case Op::Measure:
            case Op::Remove:
                for (MemoryKey k : req.keys)
                    global_resident_.erase(k);
                break;
            case Op::Get:
                break;
            }
        }

        WorkerId self_;
        std::size_t num_workers_;
        KeyOwner owner_;
        StateStore local_;
        std::vector<Request> pending_;
        std::vector<Callback> callbacks_;
        std::unordered_set<MemoryKey> global_resident_;
        std::uint64_t local_requests_ = 0;
        std::uint64_t global_requests_ = 0;
        std::uint64_t handbacks_ = 0;
    };
} // namespace qnetsim::qsm
