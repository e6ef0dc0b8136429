#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"
#include "qnetsim/sim_time.hpp"

#include <cstdint>
#include <functional>
#include <queue>
#include <sstream>
#include <tuple>
#include <utility>
#include <vector>

namespace qnetsim
{
    /// Identifies a queued event for cancellation.
    struct EventHandle
    {
        SimTime time{};
        std::uint64_t seq = kUnsetSeq;
        std::uint64_t id = 0;
    };

    /// Serial discrete-event kernel: a min-priority queue ordered by
    /// (time, seq), a clock, and the execution loop one worker runs between
    /// synchronization points.
    ///
    /// Ties on (time, seq) only occur when events from different senders carry
    /// colliding sender-local sequence numbers; they are broken by sender rank
    /// and then by insertion order, so the result never depends on arrival order.
    ///
    /// Not thread-safe. A timeline belongs to one worker at a time.
    class Timeline
    {
    public:
        using Handler = std::function<void(const Event&)>;

        explicit Timeline(SimTime stop_time = kTimeInfinity, WorkerId rank = 0)
            : stop_time_(stop_time), rank_(rank)
        {
        }

        void set_handler(Handler handler) { handler_ = std::move(handler); }

        SimTime now() const noexcept { return now_; }
        SimTime stop_time() const noexcept { return stop_time_; }
        WorkerId rank() const noexcept { return rank_; }

        /// Queues an event. An unset seq is filled from this timeline's counter.
        EventHandle schedule(Event event) { return push(std::move(event), rank_); }

        /// Queues an event received from another worker, keeping its seq.
        EventHandle schedule_from(Event event, WorkerId sender) { return push(std::move(event), sender); }

        /// Lazy deletion: the entry stays queued and is skipped when popped.
        bool cancel(const EventHandle& handle)
        {
            if (handle.id >= dead_.size() || dead_[handle.id])
                return false;
            dead_[handle.id] = true;
            ++cancelled_;
            ++tombstones_;
            return true;
        }

        /// Executes every event with time < horizon (and < stop_time) in order,
        /// then sets the clock to horizon. Events at or after horizon stay queued.
        std::size_t run_until(SimTime horizon)
        {
            if (horizon < now_)
            {
                std::ostringstream msg;
                msg << "horizon " << horizon << " is before now " << now_;
                throw Error(ErrorCode::InvalidParameter, msg.str());
            }
            const SimTime limit = horizon < stop_time_ ? horizon : stop_time_;
            std::size_t count = 0;
            while (!queue_.empty())
            {
                const Entry& top = queue_.top();
                if (dead_[top.id])
                {
                    queue_.pop();
                    --tombstones_;
                    continue;
                }
                if (!(top.event.time < limit))
                    break;
                Entry entry = top;
                queue_.pop();
                dead_[entry.id] = true;
                now_ = entry.event.time;
                ++executed_;
                ++count;
                if (handler_)
                    handler_(entry.event);
            }
            now_ = horizon;
            return count;
        }

        /// Earliest pending event time, or infinity when nothing is queued.
        SimTime peek_next_time() const
        {
            while (!queue_.empty() && dead_[queue_.top().id])
            {
                queue_.pop();
                --tombstones_;
            }
            return queue_.empty() ? kTimeInfinity : queue_.top().event.time;
        }

        std::uint64_t events_scheduled() const noexcept { return scheduled_; }
        std::uint64_t events_executed() const noexcept { return executed_; }
        std::uint64_t events_cancelled() const noexcept { return cancelled_; }
        std::uint64_t events_remaining() const noexcept { return queue_.size() - tombstones_; }

    private:
        struct Entry
        {
            Event event;
            WorkerId sender;
            std::uint64_t id;

            auto key() const noexcept { return std::tie(event.time, event.seq, sender, id); }
        };

        struct Later
        {
            bool operator()(const Entry& a, const Entry& b) const noexcept { return a.key() > b.key(); }
        };

        EventHandle push(Event event, WorkerId sender)
        {
            if (event.time < now_)
            {
                std::ostringstream msg;
                msg << "event at " << event.time << " scheduled when now is " << now_;
                throw Error(ErrorCode::ScheduleInPast, msg.str());
            }
            if (event.seq == kUnsetSeq)
                event.seq = next_seq_++;
            const std::uint64_t id = dead_.size();
            dead_.push_back(false);
            EventHandle handle{event.time, event.seq, id};
            queue_.push(Entry{std::move(event), sender, id});
            ++scheduled_;
            return handle;
        }

        mutable std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
        std::vector<bool> dead_;
        mutable std::uint64_t tombstones_ = 0;
        SimTime now_{};
        SimTime stop_time_;
        WorkerId rank_;
        std::uint64_t next_seq_ = 0;
        std::uint64_t scheduled_ = 0;
        std::uint64_t executed_ = 0;
        std::uint64_t cancelled_ = 0;
        Handler handler_;
    };
} // namespace qnetsim
