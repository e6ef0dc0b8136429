#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/qsm/state.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace qnetsim::qsm
{
    /// Key-value store mapping each memory key to the (possibly shared)
    /// quantum state it belongs to. Each key maps to at most one state.
    class StateStore
    {
    public:
        /// Stores a state over `keys`. Existing states may only be replaced as a whole.
        void set(std::vector<MemoryKey> keys, std::vector<Amplitude> amplitudes)
        {
            QuantumState state = make_state(std::move(keys), std::move(amplitudes));
            std::set<StateId> replaced;
            for (MemoryKey k : state.keys)
                if (auto it = index_.find(k); it != index_.end())
                    replaced.insert(it->second);
            for (StateId id : replaced)
                for (MemoryKey k : states_.at(id).keys)
                    if (!std::binary_search(state.keys.begin(), state.keys.end(), k))
                        throw Error(ErrorCode::PartialOverwrite,
                                    "key " + std::to_string(k) + " belongs to a state not covered by the request");
            for (StateId id : replaced)
                erase_state(id);
            insert(std::move(state));
        }

        const QuantumState& get(MemoryKey key) const { return states_.at(lookup(key)); }

        bool contains(MemoryKey key) const { return index_.count(key) != 0; }

        /// Returns the outcome bit and collapses the owning state.
        int measure(MemoryKey key, double draw)
        {
            const StateId id = lookup(key);
            Collapse c = qsm::measure(states_.at(id), key, draw);
            erase_state(id);
            if (!c.remaining.keys.empty())
                insert(std::move(c.remaining));
            return c.outcome;
        }

        /// Drops every state that holds any of `keys`.
        void remove(std::span<const MemoryKey> keys)
        {
            std::set<StateId> doomed;
            for (MemoryKey k : keys)
                doomed.insert(lookup(k));
            for (StateId id : doomed)
                erase_state(id);
        }

        /// Removes and returns the state that holds `key`.
        QuantumState take(MemoryKey key)
        {
            const StateId id = lookup(key);
            QuantumState s = std::move(states_.at(id));
            erase_state(id);
            return s;
        }

        /// Inserts an already-canonical state whose keys are all absent.
        void adopt(QuantumState state)
        {
            for (MemoryKey k : state.keys)
                if (contains(k))
                    throw Error(ErrorCode::PartialOverwrite, "adopted key " + std::to_string(k) + " already present");
            insert(std::move(state));
        }

        /// Removes and returns all states matching `pred`, in insertion order.
        template <class Pred>
        std::vector<QuantumState> extract_if(Pred&& pred)
        {
            std::vector<QuantumState> out;
            for (auto it = states_.begin(); it != states_.end();)
            {
                if (pred(it->second))
                {
                    for (MemoryKey k : it->second.keys)
                        index_.erase(k);
                    out.push_back(std::move(it->second));
                    it = states_.erase(it);
                }
                else
                    ++it;
            }
            return out;
        }

        std::size_t state_count() const noexcept { return states_.size(); }
        std::size_t key_count() const noexcept { return index_.size(); }

        /// States sorted by their first key; independent of insertion history.
        std::vector<QuantumState> canonical_dump() const
        {
            std::vector<QuantumState> out;
            out.reserve(states_.size());
            for (const auto& [id, s] : states_)
                out.push_back(s);
            std::sort(out.begin(), out.end(), [](const QuantumState& a, const QuantumState& b) { return a.keys < b.keys; });
            return out;
        }

    private:
        using StateId = std::uint64_t;

        StateId lookup(MemoryKey key) const
        {
            const auto it = index_.find(key);
            if (it == index_.end())
                throw Error(ErrorCode::KeyNotFound, "memory key " + std::to_string(key));
            return it->second;
        }

        void insert(QuantumState state)
        {
            const StateId id = next_id_++;
            for (MemoryKey k : state.keys)
                index_[k] = id;
            states_.emplace(id, std::move(state));
        }

        void erase_state(StateId id)
        {
            auto it = states_.find(id);
            for (MemoryKey k : it->second.keys)
                index_.erase(k);
            states_.erase(it);
        }

        std::unordered_map<MemoryKey, StateId> index_;
        std::map<StateId, QuantumState> states_;
        StateId next_id_ = 0;
    };
} // namespace qnetsim::qsm
