#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"
#include "qnetsim/qsm/state.hpp"
#include "qnetsim/qsm/store.hpp"
#include "qnetsim/wire.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qnetsim::qsm
{
    enum class Op : std::uint8_t
    {
        Set = 0,
        Get = 1,
        Measure = 2,
        Remove = 3,
    };

    /// MEASURE requests carry the requester's draw so results never depend on
    /// which QSM serves them.
    struct Request
    {
        Op op = Op::Get;
        std::vector<MemoryKey> keys;
        std::vector<Amplitude> amplitudes;
        double rng_draw = 0.0;

        bool operator==(const Request&) const = default;

        static Request set(std::vector<MemoryKey> keys, std::vector<Amplitude> amps)
        {
            return Request{Op::Set, std::move(keys), std::move(amps), 0.0};
        }
        static Request get(MemoryKey key) { return Request{Op::Get, {key}, {}, 0.0}; }
        static Request measure(MemoryKey key, double draw) { return Request{Op::Measure, {key}, {}, draw}; }
        static Request remove(std::vector<MemoryKey> keys) { return Request{Op::Remove, std::move(keys), {}, 0.0}; }
    };

    enum class Status : std::uint8_t
    {
        Ok = 0,
        NotNormalized = 1,
        PartialOverwrite = 2,
        KeyNotFound = 3,
        StateTooLarge = 4,
        InvalidRequest = 5,
    };

    inline Status status_for(ErrorCode code) noexcept
    {
        switch (code)
        {
        case ErrorCode::NotNormalized: return Status::NotNormalized;
        case ErrorCode::PartialOverwrite: return Status::PartialOverwrite;
        case ErrorCode::KeyNotFound: return Status::KeyNotFound;
        case ErrorCode::StateTooLarge: return Status::StateTooLarge;
        default: return Status::InvalidRequest;
        }
    }

    struct Response
    {
        Status status = Status::Ok;
        std::uint8_t outcome = 0;
        QuantumState state; // filled by GET

        bool operator==(const Response&) const = default;
    };

    struct RequestBatch
    {
        WorkerId worker = 0;
        std::uint64_t epoch_index = 0;
        std::vector<Request> requests;
    };

    struct BatchResponse
    {
        std::uint64_t epoch_index = 0;
        WorkerId worker = 0;
        std::vector<Response> responses;
        /// States now confined to the requesting worker, handed back to its local QSM.
        std::vector<QuantumState> handbacks;
    };

    /// Applies one request; request-level failures come back in-band.
    inline Response apply(StateStore& store, const Request& req)
    {
        Response r;
        try
        {
            switch (req.op)
            {
            case Op::Set:
                store.set(req.keys, req.amplitudes);
                break;
            case Op::Get:
                if (req.keys.size() != 1)
                    throw Error(ErrorCode::InvalidRequest, "GET takes exactly one key");
                r.state = store.get(req.keys.front());
                break;
            case Op::Measure:
                if (req.keys.size() != 1)
                    throw Error(ErrorCode::InvalidRequest, "MEASURE takes exactly one key");
                r.outcome = static_cast<std::uint8_t>(store.measure(req.keys.front(), req.rng_draw));
                break;
            case Op::Remove:
                store.remove(req.keys);
                break;
            default:
                throw Error(ErrorCode::InvalidRequest, "unknown op");
            }
        }
        catch (const Error& e)
        {
            r = Response{};
            r.status = status_for(e.code());
        }
        return r;
    }

    inline std::vector<Response> apply_all(StateStore& store, std::span<const Request> requests)
    {
        std::vector<Response> out;
        out.reserve(requests.size());
        for (const auto& req : requests)
            out.push_back(apply(store, req));
        return out;
    }

    // ---- global-QSM wire protocol -------------------------------------------

    enum class Opcode : std::uint8_t
    {
        Batch = 1,
        BatchResp = 2,
        Shutdown = 3,
    };

    namespace detail
    {
        inline void put_keys(wire::Writer& w, std::span<const MemoryKey> keys)
        {
            if (keys.size() > 255)
                throw Error(ErrorCode::InvalidRequest, "too many keys for one request");
            w.u8(static_cast<std::uint8_t>(keys.size()));
            for (MemoryKey k : keys)
                w.u64(k);
        }

        inline void put_amps(wire::Writer& w, std::span<const Amplitude> amps)
        {
            w.u32(static_cast<std::uint32_t>(amps.size()));
            for (const auto& a : amps)
            {
                w.f64(a.real());
                w.f64(a.imag());
            }
        }

        inline std::vector<MemoryKey> get_keys(wire::Reader& r)
        {
            std::vector<MemoryKey> keys(r.u8());
            for (auto& k : keys)
                k = r.u64();
            return keys;
        }

        inline std::vector<Amplitude> get_amps(wire::Reader& r)
        {
            const std::uint32_t n = r.u32();
            if (n > r.remaining() / 16)
                throw Error(ErrorCode::TransportFailure, "amplitude count exceeds frame");
            std::vector<Amplitude> amps(n);
            for (auto& a : amps)
            {
                const double re = r.f64();
                const double im = r.f64();
                a = Amplitude{re, im};
            }
            return amps;
        }
    } // namespace detail

    /// BATCH: epoch u64, worker u32, count u32, then per request
    /// op u8, key count u8, keys u64[], amplitude count u32, (re, im) f64 pairs,
    /// and rng_draw f64 for MEASURE only.
    inline std::vector<std::byte> encode_batch(const RequestBatch& batch)
    {
        wire::Writer w;
        w.u64(batch.epoch_index);
        w.u32(batch.worker);
        w.u32(static_cast<std::uint32_t>(batch.requests.size()));
        for (const auto& req : batch.requests)
        {
            w.u8(static_cast<std::uint8_t>(req.op));
            detail::put_keys(w, req.keys);
            detail::put_amps(w, req.amplitudes);
            if (req.op == Op::Measure)
                w.f64(req.rng_draw);
        }
        return w.take();
    }

    inline RequestBatch decode_batch(std::span<const std::byte> payload)
    {
        wire::Reader r{payload};
        RequestBatch batch;
        batch.epoch_index = r.u64();
        batch.worker = r.u32();
        const std::uint32_t count = r.u32();
        batch.requests.reserve(std::min<std::size_t>(count, r.remaining()));
        for (std::uint32_t i = 0; i < count; ++i)
        {
            Request req;
            const std::uint8_t op = r.u8();
            if (op > static_cast<std::uint8_t>(Op::Remove))
                throw Error(ErrorCode::TransportFailure, "unknown QSM op " + std::to_string(op));
            req.op = static_cast<Op>(op);
            req.keys = detail::get_keys(r);
            req.amplitudes = detail::get_amps(r);
            if (req.op == Op::Measure)
                req.rng_draw = r.f64();
            batch.requests.push_back(std::move(req));
        }
        if (!r.done())
            throw Error(ErrorCode::TransportFailure, "trailing bytes in BATCH");
        return batch;
    }

    /// BATCH_RESP: epoch u64, worker u32, count u32, then per response
    /// status u8, outcome u8, key count u8, keys, amplitude count u32, amplitudes;
    /// then handback count u32 and per state key count u8, keys, amplitude count u32, amplitudes.
    inline std::vector<std::byte> encode_batch_response(const BatchResponse& resp)
    {
        wire::Writer w;
        w.u64(resp.epoch_index);
        w.u32(resp.worker);
        w.u32(static_cast<std::uint32_t>(resp.responses.size()));
        for (const auto& r : resp.responses)
        {
            w.u8(static_cast<std::uint8_t>(r.status));
            w.u8(r.outcome);
            detail::put_keys(w, r.state.keys);
            detail::put_amps(w, r.state.amplitudes);
        }
        w.u32(static_cast<std::uint32_t>(resp.handbacks.size()));
        for (const auto& s : resp.handbacks)
        {
            detail::put_keys(w, s.keys);
            detail::put_amps(w, s.amplitudes);
        }
        return w.take();
    }

    inline BatchResponse decode_batch_response(std::span<const std::byte> payload)
    {
        wire::Reader r{payload};
        BatchResponse resp;
        resp.epoch_index = r.u64();
        resp.worker = r.u32();
        const std::uint32_t count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i)
        {
            Response x;
            x.status = static_cast<Status>(r.u8());
            x.outcome = r.u8();
            x.state.keys = detail::get_keys(r);
            x.state.amplitudes = detail::get_amps(r);
            resp.responses.push_back(std::move(x));
        }
        const std::uint32_t handbacks = r.u32();
        for (std::uint32_t i = 0; i < handbacks; ++i)
        {
            QuantumState s;
            s.keys = detail::get_keys(r);
            s.amplitudes = detail::get_amps(r);
            resp.handbacks.push_back(std::move(s));
        }
        if (!r.done())
            throw Error(ErrorCode::TransportFailure, "trailing bytes in BATCH_RESP");
        return resp;
    }
} // namespace qnetsim::qsm
