#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/qsm/request.hpp"
#include "qnetsim/qsm/service.hpp"
#include "qnetsim/socket.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace qnetsim::qsm
{
    /// A worker's link to the global QSM. flush() blocks until the batch has
    /// been applied and returns responses in request order.
    class Connection
    {
    public:
        virtual ~Connection() = default;
        virtual BatchResponse flush(const RequestBatch& batch) = 0;
    };

    class InProcConnection final : public Connection
    {
    public:
        explicit InProcConnection(GlobalQsmService& service) noexcept : service_(&service) {}

        BatchResponse flush(const RequestBatch& batch) override { return service_->submit(batch); }

    private:
        GlobalQsmService* service_;
    };

    class SocketConnection final : public Connection
    {
    public:
        explicit SocketConnection(const net_io::Endpoint& server) : socket_(net_io::connect_to(server)) {}

        ~SocketConnection() override
        {
            try
            {
                if (socket_.valid())
                    net_io::send_frame(socket_, static_cast<std::uint8_t>(Opcode::Shutdown), {});
            }
            catch (...)
            {
            }
        }

        BatchResponse flush(const RequestBatch& batch) override
        {
            const auto payload = encode_batch(batch);
            net_io::send_frame(socket_, static_cast<std::uint8_t>(Opcode::Batch), payload);
            const wire::Frame f = net_io::expect_frame(socket_, static_cast<std::uint8_t>(Opcode::BatchResp), "BATCH_RESP");
            return decode_batch_response(f.payload);
        }

    private:
        net_io::Socket socket_;
    };

    /// TCP front end for a GlobalQsmService: one thread per connected worker,
    /// all funnelling into the service's serial apply loop.
    class Server
    {
    public:
        Server(GlobalQsmService& service, const net_io::Endpoint& listen)
            : service_(service), listener_(net_io::listen_on(listen))
        {
        }

        ~Server() { stop(); }

        std::uint16_t port() const { return net_io::bound_port(listener_); }

        /// Accepts `connections` clients in the background.
        void start(std::size_t connections)
        {
            acceptor_ = std::thread([this, connections] {
                try
                {
                    for (std::size_t i = 0; i < connections && !stopping_; ++i)
                    {
                        net_io::Socket s = net_io::accept_one(listener_);
                        std::lock_guard lock(mutex_);
                        auto conn = std::make_unique<net_io::Socket>(std::move(s));
                        net_io::Socket* raw = conn.get();
                        sockets_.push_back(std::move(conn));
                        handlers_.emplace_back([this, raw] { serve(*raw); });
                    }
                }
                catch (const Error&)
                {
                    if (!stopping_)
                        service_.abort();
                }
            });
        }

        /// Blocks until every accepted connection has sent SHUTDOWN or closed.
        void wait()
        {
            if (acceptor_.joinable())
                acceptor_.join();
            std::vector<std::thread> hs;
            {
                std::lock_guard lock(mutex_);
                hs.swap(handlers_);
            }
            for (auto& h : hs)
                h.join();
        }

        void stop()
        {
            stopping_ = true;
            listener_.shutdown();
            {
                std::lock_guard lock(mutex_);
                for (auto& s : sockets_)
                    s->shutdown();
            }
            wait();
        }

        bool failed() const noexcept { return failed_; }

    private:
        void serve(net_io::Socket& s)
        {
            try
            {
                wire::Frame f;
                while (net_io::recv_frame(s, f))
                {
                    if (f.opcode == static_cast<std::uint8_t>(Opcode::Shutdown))
                        return;
                    if (f.opcode != static_cast<std::uint8_t>(Opcode::Batch))
                        throw Error(ErrorCode::TransportFailure, "unexpected opcode " + std::to_string(f.opcode));
                    const BatchResponse resp = service_.submit(decode_batch(f.payload));
                    const auto payload = encode_batch_response(resp);
                    net_io::send_frame(s, static_cast<std::uint8_t>(Opcode::BatchResp), payload);
                }
                // EOF without SHUTDOWN: the worker went away mid-run.
                throw Error(ErrorCode::TransportFailure, "worker disconnected without SHUTDOWN");
            }
            catch (const Error&)
            {
                if (!stopping_)
                {
                    failed_ = true;
                    service_.abort();
                }
            }
        }

        GlobalQsmService& service_;
        net_io::Socket listener_;
        std::thread acceptor_;
        std::mutex mutex_;
        std::vector<std::unique_ptr<net_io::Socket>> sockets_;
        std::vector<std::thread> handlers_;
        std::atomic<bool> stopping_{false};
        std::atomic<bool> failed_{false};
    };
} // namespace qnetsim::qsm
