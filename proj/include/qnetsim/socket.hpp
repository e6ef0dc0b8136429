#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>

namespace qnetsim::net_io
{
    /// Owning file descriptor.
    class Socket
    {
    public:
        Socket() noexcept = default;
        explicit Socket(int fd) noexcept : fd_(fd) {}
        Socket(const Socket&) = delete;
        Socket& operator=(const Socket&) = delete;
        Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
        Socket& operator=(Socket&& other) noexcept
        {
            if (this != &other)
            {
                close();
                fd_ = std::exchange(other.fd_, -1);
            }
            return *this;
        }
        ~Socket() { close(); }

        int fd() const noexcept { return fd_; }
        bool valid() const noexcept { return fd_ >= 0; }

        void close() noexcept
        {
            if (fd_ >= 0)
                ::close(fd_);
            fd_ = -1;
        }

        void shutdown() noexcept
        {
            if (fd_ >= 0)
                ::shutdown(fd_, SHUT_RDWR);
        }

    private:
        int fd_ = -1;
    };

    [[noreturn]] inline void fail(const std::string& what)
    {
        throw Error(ErrorCode::TransportFailure, what + ": " + std::strerror(errno));
    }

    struct Endpoint
    {
        std::string host = "127.0.0.1";
        std::uint16_t port = 0;
    };

    /// Parses "HOST:PORT".
    inline Endpoint parse_endpoint(const std::string& text)
    {
        const auto colon = text.rfind(':');
        if (colon == std::string::npos || colon + 1 == text.size())
            throw Error(ErrorCode::InvalidParameter, "expected HOST:PORT, got '" + text + "'");
        Endpoint ep;
        ep.host = text.substr(0, colon);
        const unsigned long port = std::stoul(text.substr(colon + 1));
        if (port > 65535)
            throw Error(ErrorCode::InvalidParameter, "port out of range in '" + text + "'");
        ep.port = static_cast<std::uint16_t>(port);
        return ep;
    }

    inline void set_nodelay(int fd)
    {
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    /// Binds and listens. Port 0 picks an ephemeral port; see bound_port().
    inline Socket listen_on(const Endpoint& ep, int backlog = 128)
    {
        Socket s{::socket(AF_INET, SOCK_STREAM, 0)};
        if (!s.valid())
            fail("socket");
        int one = 1;
        ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1)
            throw Error(ErrorCode::InvalidParameter, "bad IPv4 address '" + ep.host + "'");
        if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            fail("bind");
        if (::listen(s.fd(), backlog) != 0)
            fail("listen");
        return s;
    }

    inline std::uint16_t bound_port(const Socket& s)
    {
        sockaddr_in addr{};
        socklen_t len = sizeof(addr);
        if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
            fail("getsockname");
        return ntohs(addr.sin_port);
    }

    inline Socket accept_one(const Socket& listener)
    {
        int fd;
        do
            fd = ::accept(listener.fd(), nullptr, nullptr);
        while (fd < 0 && errno == EINTR);
        if (fd < 0)
            fail("accept");
        set_nodelay(fd);
        return Socket{fd};
    }

    inline Socket connect_to(const Endpoint& ep)
    {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const std::string port = std::to_string(ep.port);
        if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr)
            throw Error(ErrorCode::TransportFailure, "cannot resolve " + ep.host);
        Socket s{::socket(res->ai_family, res->ai_socktype, res->ai_protocol)};
        const int rc = s.valid() ? ::connect(s.fd(), res->ai_addr, res->ai_addrlen) : -1;
        ::freeaddrinfo(res);
        if (rc != 0)
            fail("connect " + ep.host + ":" + port);
        set_nodelay(s.fd());
        return s;
    }

    inline void write_all(int fd, const std::byte* data, std::size_t n)
    {
        while (n > 0)
        {
            const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
            if (w < 0)
            {
                if (errno == EINTR)
                    continue;
                fail("send");
            }
            data += w;
            n -= static_cast<std::size_t>(w);
        }
    }

    /// Returns false on clean EOF before any byte was read.
    inline bool read_exact(int fd, std::byte* data, std::size_t n)
    {
        std::size_t got = 0;
        while (got < n)
        {
            const ssize_t r = ::recv(fd, data + got, n - got, 0);
            if (r == 0)
            {
                if (got == 0)
                    return false;
                throw Error(ErrorCode::TransportFailure, "connection closed mid-frame");
            }
            if (r < 0)
            {
                if (errno == EINTR)
                    continue;
                fail("recv");
            }
            got += static_cast<std::size_t>(r);
        }
        return true;
    }

    inline void send_frame(const Socket& s, std::uint8_t opcode, std::span<const std::byte> payload)
    {
        const auto bytes = wire::encode_frame(opcode, payload);
        write_all(s.fd(), bytes.data(), bytes.size());
    }

    /// Reads one frame; returns false on clean EOF.
    inline bool recv_frame(const Socket& s, wire::Frame& out)
    {
        std::byte header[4];
        if (!read_exact(s.fd(), header, 4))
            return false;
        wire::Reader r{std::span<const std::byte>(header, 4)};
        const std::uint32_t length = r.u32();
        if (length == 0)
            throw Error(ErrorCode::TransportFailure, "zero-length frame");
        std::vector<std::byte> body(length);
        if (!read_exact(s.fd(), body.data(), length))
            throw Error(ErrorCode::TransportFailure, "connection closed mid-frame");
        out.opcode = std::to_integer<std::uint8_t>(body[0]);
        out.payload.assign(body.begin() + 1, body.end());
        return true;
    }

    inline wire::Frame expect_frame(const Socket& s, std::uint8_t opcode, const char* what)
    {
        wire::Frame f;
        if (!recv_frame(s, f))
            throw Error(ErrorCode::TransportFailure, std::string("peer closed while waiting for ") + what);
        if (f.opcode != opcode)
            throw Error(ErrorCode::TransportFailure,
                        std::string("unexpected opcode ") + std::to_string(f.opcode) + " while waiting for " + what);
        return f;
    }
} // namespace qnetsim::net_io
