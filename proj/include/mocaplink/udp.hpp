#pragma once

#include <netinet/in.h>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace mocaplink {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Outbound datagram channel to one robot.
class Transport {
public:
    virtual ~Transport() = default;
    /// Throws TransportError on failure.
    virtual void send(std::span<const std::uint8_t> datagram) = 0;
};

/// Connected-less UDP sender bound to an ephemeral port.
class UdpTransport final : public Transport {
public:
    UdpTransport(const std::string& host, std::uint16_t port);
    ~UdpTransport() override;
    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    void send(std::span<const std::uint8_t> datagram) override;

private:
    int fd_ = -1;
    sockaddr_in dest_{};
};

/// Blocking UDP receiver on a local port, used by tests and loopback captures.
class UdpReceiver {
public:
    explicit UdpReceiver(std::uint16_t port = 0, const std::string& host = "127.0.0.1");
    ~UdpReceiver();
    UdpReceiver(const UdpReceiver&) = delete;
    UdpReceiver& operator=(const UdpReceiver&) = delete;

    std::uint16_t port() const { return port_; }

    /// Waits up to timeout_ms for a datagram; returns its size, 0 on timeout.
    std::size_t receive(std::span<std::uint8_t> buffer, int timeout_ms);

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace mocaplink
