#pragma once

#include <cstdint>
#include <mutex>
#include <vector>

#include "mocaplink/clock.hpp"
#include "mocaplink/sender.hpp"

namespace mocaplink::streaming {

struct CapturedFrame {
    double time;  // service time at send
    DroneEndpoint endpoint;
    std::vector<std::uint8_t> bytes;
};

/// In-memory stand-in for the UDP fan-out. Loopback sockets drop datagrams
/// when a virtual clock runs senders far faster than real time; this keeps
/// every frame along with the service time it was sent at.
class CaptureSink {
public:
    explicit CaptureSink(const Clock& clock) : clock_(clock) {}

    TransportFactory factory();

    std::vector<CapturedFrame> frames() const;
    std::vector<CapturedFrame> frames_for(std::uint16_t port) const;
    std::size_t size() const;
    void clear();

private:
    void record(const DroneEndpoint& endpoint, std::span<const std::uint8_t> bytes);

    const Clock& clock_;
    mutable std::mutex mutex_;
    std::vector<CapturedFrame> frames_;
};

}  // namespace mocaplink::streaming
