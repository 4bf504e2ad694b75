#include "mocaplink/capture.hpp"

namespace mocaplink::streaming {

namespace {

class CaptureTransport final : public Transport {
public:
    CaptureTransport(std::function<void(std::span<const std::uint8_t>)> sink) : sink_(std::move(sink)) {}
    void send(std::span<const std::uint8_t> datagram) override { sink_(datagram); }

private:
    std::function<void(std::span<const std::uint8_t>)> sink_;
};

}  // namespace

TransportFactory CaptureSink::factory() {
    return [this](const DroneEndpoint& endpoint) -> std::unique_ptr<Transport> {
        return std::make_unique<CaptureTransport>(
            [this, endpoint](std::span<const std::uint8_t> bytes) { record(endpoint, bytes); });
    };
}

void CaptureSink::record(const DroneEndpoint& endpoint, std::span<const std::uint8_t> bytes) {
    const double t = clock_.now();
    std::lock_guard lock(mutex_);
    frames_.push_back({t, endpoint, {bytes.begin(), bytes.end()}});
}

std::vector<CapturedFrame> CaptureSink::frames() const {
    std::lock_guard lock(mutex_);
    return frames_;
}

std::vector<CapturedFrame> CaptureSink::frames_for(std::uint16_t port) const {
    std::lock_guard lock(mutex_);
    std::vector<CapturedFrame> out;
    for (const auto& f : frames_) {
        if (f.endpoint.port == port) out.push_back(f);
    }
    return out;
}

std::size_t CaptureSink::size() const {
    std::lock_guard lock(mutex_);
    return frames_.size();
}

void CaptureSink::clear() {
    std::lock_guard lock(mutex_);
    frames_.clear();
}

}  // namespace mocaplink::streaming
