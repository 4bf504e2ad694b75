#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>

#include "mocaplink/config.hpp"
#include "mocaplink/station.hpp"

namespace mocaplink::station {

class BindError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

// JSON documents served by the API and pushed on the stream.
Json to_json(const ObjectView& view);
Json objects_json(const std::vector<ObjectView>& views);
Json to_json(const SenderInfo& info);
Json senders_json(const std::vector<SenderInfo>& senders);
Json station_json(const Station& station);
/// A stream event: {"type": "objects" | "senders", "time": ..., <type>: [...]}.
Json objects_event(const Station& station);
Json senders_event(const Station& station);

/// Routes one HTTP request. Pure with respect to the network, so the whole
/// API surface is testable without sockets. `target` may carry a query.
ApiResponse handle_request(Station& station, std::string_view method, std::string_view target, std::string_view body,
                           const std::optional<std::filesystem::path>& static_dir = std::nullopt);

inline constexpr double kObjectStreamHz = 10.0;
inline constexpr double kSenderStreamHz = 1.0;

/// HTTP + WebSocket control plane on one port. Runs its own I/O thread.
class ControlServer {
public:
    ControlServer(Station& station, BindAddress bind, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~ControlServer();
    ControlServer(const ControlServer&) = delete;
    ControlServer& operator=(const ControlServer&) = delete;

    /// Binds and starts serving; throws BindError. Port 0 picks a free port.
    void start();
    void stop();
    std::uint16_t port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_ = 0;
};

}  // namespace mocaplink::station
