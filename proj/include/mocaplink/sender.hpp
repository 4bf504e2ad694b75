#pragma once

#include <bit>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mocaplink/clock.hpp"
#include "mocaplink/geodesy.hpp"
#include "mocaplink/mavlink.hpp"
#include "mocaplink/tracking.hpp"
#include "mocaplink/udp.hpp"

namespace mocaplink::streaming {

enum class SenderErrc { invalid_config, stale_track };

class SenderError : public std::runtime_error {
public:
    SenderError(SenderErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    SenderErrc code() const noexcept { return code_; }

private:
    SenderErrc code_;
};

struct DroneEndpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 14540;
    std::uint8_t system_id = 1;
    std::uint8_t component_id = 1;

    friend bool operator==(const DroneEndpoint&, const DroneEndpoint&) = default;
};

/// Subset of the three localization messages.
class MessageSet {
public:
    MessageSet() = default;
    MessageSet(std::initializer_list<mavlink::MessageType> types) {
        for (auto t : types) insert(t);
    }
    static MessageSet all() {
        return {mavlink::MessageType::hil_gps, mavlink::MessageType::local_position_ned,
                mavlink::MessageType::att_pos_mocap};
    }

    void insert(mavlink::MessageType t) { bits_ |= bit(t); }
    void erase(mavlink::MessageType t) { bits_ &= ~bit(t); }
    bool contains(mavlink::MessageType t) const { return (bits_ & bit(t)) != 0; }
    std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
    bool empty() const { return bits_ == 0; }
    std::vector<mavlink::MessageType> types() const;

    friend bool operator==(const MessageSet&, const MessageSet&) = default;

private:
    static unsigned bit(mavlink::MessageType t) { return 1U << static_cast<unsigned>(t); }
    unsigned bits_ = 0;
};

struct SenderConfig {
    std::string object_name;
    DroneEndpoint endpoint;
    double rate_hz = 50.0;
    MessageSet enabled_messages = MessageSet::all();
    std::uint8_t protocol_version = 2;

    void validate() const;  ///< throws SenderError(invalid_config)
};

struct SenderPatch {
    std::optional<double> rate_hz;
    std::optional<MessageSet> enabled_messages;
    std::optional<DroneEndpoint> endpoint;
};

struct SenderStats {
    std::uint64_t ticks_total = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t deadline_misses = 0;
    std::uint64_t stale_skips = 0;
    double measured_output_rate_hz = 0.0;

    double drop_rate() const { return ticks_total == 0 ? 0.0 : double(deadline_misses) / double(ticks_total); }
};

/// Fixed HIL_GPS quality fields for a simulated healthy 3D fix.
struct GpsSettings {
    std::uint16_t eph = 30;
    std::uint16_t epv = 30;
    std::uint8_t fix_type = 3;
    std::uint8_t satellites_visible = 12;
    double cog_min_speed = geodesy::kDefaultCogMinSpeed;
};

/// Station-wide inputs to packet building.
struct PacketContext {
    geodesy::GeodeticPoint origin;
    geodesy::FrameMapping mapping;
    GpsSettings gps;
    std::uint64_t epoch_offset_usec = 0;  ///< added to service time for time_usec
};

/// The newest filter state for an object plus the parameters that produced it.
struct TrackSnapshot {
    tracking::TrackState state;
    tracking::FilterParams params;
};

class TrackSource {
public:
    virtual ~TrackSource() = default;
    virtual std::optional<TrackSnapshot> track(const std::string& object_name) const = 0;
};

/// Builds the enabled frames for one tick. Owns the stream's sequence
/// counter, the held course-over-ground and the timestamp monotonicity.
class PacketBuilder {
public:
    explicit PacketBuilder(const SenderConfig& config);

    void reconfigure(const SenderConfig& config);

    /// Throws SenderError(stale_track); geodesy and codec errors propagate.
    std::vector<std::vector<std::uint8_t>> build(const TrackSnapshot& track, const SenderConfig& config,
                                                 const PacketContext& context, double now);

    /// Messages in build order (before framing), for introspection.
    std::vector<mavlink::Message> build_messages(const TrackSnapshot& track, const SenderConfig& config,
                                                 const PacketContext& context, double now);

private:
    mavlink::FrameEncoder encoder_;
    std::optional<std::uint16_t> last_cog_;
    std::optional<std::uint32_t> last_boot_ms_;
    std::optional<std::uint64_t> last_usec_;
};

/// One-shot form of PacketBuilder::build with a fresh sequence counter.
std::vector<std::vector<std::uint8_t>> build_packets(const TrackSnapshot& track, const SenderConfig& config,
                                                     const PacketContext& context, double now);

using TransportFactory = std::function<std::unique_ptr<Transport>(const DroneEndpoint&)>;

TransportFactory udp_transport_factory();

inline constexpr double kRateWindowSeconds = 2.0;

/// Periodic streaming task for one robot.
class Sender {
public:
    Sender(std::uint64_t id, SenderConfig config, const TrackSource& tracks, PacketContext context, Clock& clock,
           TransportFactory transports);
    ~Sender();
    Sender(const Sender&) = delete;
    Sender& operator=(const Sender&) = delete;

    void start();
    /// Stops the task and waits for it; stats are frozen afterwards.
    void stop();

    /// Validates and applies a partial update; the next tick uses it.
    SenderConfig update(const SenderPatch& patch);

    std::uint64_t id() const { return id_; }
    SenderConfig config() const;
    SenderStats snapshot_stats() const;
    bool running() const;

    /// Runs one tick at `now`; exposed for deterministic tests.
    void tick(double now);

private:
    void run(std::stop_token stop);

    const std::uint64_t id_;
    const TrackSource& tracks_;
    const PacketContext context_;
    Clock& clock_;
    TransportFactory transports_;

    mutable std::mutex io_mutex_;  // config, builder, transport
    SenderConfig config_;
    PacketBuilder builder_;
    std::unique_ptr<Transport> transport_;

    mutable std::mutex stats_mutex_;
    SenderStats stats_;
    std::deque<double> output_times_;
    std::optional<double> stopped_at_;

    std::jthread thread_;
};

}  // namespace mocaplink::streaming
