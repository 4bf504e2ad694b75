#include "mocaplink/sender.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

namespace mocaplink::streaming {

using mavlink::MessageType;

std::vector<MessageType> MessageSet::types() const {
    std::vector<MessageType> out;
    for (auto t : {MessageType::hil_gps, MessageType::local_position_ned, MessageType::att_pos_mocap}) {
        if (contains(t)) out.push_back(t);
    }
    return out;
}

void SenderConfig::validate() const {
    auto fail = [](const std::string& why) { throw SenderError(SenderErrc::invalid_config, why); };
    if (object_name.empty()) fail("object_name must not be empty");
    if (endpoint.host.empty()) fail("endpoint.host must not be empty");
    if (endpoint.port == 0) fail("endpoint.port must be within [1, 65535]");
    if (endpoint.system_id == 0) fail("endpoint.system_id must be within [1, 255]");
    if (endpoint.component_id == 0) fail("endpoint.component_id must be within [1, 255]");
    if (!(rate_hz > 0.0 && rate_hz <= 1000.0)) fail("rate_hz must be within (0, 1000]");
    if (enabled_messages.empty()) fail("enabled_messages must not be empty");
    if (protocol_version != 1 && protocol_version != 2) fail("protocol_version must be 1 or 2");
}

// ---------------------------------------------------------------------------

PacketBuilder::PacketBuilder(const SenderConfig& config)
    : encoder_(config.endpoint.system_id, config.endpoint.component_id, config.protocol_version) {}

void PacketBuilder::reconfigure(const SenderConfig& config) {
    encoder_.set_identity(config.endpoint.system_id, config.endpoint.component_id, config.protocol_version);
}

std::vector<mavlink::Message> PacketBuilder::build_messages(const TrackSnapshot& track, const SenderConfig& config,
                                                            const PacketContext& context, double now) {
    // Capture timestamps can run a hair ahead of the service clock (ingest
    // latency jitter); extrapolate no earlier than the state itself.
    const double at = std::max(now, track.state.state_time);
    tracking::TrackState s;
    try {
        s = tracking::predict_to(track.state, at, track.params);
    } catch (const tracking::TrackingError& e) {
        throw SenderError(SenderErrc::stale_track, e.what());
    }

    std::uint32_t boot_ms = static_cast<std::uint32_t>(std::llround(std::max(now, 0.0) * 1e3));
    if (last_boot_ms_ && boot_ms <= *last_boot_ms_) boot_ms = *last_boot_ms_ + 1;
    std::uint64_t usec = context.epoch_offset_usec + static_cast<std::uint64_t>(std::llround(std::max(now, 0.0) * 1e6));
    if (last_usec_ && usec <= *last_usec_) usec = *last_usec_ + 1;

    const auto p_ned = geodesy::capture_to_ned(geodesy::CapturePoint{s.position}, context.mapping);
    const Vec3 v_ned = context.mapping.apply(s.velocity);

    std::vector<mavlink::Message> out;
    for (auto type : config.enabled_messages.types()) {
        switch (type) {
        case MessageType::hil_gps: {
            const auto g = geodesy::local_to_geodetic(context.origin, geodesy::ned_to_enu(p_ned));
            const double alt_mm = std::round(g.altitude_m * 1e3);
            if (!(std::abs(alt_mm) < 2147483647.0)) {
                throw geodesy::GeodesyError(geodesy::GeodesyErrc::overflow, "altitude does not fit int32 mm");
            }
            const auto cms = geodesy::velocity_capture_to_ned_cms(s.velocity, context.mapping);
            mavlink::HilGps m;
            m.time_usec = usec;
            m.lat = static_cast<std::int32_t>(std::llround(g.latitude_deg * 1e7));
            m.lon = static_cast<std::int32_t>(std::llround(g.longitude_deg * 1e7));
            m.alt = static_cast<std::int32_t>(alt_mm);
            m.eph = context.gps.eph;
            m.epv = context.gps.epv;
            const double ground_cms = std::round(std::hypot(v_ned[0], v_ned[1]) * 100.0);
            m.vel = ground_cms < 65535.0 ? static_cast<std::uint16_t>(ground_cms) : mavlink::HilGps::unknown_vel;
            m.vn = cms.vn;
            m.ve = cms.ve;
            m.vd = cms.vd;
            if (auto cog = geodesy::course_over_ground(v_ned[0], v_ned[1], context.gps.cog_min_speed)) {
                last_cog_ = *cog;
            }
            m.cog = last_cog_.value_or(mavlink::HilGps::unknown_cog);
            m.fix_type = context.gps.fix_type;
            m.satellites_visible = context.gps.satellites_visible;
            out.emplace_back(m);
            break;
        }
        case MessageType::local_position_ned: {
            mavlink::LocalPositionNed m;
            m.time_boot_ms = boot_ms;
            m.x = static_cast<float>(p_ned.v[0]);
            m.y = static_cast<float>(p_ned.v[1]);
            m.z = static_cast<float>(p_ned.v[2]);
            m.vx = static_cast<float>(v_ned[0]);
            m.vy = static_cast<float>(v_ned[1]);
            m.vz = static_cast<float>(v_ned[2]);
            out.emplace_back(m);
            break;
        }
        case MessageType::att_pos_mocap: {
            const Quaternion q = geodesy::capture_to_ned(s.orientation, context.mapping);
            mavlink::AttPosMocap m;
            m.time_usec = usec;
            m.q = {static_cast<float>(q.w), static_cast<float>(q.x), static_cast<float>(q.y), static_cast<float>(q.z)};
            m.x = static_cast<float>(p_ned.v[0]);
            m.y = static_cast<float>(p_ned.v[1]);
            m.z = static_cast<float>(p_ned.v[2]);
            out.emplace_back(m);
            break;
        }
        }
    }
    last_boot_ms_ = boot_ms;
    last_usec_ = usec;
    return out;
}

std::vector<std::vector<std::uint8_t>> PacketBuilder::build(const TrackSnapshot& track, const SenderConfig& config,
                                                            const PacketContext& context, double now) {
    std::vector<std::vector<std::uint8_t>> frames;
    for (const auto& message : build_messages(track, config, context, now)) {
        frames.push_back(encoder_.encode(message));
    }
    return frames;
}

std::vector<std::vector<std::uint8_t>> build_packets(const TrackSnapshot& track, const SenderConfig& config,
                                                     const PacketContext& context, double now) {
    PacketBuilder builder(config);
    return builder.build(track, config, context, now);
}

TransportFactory udp_transport_factory() {
    return [](const DroneEndpoint& endpoint) { return std::make_unique<UdpTransport>(endpoint.host, endpoint.port); };
}

// ---------------------------------------------------------------------------

Sender::Sender(std::uint64_t id, SenderConfig config, const TrackSource& tracks, PacketContext context, Clock& clock,
               TransportFactory transports)
    : id_(id),
      tracks_(tracks),
      context_(std::move(context)),
      clock_(clock),
      transports_(std::move(transports)),
      config_(std::move(config)),
      builder_(config_) {
    config_.validate();
    transport_ = transports_(config_.endpoint);
}

Sender::~Sender() { stop(); }

void Sender::start() {
    if (thread_.joinable()) return;
    clock_.attach();
    thread_ = std::jthread([this](std::stop_token stop) { run(stop); });
}

void Sender::stop() {
    if (!thread_.joinable()) return;
    thread_.request_stop();
    thread_.join();
    std::lock_guard lock(stats_mutex_);
    stopped_at_ = clock_.now();
}

bool Sender::running() const { return thread_.joinable(); }

SenderConfig Sender::update(const SenderPatch& patch) {
    std::lock_guard lock(io_mutex_);
    SenderConfig next = config_;
    if (patch.rate_hz) next.rate_hz = *patch.rate_hz;
    if (patch.enabled_messages) next.enabled_messages = *patch.enabled_messages;
    if (patch.endpoint) next.endpoint = *patch.endpoint;
    next.validate();
    if (next.endpoint != config_.endpoint) {
        transport_ = transports_(next.endpoint);
    }
    builder_.reconfigure(next);
    config_ = next;
    return config_;
}

SenderConfig Sender::config() const {
    std::lock_guard lock(io_mutex_);
    return config_;
}

SenderStats Sender::snapshot_stats() const {
    std::lock_guard lock(stats_mutex_);
    SenderStats out = stats_;
    const double now = stopped_at_.value_or(clock_.now());
    auto first = std::find_if(output_times_.begin(), output_times_.end(),
                              [&](double t) { return t >= now - kRateWindowSeconds; });
    const auto n = std::distance(first, output_times_.end());
    const double span = n >= 2 ? output_times_.back() - *first : 0.0;
    out.measured_output_rate_hz = span > 0.0 ? double(n - 1) / span : 0.0;
    return out;
}

void Sender::tick(double now) {
    std::size_t sent = 0;
    bool failed = false;
    bool stale = false;
    {
        std::lock_guard lock(io_mutex_);
        const auto track = tracks_.track(config_.object_name);
        if (!track) {
            stale = true;
        } else {
            try {
                for (const auto& frame : builder_.build(*track, config_, context_, now)) {
                    try {
                        transport_->send(frame);
                        ++sent;
                    } catch (const TransportError& e) {
                        if (!failed) spdlog::warn("sender {}: {}", id_, e.what());
                        failed = true;
                    }
                }
            } catch (const SenderError&) {
                stale = true;
            } catch (const std::exception& e) {
                spdlog::warn("sender {}: packet build failed: {}", id_, e.what());
                failed = true;
            }
        }
    }
    std::lock_guard lock(stats_mutex_);
    ++stats_.ticks_total;
    stats_.frames_sent += sent;
    if (stale) ++stats_.stale_skips;
    if (failed) ++stats_.deadline_misses;
    if (sent > 0) {
        output_times_.push_back(now);
        while (!output_times_.empty() && output_times_.front() < now - kRateWindowSeconds) output_times_.pop_front();
    }
}

void Sender::run(std::stop_token stop) {
    ClockParticipant participant(clock_);
    // Slot n falls at anchor + n / rate; computing each slot afresh (rather
    // than accumulating periods) keeps the schedule free of drift and lets a
    // sender at the capture rate land exactly on the capture instants.
    double anchor = clock_.now();
    double rate = config().rate_hz;
    std::uint64_t n = 0;
    auto slot = [&](std::uint64_t k) { return anchor + static_cast<double>(k) / rate; };
    while (clock_.sleep_until(slot(n), stop, WakeOrder::sender)) {
        const double now = clock_.now();
        const double period = 1.0 / rate;
        // Slots that passed entirely while we were not running are dropped
        // frames; count them and resynchronize.
        if (now - slot(n) >= period) {
            const auto missed = static_cast<std::uint64_t>(std::floor((now - slot(n)) / period));
            {
                std::lock_guard lock(stats_mutex_);
                stats_.ticks_total += missed;
                stats_.deadline_misses += missed;
            }
            n += missed;
        }
        tick(now);
        const double current = slot(n);
        ++n;
        if (const double r = config().rate_hz; r != rate) {
            anchor = current;
            rate = r;
            n = 1;
        }
    }
}

}  // namespace mocaplink::streaming
