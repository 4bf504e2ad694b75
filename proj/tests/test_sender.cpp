#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <thread>

#include "mocaplink/analysis.hpp"
#include "mocaplink/capture.hpp"
#include "mocaplink/sender.hpp"
#include "support.hpp"

using namespace mocaplink;
using namespace mocaplink::streaming;
using mavlink::MessageType;

namespace {

const geodesy::GeodeticPoint kOrigin{47.3977, 8.5456, 488.0};

PacketContext context() {
    PacketContext c;
    c.origin = kOrigin;
    return c;
}

tracking::FilterParams long_lived() {
    tracking::FilterParams p;
    p.staleness_timeout = 1e6;
    return p;
}

tracking::TrackState state_at(Vec3 position_m, Vec3 velocity_m_s, double t) {
    tracking::TrackState s;
    s.position = position_m;
    s.velocity = velocity_m_s;
    for (auto& c : s.covariance) c = {{{1e-6, 0.0}, {0.0, 1e-3}}};
    s.state_time = t;
    s.last_measurement_time = t;
    return s;
}

/// Object moving at constant velocity, always freshly measured at `now`,
/// unless frozen at a given time.
class MovingTrack final : public TrackSource {
public:
    MovingTrack(const Clock& clock, Vec3 p0, Vec3 v) : clock_(clock), p0_(p0), v_(v) {}

    std::optional<TrackSnapshot> track(const std::string& name) const override {
        std::lock_guard lock(mutex_);
        if (name != "uav1" || hidden_) return std::nullopt;
        const double t = frozen_.value_or(clock_.now());
        return TrackSnapshot{state_at({p0_[0] + v_[0] * t, p0_[1] + v_[1] * t, p0_[2] + v_[2] * t}, v_, t), params_};
    }

    void freeze(double t) {
        std::lock_guard lock(mutex_);
        frozen_ = t;
    }
    void hide() {
        std::lock_guard lock(mutex_);
        hidden_ = true;
    }

private:
    const Clock& clock_;
    Vec3 p0_;
    Vec3 v_;
    tracking::FilterParams params_;
    mutable std::mutex mutex_;
    std::optional<double> frozen_;
    bool hidden_ = false;
};

SenderConfig config(double rate_hz, std::uint16_t port = 14540) {
    SenderConfig c;
    c.object_name = "uav1";
    c.endpoint.port = port;
    c.rate_hz = rate_hz;
    return c;
}

/// Runs `body` as a clock participant on a fresh virtual clock.
template <typename F>
void with_virtual_time(VirtualClock& clock, F body) {
    clock.attach();
    ClockParticipant participant(clock);
    body();
}

void advance_to(VirtualClock& clock, double t) { clock.sleep_until(t, {}, WakeOrder::control); }

std::vector<mavlink::DecodedFrame> decode_all(const std::vector<CapturedFrame>& frames) {
    std::vector<mavlink::DecodedFrame> out;
    for (const auto& f : frames) out.push_back(mavlink::decode_frame(f.bytes));
    return out;
}

class FailingTransport final : public Transport {
public:
    void send(std::span<const std::uint8_t>) override { throw TransportError("network unreachable"); }
};

}  // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(config(50).validate());
    auto bad = [](auto mutate) {
        SenderConfig c = config(50);
        mutate(c);
        CHECK_THROWS_AS(c.validate(), SenderError);
    };
    bad([](SenderConfig& c) { c.rate_hz = 0; });
    bad([](SenderConfig& c) { c.rate_hz = 1000.5; });
    bad([](SenderConfig& c) { c.rate_hz = std::nan(""); });
    bad([](SenderConfig& c) { c.endpoint.port = 0; });
    bad([](SenderConfig& c) { c.endpoint.system_id = 0; });
    bad([](SenderConfig& c) { c.enabled_messages = {}; });
    bad([](SenderConfig& c) { c.protocol_version = 3; });
    bad([](SenderConfig& c) { c.object_name.clear(); });
    SenderConfig top = config(1000);
    CHECK_NOTHROW(top.validate());
}

TEST_CASE("message set") {
    MessageSet s;
    CHECK(s.empty());
    s.insert(MessageType::att_pos_mocap);
    s.insert(MessageType::hil_gps);
    CHECK(s.size() == 2);
    CHECK(s.types() == std::vector<MessageType>{MessageType::hil_gps, MessageType::att_pos_mocap});
    s.erase(MessageType::hil_gps);
    CHECK_FALSE(s.contains(MessageType::hil_gps));
    CHECK(MessageSet::all().size() == 3);
}

TEST_CASE("object at the origin maps to the origin in every message") {
    const TrackSnapshot t{state_at({0, 0, 0}, {0, 0, 0}, 1.0), {}};
    PacketBuilder b(config(50));
    const auto msgs = b.build_messages(t, config(50), context(), 1.0);
    REQUIRE(msgs.size() == 3);
    const auto& gps = std::get<mavlink::HilGps>(msgs[0]);
    CHECK(std::abs(gps.lat - std::llround(kOrigin.latitude_deg * 1e7)) <= 1);
    CHECK(std::abs(gps.lon - std::llround(kOrigin.longitude_deg * 1e7)) <= 1);
    CHECK(gps.alt == 488000);
    CHECK(gps.fix_type == 3);
    CHECK(gps.cog == mavlink::HilGps::unknown_cog);
    const auto& lpn = std::get<mavlink::LocalPositionNed>(msgs[1]);
    CHECK(lpn.x == 0.0f);
    CHECK(lpn.y == 0.0f);
    CHECK(lpn.z == 0.0f);
    const auto& att = std::get<mavlink::AttPosMocap>(msgs[2]);
    CHECK(att.x == 0.0f);
    CHECK(att.z == 0.0f);
    CHECK(att.q == std::array<float, 4>{1, 0, 0, 0});
}

TEST_CASE("one metre up is negative down") {
    const TrackSnapshot t{state_at({0, 0, 1.0}, {0, 0, 0}, 0.0), {}};
    PacketBuilder b(config(50));
    const auto msgs = b.build_messages(t, config(50), context(), 0.0);
    CHECK(std::get<mavlink::LocalPositionNed>(msgs[1]).z == -1.0f);
    CHECK(std::get<mavlink::AttPosMocap>(msgs[2]).z == -1.0f);
    CHECK(std::get<mavlink::HilGps>(msgs[0]).alt == 489000);
    // capture +Y (left) is west
    const TrackSnapshot left{state_at({0, 2.0, 0}, {0, 0, 0}, 0.0), {}};
    CHECK(std::get<mavlink::LocalPositionNed>(b.build_messages(left, config(50), context(), 0.0)[1]).y == -2.0f);
}

TEST_CASE("GPS fix matches a step-by-step chain through ECEF") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(-5.0, 5.0);
    std::uniform_real_distribution<double> vel(-3.0, 3.0);
    std::uniform_real_distribution<double> dt(0.0, 0.02);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p{pos(rng), pos(rng), pos(rng) + 5.0};
        const Vec3 v{vel(rng), vel(rng), vel(rng)};
        const double lag = dt(rng);
        const TrackSnapshot t{state_at(p, v, 0.0), {}};
        PacketBuilder b(config(50));
        const auto gps = std::get<mavlink::HilGps>(b.build_messages(t, config(50), context(), lag)[0]);
        // extrapolate, rotate capture -> NED -> ENU by hand, then go through ECEF
        const Vec3 c{p[0] + v[0] * lag, p[1] + v[1] * lag, p[2] + v[2] * lag};
        const Vec3 ned{c[0], -c[1], -c[2]};
        const Vec3 enu{ned[1], ned[0], -ned[2]};
        const auto r = geodesy::ecef_to_enu_rotation(kOrigin);
        Vec3 ecef = geodesy::geodetic_to_ecef(kOrigin);
        for (int k = 0; k < 3; ++k) ecef[k] += r[0][k] * enu[0] + r[1][k] * enu[1] + r[2][k] * enu[2];
        const auto g = geodesy::ecef_to_geodetic(ecef);
        CHECK(std::abs(gps.lat - std::llround(g.latitude_deg * 1e7)) <= 1);
        CHECK(std::abs(gps.lon - std::llround(g.longitude_deg * 1e7)) <= 1);
        CHECK(std::abs(gps.alt - std::llround(g.altitude_m * 1e3)) <= 1);
        CHECK(gps.vn == static_cast<std::int16_t>(std::round(v[0] * 100)));
        CHECK(gps.ve == static_cast<std::int16_t>(std::round(-v[1] * 100)));
        CHECK(gps.vd == static_cast<std::int16_t>(std::round(-v[2] * 100)));
    }
}

TEST_CASE("frames carry consecutive sequence numbers and the configured identity") {
    SenderConfig c = config(50);
    c.endpoint.system_id = 7;
    c.endpoint.component_id = 197;
    PacketBuilder b(c);
    const TrackSnapshot t{state_at({1, 2, 3}, {0, 0, 0}, 0.0), long_lived()};
    std::vector<std::uint8_t> seqs;
    for (int i = 0; i < 100; ++i) {
        for (const auto& f : b.build(t, c, context(), i * 0.02)) {
            const auto d = mavlink::decode_frame(f);
            CHECK(d.header.system_id == 7);
            CHECK(d.header.component_id == 197);
            CHECK(d.header.protocol_version == 2);
            seqs.push_back(d.header.sequence);
        }
    }
    for (std::size_t i = 1; i < seqs.size(); ++i) CHECK(seqs[i] == static_cast<std::uint8_t>(seqs[i - 1] + 1));
    c.protocol_version = 1;
    PacketBuilder v1(c);
    CHECK(v1.build(t, c, context(), 0.0)[0][0] == mavlink::kMagicV1);
}

TEST_CASE("stale tracks are refused") {
    tracking::FilterParams p;
    p.staleness_timeout = 0.5;
    const TrackSnapshot t{state_at({0, 0, 0}, {0, 0, 0}, 10.0), p};
    PacketBuilder b(config(50));
    CHECK_NOTHROW(b.build(t, config(50), context(), 10.5));
    try {
        b.build(t, config(50), context(), 10.51);
        FAIL("expected throw");
    } catch (const SenderError& e) {
        CHECK(e.code() == SenderErrc::stale_track);
    }
}

TEST_CASE("state slightly ahead of the send time is not a regression") {
    const TrackSnapshot t{state_at({0, 0, 0}, {1, 0, 0}, 5.0001), {}};
    PacketBuilder b(config(50));
    const auto lpn = std::get<mavlink::LocalPositionNed>(b.build_messages(t, config(50), context(), 5.0)[1]);
    CHECK(lpn.x == 0.0f);
}

TEST_CASE("timestamps strictly increase even when the clock does not") {
    PacketBuilder b(config(50));
    const TrackSnapshot t{state_at({0, 0, 0}, {0, 0, 0}, 0.0), long_lived()};
    std::uint64_t last_usec = 0;
    std::uint32_t last_ms = 0;
    for (int i = 0; i < 50; ++i) {
        const double now = 0.01 * (i / 5);  // repeated instants
        const auto msgs = b.build_messages(t, config(50), context(), now);
        const auto usec = std::get<mavlink::HilGps>(msgs[0]).time_usec;
        const auto ms = std::get<mavlink::LocalPositionNed>(msgs[1]).time_boot_ms;
        CHECK(std::get<mavlink::AttPosMocap>(msgs[2]).time_usec == usec);
        if (i > 0) {
            CHECK(usec > last_usec);
            CHECK(ms > last_ms);
        }
        last_usec = usec;
        last_ms = ms;
    }
    PacketContext ctx = context();
    ctx.epoch_offset_usec = 1'700'000'000'000'000ULL;
    PacketBuilder e(config(50));
    CHECK(std::get<mavlink::HilGps>(e.build_messages(t, config(50), ctx, 2.5)[0]).time_usec ==
          1'700'000'002'500'000ULL);
}

TEST_CASE("course over ground is held below the speed threshold") {
    PacketBuilder b(config(50));
    auto cog = [&](Vec3 v, double now) {
        const TrackSnapshot t{state_at({0, 0, 1}, v, now), {}};
        return std::get<mavlink::HilGps>(b.build_messages(t, config(50), context(), now)[0]).cog;
    };
    CHECK(cog({0, 0, 0}, 0.0) == 65535);
    CHECK(cog({0.01, 0, 0}, 0.1) == 65535);
    CHECK(cog({1, 0, 0}, 0.2) == 0);        // north
    CHECK(cog({0, -1, 0}, 0.3) == 9000);    // capture -Y is east
    CHECK(cog({0.001, 0.001, 0}, 0.4) == 9000);
    CHECK(cog({-1, 0, 0}, 0.5) == 18000);
    CHECK(cog({0, 1, 0}, 0.6) == 27000);
    CHECK(cog({0, 0, 0}, 0.7) == 27000);
}

TEST_CASE("ground speed saturates to unknown instead of wrapping") {
    PacketBuilder b(config(50));
    const TrackSnapshot t{state_at({0, 0, 1}, {3, 4, 0}, 0.0), {}};
    CHECK(std::get<mavlink::HilGps>(b.build_messages(t, config(50), context(), 0.0)[0]).vel == 500);
    const TrackSnapshot fast{state_at({0, 0, 1}, {400, 0, 0}, 0.0), {}};
    CHECK_THROWS_AS(b.build_messages(fast, config(50), context(), 0.0), geodesy::GeodesyError);
}

TEST_CASE("freshly created sender has zero stats") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    CaptureSink sink(clock);
    Sender s(1, config(50), tracks, context(), clock, sink.factory());
    const auto st = s.snapshot_stats();
    CHECK(st.ticks_total == 0);
    CHECK(st.frames_sent == 0);
    CHECK(st.deadline_misses == 0);
    CHECK(st.stale_skips == 0);
    CHECK(st.measured_output_rate_hz == 0.0);
    CHECK(st.drop_rate() == 0.0);
    CHECK_FALSE(s.running());
}

TEST_CASE("50 Hz for 10 s under virtual time") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0.5, 0.2, 0});
    CaptureSink sink(clock);
    Sender s(1, config(50), tracks, context(), clock, sink.factory());
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 10.0);
        s.stop();
    });
    const auto st = s.snapshot_stats();
    CHECK(st.ticks_total >= 498);
    CHECK(st.ticks_total <= 502);
    CHECK(st.frames_sent == st.ticks_total * 3);
    CHECK(st.deadline_misses == 0);
    CHECK(st.stale_skips == 0);
    CHECK(st.measured_output_rate_hz == doctest::Approx(50.0).epsilon(0.02));
    const auto report = analysis::analyze_stream(sink.frames(), kOrigin);
    CHECK(report.decode_errors == 0);
    CHECK(report.sequence_breaks == 0);
    CHECK(report.output_rate_hz == doctest::Approx(50.0).epsilon(0.02));
}

TEST_CASE("packet timestamps increase monotonically across a run") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    CaptureSink sink(clock);
    Sender s(1, config(120), tracks, context(), clock, sink.factory());
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 3.0);
        s.stop();
    });
    std::map<MessageType, std::uint64_t> last;
    for (const auto& d : decode_all(sink.frames())) {
        std::uint64_t t = 0;
        std::visit(
            [&](const auto& m) {
                if constexpr (requires { m.time_usec; }) {
                    t = m.time_usec;
                } else {
                    t = m.time_boot_ms;
                }
            },
            d.message);
        const auto type = mavlink::message_type(d.message);
        if (last.contains(type)) CHECK(t > last[type]);
        last[type] = t;
    }
    CHECK(last.size() == 3);
}

TEST_CASE("stale skips once ingest stops") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    CaptureSink sink(clock);
    Sender s(1, config(100), tracks, context(), clock, sink.factory());
    std::size_t frames_at_stale = 0;
    SenderStats before;
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 1.0);
        tracks.freeze(1.0);
        advance_to(clock, 1.5);  // staleness timeout is 0.5 s
        before = s.snapshot_stats();
        frames_at_stale = sink.size();
        advance_to(clock, 3.0);
        s.stop();
    });
    const auto st = s.snapshot_stats();
    CHECK(sink.size() == frames_at_stale);
    CHECK(st.stale_skips - before.stale_skips == st.ticks_total - before.ticks_total);
    CHECK(st.stale_skips >= 149);
    CHECK(st.deadline_misses == 0);
    CHECK(st.frames_sent == frames_at_stale);
}

TEST_CASE("unknown object ticks are stale skips") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    tracks.hide();
    CaptureSink sink(clock);
    Sender s(1, config(10), tracks, context(), clock, sink.factory());
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 1.0);
        s.stop();
    });
    CHECK(sink.size() == 0);
    CHECK(s.snapshot_stats().stale_skips == s.snapshot_stats().ticks_total);
}

TEST_CASE("rate change takes effect within one tick") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    CaptureSink sink(clock);
    SenderConfig c = config(10);
    c.enabled_messages = {MessageType::local_position_ned};
    Sender s(1, c, tracks, context(), clock, sink.factory());
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 1.05);
        SenderPatch patch;
        patch.rate_hz = 100.0;
        CHECK(s.update(patch).rate_hz == 100.0);
        advance_to(clock, 4.0);
        s.stop();
    });
    const auto frames = sink.frames();
    std::vector<double> times;
    for (const auto& f : frames) times.push_back(f.time);
    // before the change: 100 ms gaps
    for (std::size_t i = 1; i < times.size() && times[i] <= 1.0 + 1e-9; ++i) {
        CHECK(times[i] - times[i - 1] == doctest::Approx(0.1));
    }
    // after the change: the 1.1 s tick is the last 100 ms gap, then 10 ms
    std::size_t first_after = 0;
    while (times[first_after] < 1.1 - 1e-9) ++first_after;
    CHECK(times[first_after] == doctest::Approx(1.1));
    for (std::size_t i = first_after + 1; i < times.size(); ++i) {
        CHECK(times[i] - times[i - 1] == doctest::Approx(0.01));
    }
    CHECK(s.snapshot_stats().measured_output_rate_hz == doctest::Approx(100.0).epsilon(0.02));
}

TEST_CASE("updates toggle messages and re-target the endpoint") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    CaptureSink sink(clock);
    Sender s(1, config(10, 14600), tracks, context(), clock, sink.factory());
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 0.55);
        SenderPatch messages;
        messages.enabled_messages = MessageSet{MessageType::att_pos_mocap};
        s.update(messages);
        advance_to(clock, 1.05);
        SenderPatch endpoint;
        DroneEndpoint e = s.config().endpoint;
        e.port = 14601;
        e.system_id = 9;
        endpoint.endpoint = e;
        s.update(endpoint);
        advance_to(clock, 1.55);
        s.stop();
    });
    const auto first = sink.frames_for(14600);
    const auto second = sink.frames_for(14601);
    CHECK(first.size() == 6 * 3 + 5);
    CHECK(second.size() == 5);
    for (const auto& f : first) {
        if (f.time > 0.55) CHECK(mavlink::message_type(mavlink::decode_frame(f.bytes).message) == MessageType::att_pos_mocap);
    }
    for (const auto& d : decode_all(second)) CHECK(d.header.system_id == 9);
    // rejected patches leave the config unchanged
    SenderPatch bad;
    bad.rate_hz = -1.0;
    CHECK_THROWS_AS(s.update(bad), SenderError);
    CHECK(s.config().rate_hz == 10.0);
    SenderPatch empty;
    empty.enabled_messages = MessageSet{};
    CHECK_THROWS_AS(s.update(empty), SenderError);
}

TEST_CASE("transport failures count as deadline misses and the sender keeps going") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    Sender s(1, config(20), tracks, context(), clock,
             [](const DroneEndpoint&) { return std::make_unique<FailingTransport>(); });
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 1.0);
        s.stop();
    });
    const auto st = s.snapshot_stats();
    CHECK(st.ticks_total >= 20);
    CHECK(st.deadline_misses == st.ticks_total);
    CHECK(st.frames_sent == 0);
    CHECK(st.drop_rate() == 1.0);
}

TEST_CASE("stopped senders emit nothing and their stats freeze") {
    VirtualClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    CaptureSink sink(clock);
    Sender s(1, config(50), tracks, context(), clock, sink.factory());
    SenderStats at_stop;
    with_virtual_time(clock, [&] {
        s.start();
        advance_to(clock, 1.0);
        s.stop();
        at_stop = s.snapshot_stats();
        const auto frames = sink.size();
        advance_to(clock, 5.0);
        CHECK(sink.size() == frames);
    });
    const auto later = s.snapshot_stats();
    CHECK(later.ticks_total == at_stop.ticks_total);
    CHECK(later.measured_output_rate_hz == at_stop.measured_output_rate_hz);
    CHECK(later.measured_output_rate_hz == doctest::Approx(50.0).epsilon(0.02));
}

TEST_CASE("missed slots are counted when the sender falls behind") {
    // Real-time clock with a transport that stalls once for 100 ms.
    SteadyClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    struct Stall final : Transport {
        int calls = 0;
        void send(std::span<const std::uint8_t>) override {
            if (++calls == 10) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
    };
    SenderConfig c = config(100);
    c.enabled_messages = {MessageType::local_position_ned};
    Sender s(1, c, tracks, context(), clock, [](const DroneEndpoint&) { return std::make_unique<Stall>(); });
    s.start();
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    s.stop();
    const auto st = s.snapshot_stats();
    CHECK(st.deadline_misses >= 8);
    CHECK(st.ticks_total >= 35);
    CHECK(st.ticks_total <= 45);
}

TEST_CASE("real UDP delivery to a local receiver") {
    UdpReceiver rx;
    SteadyClock clock;
    MovingTrack tracks(clock, {0, 0, 1}, {0, 0, 0});
    Sender s(1, config(50, rx.port()), tracks, context(), clock, udp_transport_factory());
    const auto t0 = std::chrono::steady_clock::now();
    s.start();
    std::array<std::uint8_t, 512> buf;
    std::size_t got = 0;
    std::optional<std::chrono::steady_clock::duration> first;
    std::map<MessageType, int> by_type;
    while (std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(500)) {
        const auto n = rx.receive(buf, 50);
        if (n == 0) continue;
        if (!first) first = std::chrono::steady_clock::now() - t0;
        ++got;
        ++by_type[mavlink::message_type(mavlink::decode_frame({buf.data(), n}).message)];
    }
    s.stop();
    REQUIRE(first.has_value());
    CHECK(*first < std::chrono::milliseconds(100));
    CHECK(got >= 60);
    CHECK(by_type.size() == 3);
}
