#include <charconv>
#include <cmath>
#include <limits>
#include <type_traits>

#include "mocaplink/mavlink.hpp"

namespace mocaplink::mavlink {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

template <typename T>
void assign(T& dst, std::string_view name, std::string_view text) {
    text = trim(text);
    auto fail = [&](const char* why) {
        throw FieldParseError(std::string(name) + ": " + why + " '" + std::string(text) + "'");
    };
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (text.empty()) fail("empty value");
    if constexpr (std::is_floating_point_v<T>) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) fail("not a number");
        if (std::isfinite(v) && std::abs(v) > double(std::numeric_limits<T>::max())) fail("out of range");
        dst = static_cast<T>(v);
    } else if constexpr (std::is_signed_v<T>) {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) fail("not an integer");
        if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) fail("out of range");
        dst = static_cast<T>(v);
    } else {
        if (text.front() == '-') fail("out of range");
        unsigned long long v = 0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) fail("not an integer");
        if (v > std::numeric_limits<T>::max()) fail("out of range");
        dst = static_cast<T>(v);
    }
}

template <typename T, std::size_t N>
void assign_array(std::array<T, N>& dst, std::string_view name, std::string_view index, std::string_view text) {
    if (!index.empty()) {
        std::size_t i = 0;
        const auto [ptr, ec] = std::from_chars(index.data(), index.data() + index.size(), i);
        if (ec != std::errc() || ptr != index.data() + index.size() || i >= N) {
            throw FieldParseError(std::string(name) + ": bad index [" + std::string(index) + "]");
        }
        assign(dst[i], name, text);
        return;
    }
    std::size_t i = 0;
    while (true) {
        const auto comma = text.find(',');
        if (i >= N) throw FieldParseError(std::string(name) + ": expected " + std::to_string(N) + " values");
        assign(dst[i++], name, text.substr(0, comma));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (i != N) throw FieldParseError(std::string(name) + ": expected " + std::to_string(N) + " values");
}

}  // namespace

Message default_message(MessageType type) {
    switch (type) {
    case MessageType::hil_gps: return HilGps{};
    case MessageType::local_position_ned: return LocalPositionNed{};
    case MessageType::att_pos_mocap: return AttPosMocap{};
    }
    return HilGps{};
}

void set_field(Message& message, std::string_view name, std::string_view value) {
    std::string_view base = name;
    std::string_view index;
    if (const auto open = name.find('['); open != std::string_view::npos && name.back() == ']') {
        base = name.substr(0, open);
        index = name.substr(open + 1, name.size() - open - 2);
    }
    bool found = false;
    auto field = [&](std::string_view want, auto& dst) {
        if (found || base != want) return;
        found = true;
        if constexpr (requires { dst.size(); }) {
            assign_array(dst, name, index, value);
        } else {
            if (!index.empty()) throw FieldParseError(std::string(name) + ": field is not an array");
            assign(dst, name, value);
        }
    };
    std::visit(
        [&](auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, HilGps>) {
                field("time_usec", m.time_usec);
                field("lat", m.lat);
                field("lon", m.lon);
                field("alt", m.alt);
                field("eph", m.eph);
                field("epv", m.epv);
                field("vel", m.vel);
                field("vn", m.vn);
                field("ve", m.ve);
                field("vd", m.vd);
                field("cog", m.cog);
                field("fix_type", m.fix_type);
                field("satellites_visible", m.satellites_visible);
            } else if constexpr (std::is_same_v<T, LocalPositionNed>) {
                field("time_boot_ms", m.time_boot_ms);
                field("x", m.x);
                field("y", m.y);
                field("z", m.z);
                field("vx", m.vx);
                field("vy", m.vy);
                field("vz", m.vz);
            } else {
                field("time_usec", m.time_usec);
                field("q", m.q);
                field("x", m.x);
                field("y", m.y);
                field("z", m.z);
            }
        },
        message);
    if (!found) {
        throw FieldParseError("unknown field '" + std::string(name) + "' for " +
                              std::string(to_string(message_type(message))));
    }
}

Message parse_message_fields(MessageType type, const std::vector<std::string>& assignments) {
    Message m = default_message(type);
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw FieldParseError("expected name=value, got '" + a + "'");
        set_field(m, trim(std::string_view(a).substr(0, eq)), std::string_view(a).substr(eq + 1));
    }
    try {
        validate(m);
    } catch (const CodecError& e) {
        throw FieldParseError(e.what());
    }
    return m;
}

}  // namespace mocaplink::mavlink
