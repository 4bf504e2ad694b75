#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mocaplink/ingest.hpp"
#include "mocaplink/mavlink.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(MOCAPLINK_TEST_DATA) / name;
}

inline nlohmann::json load_json(const std::string& name) {
    std::ifstream in(data_path(name));
    if (!in) throw std::runtime_error("missing test data " + name);
    return nlohmann::json::parse(in);
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mocaplink-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline mocaplink::ingest::RigidBodySample sample(std::uint64_t frame, double t, mocaplink::Vec3 position_mm,
                                                 bool occluded = false, const std::string& name = "uav1") {
    mocaplink::ingest::RigidBodySample s;
    s.frame_number = frame;
    s.capture_time = t;
    s.object_name = name;
    s.position_mm = position_mm;
    s.orientation = {1.0, 0.0, 0.0, 0.0};
    s.occluded = occluded;
    return s;
}

/// Random but sendable message of the given type.
inline mocaplink::mavlink::Message random_message(mocaplink::mavlink::MessageType type, std::mt19937_64& rng) {
    namespace mv = mocaplink::mavlink;
    auto u = [&](auto lo, auto hi) {
        using T = decltype(lo);
        return static_cast<T>(std::uniform_int_distribution<long long>(lo, hi)(rng));
    };
    auto f = [&](double lo, double hi) { return static_cast<float>(std::uniform_real_distribution<double>(lo, hi)(rng)); };
    switch (type) {
    case mv::MessageType::hil_gps: {
        mv::HilGps m;
        m.time_usec = rng();
        m.lat = static_cast<std::int32_t>(u(-900000000LL, 900000000LL));
        m.lon = static_cast<std::int32_t>(u(-1800000000LL, 1800000000LL));
        m.alt = static_cast<std::int32_t>(u(-2147483648LL, 2147483647LL));
        m.eph = static_cast<std::uint16_t>(u(0LL, 65535LL));
        m.epv = static_cast<std::uint16_t>(u(0LL, 65535LL));
        m.vel = static_cast<std::uint16_t>(u(0LL, 65535LL));
        m.vn = static_cast<std::int16_t>(u(-32768LL, 32767LL));
        m.ve = static_cast<std::int16_t>(u(-32768LL, 32767LL));
        m.vd = static_cast<std::int16_t>(u(-32768LL, 32767LL));
        m.cog = u(0LL, 9LL) == 0 ? mv::HilGps::unknown_cog : static_cast<std::uint16_t>(u(0LL, 35999LL));
        m.fix_type = static_cast<std::uint8_t>(u(0LL, 3LL));
        m.satellites_visible = static_cast<std::uint8_t>(u(0LL, 255LL));
        return m;
    }
    case mv::MessageType::local_position_ned: {
        mv::LocalPositionNed m;
        m.time_boot_ms = static_cast<std::uint32_t>(rng());
        m.x = f(-1e4, 1e4);
        m.y = f(-1e4, 1e4);
        m.z = f(-1e4, 1e4);
        m.vx = f(-100, 100);
        m.vy = f(-100, 100);
        m.vz = f(-100, 100);
        return m;
    }
    case mv::MessageType::att_pos_mocap: {
        mv::AttPosMocap m;
        m.time_usec = rng();
        std::normal_distribution<double> n(0.0, 1.0);
        double q[4] = {n(rng), n(rng), n(rng), n(rng)};
        const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        for (int i = 0; i < 4; ++i) m.q[i] = static_cast<float>(q[i] / norm);
        m.x = f(-1e4, 1e4);
        m.y = f(-1e4, 1e4);
        m.z = f(-1e4, 1e4);
        return m;
    }
    }
    return mv::HilGps{};
}

/// Builds a message from a JSON object of field values.
inline mocaplink::mavlink::Message message_from_json(mocaplink::mavlink::MessageType type, const nlohmann::json& fields) {
    auto m = mocaplink::mavlink::default_message(type);
    for (const auto& [name, value] : fields.items()) {
        std::string text;
        if (value.is_array()) {
            for (const auto& v : value) text += (text.empty() ? "" : ",") + v.dump();
        } else {
            text = value.dump();
        }
        mocaplink::mavlink::set_field(m, name, text);
    }
    return m;
}

}  // namespace testing
