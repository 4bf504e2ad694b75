#include "mocaplink/analysis.hpp"

#include <cmath>

#include "mocaplink/mavlink.hpp"

namespace mocaplink::analysis {

void RunningStats::add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
}

double RunningStats::stddev() const { return n_ < 2 ? 0.0 : std::sqrt(m2_ / static_cast<double>(n_ - 1)); }

Vec3 gps_to_local_ned(std::int32_t lat_e7, std::int32_t lon_e7, std::int32_t alt_mm,
                      const geodesy::GeodeticPoint& origin) {
    const geodesy::GeodeticPoint g{lat_e7 * 1e-7, lon_e7 * 1e-7, alt_mm * 1e-3};
    const Vec3 p = geodesy::geodetic_to_ecef(g);
    const Vec3 o = geodesy::geodetic_to_ecef(origin);
    const Vec3 d{p[0] - o[0], p[1] - o[1], p[2] - o[2]};
    const auto r = geodesy::ecef_to_enu_rotation(origin);
    auto dot = [&](const Vec3& row) { return row[0] * d[0] + row[1] * d[1] + row[2] * d[2]; };
    return {dot(r[1]), dot(r[0]), -dot(r[2])};
}

StreamReport analyze_stream(const std::vector<streaming::CapturedFrame>& frames, const geodesy::GeodeticPoint& origin,
                            double since) {
    StreamReport out;
    std::optional<std::uint8_t> last_seq;
    std::optional<double> first_t, last_t;
    std::size_t instants = 0;
    for (const auto& f : frames) {
        if (f.time < since) continue;
        ++out.frames;
        mavlink::DecodedFrame d;
        try {
            d = mavlink::decode_frame(f.bytes);
        } catch (const mavlink::CodecError&) {
            ++out.decode_errors;
            continue;
        }
        if (last_seq && static_cast<std::uint8_t>(*last_seq + 1) != d.header.sequence) ++out.sequence_breaks;
        last_seq = d.header.sequence;
        if (!last_t || f.time != *last_t) {
            ++instants;
            if (!first_t) first_t = f.time;
            last_t = f.time;
        }
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, mavlink::HilGps>) {
                    ++out.hil_gps;
                    const Vec3 ned = gps_to_local_ned(m.lat, m.lon, m.alt, origin);
                    for (int i = 0; i < 3; ++i) out.gps_ned[i].add(ned[i]);
                } else if constexpr (std::is_same_v<T, mavlink::LocalPositionNed>) {
                    ++out.local_position_ned;
                    out.ned_position[0].add(m.x);
                    out.ned_position[1].add(m.y);
                    out.ned_position[2].add(m.z);
                } else {
                    ++out.att_pos_mocap;
                }
            },
            d.message);
    }
    if (instants >= 2 && *last_t > *first_t) out.output_rate_hz = double(instants - 1) / (*last_t - *first_t);
    return out;
}

}  // namespace mocaplink::analysis
