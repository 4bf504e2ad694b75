#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "mocaplink/capture.hpp"
#include "mocaplink/geodesy.hpp"

namespace mocaplink::analysis {

/// Running mean and sample standard deviation (Welford).
class RunningStats {
public:
    void add(double x);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double stddev() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// What a receiver would see on one robot's stream, decoded back from the
/// emitted frames.
struct StreamReport {
    std::size_t frames = 0;
    std::size_t decode_errors = 0;
    std::size_t sequence_breaks = 0;  ///< consecutive frames whose seq did not step by 1 mod 256
    std::size_t hil_gps = 0;
    std::size_t local_position_ned = 0;
    std::size_t att_pos_mocap = 0;
    double output_rate_hz = 0.0;  ///< distinct send instants over their span
    std::array<RunningStats, 3> ned_position;  ///< LOCAL_POSITION_NED x, y, z, m
    std::array<RunningStats, 3> gps_ned;       ///< HIL_GPS lat/lon/alt mapped back to local NED, m
};

/// Decodes frames sent at or after `since`. GPS fixes are converted to a
/// local NED offset about `origin` through the ECEF frame.
StreamReport analyze_stream(const std::vector<streaming::CapturedFrame>& frames, const geodesy::GeodeticPoint& origin,
                            double since = -std::numeric_limits<double>::infinity());

/// HIL_GPS position back into local NED metres about `origin`.
Vec3 gps_to_local_ned(std::int32_t lat_e7, std::int32_t lon_e7, std::int32_t alt_mm,
                      const geodesy::GeodeticPoint& origin);

}  // namespace mocaplink::analysis
