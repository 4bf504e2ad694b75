#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "mocaplink/ingest.hpp"
#include "mocaplink/types.hpp"

namespace mocaplink::tracking {

enum class TrackingErrc { occluded_first_sample, time_regression, stale_track, invalid_params };

class TrackingError : public std::runtime_error {
public:
    TrackingError(TrackingErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    TrackingErrc code() const noexcept { return code_; }

private:
    TrackingErrc code_;
};

struct FilterParams {
    double process_noise_psd = 1.0;           ///< q, m^2/s^3
    double measurement_variance = 1e-6;       ///< r, m^2
    double initial_velocity_variance = 1.0;   ///< (m/s)^2
    double staleness_timeout = 0.5;           ///< s
    bool gate_enabled = false;
    double gate_threshold = 9.0;              ///< squared Mahalanobis distance per axis

    void validate() const;  ///< throws TrackingError(invalid_params)
};

/// Symmetric 2x2 covariance over [position, velocity].
using Mat2 = std::array<std::array<double, 2>, 2>;

/// Per-object constant-velocity filter state, three decoupled axes.
/// Mean and covariance refer to `state_time`; `last_measurement_time` is the
/// capture time of the newest non-occluded sample and drives staleness.
struct TrackState {
    Vec3 position{};  ///< m, capture frame
    Vec3 velocity{};  ///< m/s, capture frame
    std::array<Mat2, 3> covariance{};
    Quaternion orientation{};
    double state_time = 0.0;
    double last_measurement_time = 0.0;
    std::uint64_t last_frame_number = 0;

    double trace() const;
};

inline constexpr double kMillimetersPerMeter = 1000.0;

TrackState kf_init(const ingest::RigidBodySample& sample, const FilterParams& params);

TrackState kf_predict(const TrackState& state, double dt, const FilterParams& params);

/// Occluded samples take the predict-only path. Throws TrackingError
/// (time_regression) if the sample is older than the state.
TrackState kf_update(const TrackState& state, const ingest::RigidBodySample& sample, const FilterParams& params);

/// Pure extrapolation to `now`. Throws time_regression if now precedes the
/// state, stale_track if the newest measurement is older than the timeout.
TrackState predict_to(const TrackState& state, double now, const FilterParams& params);

}  // namespace mocaplink::tracking
