#include "mocaplink/tracking.hpp"

#include <cmath>

namespace mocaplink::tracking {

void FilterParams::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(process_noise_psd)) throw TrackingError(TrackingErrc::invalid_params, "process_noise_psd must be > 0");
    if (!positive(measurement_variance)) {
        throw TrackingError(TrackingErrc::invalid_params, "measurement_variance must be > 0");
    }
    if (!positive(initial_velocity_variance)) {
        throw TrackingError(TrackingErrc::invalid_params, "initial_velocity_variance must be > 0");
    }
    if (!positive(staleness_timeout)) throw TrackingError(TrackingErrc::invalid_params, "staleness_timeout must be > 0");
    if (gate_enabled && !positive(gate_threshold)) {
        throw TrackingError(TrackingErrc::invalid_params, "gate_threshold must be > 0");
    }
}

double TrackState::trace() const {
    double t = 0.0;
    for (const auto& p : covariance) t += p[0][0] + p[1][1];
    return t;
}

TrackState kf_init(const ingest::RigidBodySample& sample, const FilterParams& params) {
    if (sample.occluded) {
        throw TrackingError(TrackingErrc::occluded_first_sample, "cannot initialize a track from an occluded sample");
    }
    TrackState s;
    for (int axis = 0; axis < 3; ++axis) {
        s.position[axis] = sample.position_mm[axis] / kMillimetersPerMeter;
        s.velocity[axis] = 0.0;
        s.covariance[axis] = {{{params.measurement_variance, 0.0}, {0.0, params.initial_velocity_variance}}};
    }
    s.orientation = sample.orientation;
    s.state_time = sample.capture_time;
    s.last_measurement_time = sample.capture_time;
    s.last_frame_number = sample.frame_number;
    return s;
}

TrackState kf_predict(const TrackState& state, double dt, const FilterParams& params) {
    TrackState s = state;
    if (dt == 0.0) return s;
    const double q = params.process_noise_psd;
    const double q00 = q * dt * dt * dt / 3.0;
    const double q01 = q * dt * dt / 2.0;
    const double q11 = q * dt;
    for (int axis = 0; axis < 3; ++axis) {
        s.position[axis] = state.position[axis] + dt * state.velocity[axis];
        const Mat2& p = state.covariance[axis];
        // F P F^T + Q with F = [[1, dt], [0, 1]]
        const double p00 = p[0][0] + dt * (p[0][1] + p[1][0]) + dt * dt * p[1][1] + q00;
        const double p01 = p[0][1] + dt * p[1][1] + q01;
        const double p11 = p[1][1] + q11;
        s.covariance[axis] = {{{p00, p01}, {p01, p11}}};
    }
    s.state_time = state.state_time + dt;
    return s;
}

TrackState kf_update(const TrackState& state, const ingest::RigidBodySample& sample, const FilterParams& params) {
    if (sample.capture_time < state.state_time) {
        throw TrackingError(TrackingErrc::time_regression, "sample is older than the track state");
    }
    TrackState s = kf_predict(state, sample.capture_time - state.state_time, params);
    s.state_time = sample.capture_time;
    if (sample.occluded) {
        return s;
    }
    const double r = params.measurement_variance;
    for (int axis = 0; axis < 3; ++axis) {
        const Mat2 p = s.covariance[axis];
        const double z = sample.position_mm[axis] / kMillimetersPerMeter;
        const double y = z - s.position[axis];
        const double innovation_var = p[0][0] + r;
        if (params.gate_enabled && y * y / innovation_var > params.gate_threshold) {
            continue;
        }
        const double k0 = p[0][0] / innovation_var;
        const double k1 = p[1][0] / innovation_var;
        s.position[axis] += k0 * y;
        s.velocity[axis] += k1 * y;
        // (I - K H) P, written in the cancellation-free form for H = [1, 0].
        const double n00 = r * p[0][0] / innovation_var;
        const double n01 = r * p[0][1] / innovation_var;
        const double n11 = p[1][1] - k1 * p[0][1];
        s.covariance[axis] = {{{n00, n01}, {n01, n11}}};
    }
    s.orientation = sample.orientation;
    s.last_measurement_time = sample.capture_time;
    s.last_frame_number = sample.frame_number;
    return s;
}

TrackState predict_to(const TrackState& state, double now, const FilterParams& params) {
    if (now < state.state_time) {
        throw TrackingError(TrackingErrc::time_regression, "cannot extrapolate backwards in time");
    }
    if (now - state.last_measurement_time > params.staleness_timeout) {
        throw TrackingError(TrackingErrc::stale_track, "track is stale");
    }
    return kf_predict(state, now - state.state_time, params);
}

}  // namespace mocaplink::tracking
