#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mocaplink/clock.hpp"
#include "mocaplink/ingest.hpp"

namespace mocaplink::ingest {

enum class ScenarioKind { hover, circle, line, waypoints };

std::string_view to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(std::string_view name);

/// Synthetic trajectory definition. All lengths in millimeters.
struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::hover;
    double rate_hz = 100.0;
    double drop_probability = 0.0;
    std::uint64_t seed = 1;
    std::vector<std::string> objects{"uav1"};
    /// Object i is displaced by i * object_spacing_mm from the base trajectory.
    Vec3 object_spacing_mm{1000.0, 0.0, 0.0};
    /// Per-axis standard deviation of i.i.d. Gaussian position noise.
    Vec3 noise_std_mm{0.0, 0.0, 0.0};

    Vec3 center_mm{0.0, 0.0, 1000.0};  ///< hover point / circle center
    double yaw_deg = 0.0;              ///< hover heading

    double radius_mm = 1000.0;           ///< circle
    double angular_speed_rad_s = 0.5;    ///< circle, counter-clockwise seen from +Z

    Vec3 start_mm{0.0, 0.0, 1000.0};     ///< line
    Vec3 velocity_mm_s{500.0, 0.0, 0.0}; ///< line

    std::vector<Vec3> waypoints_mm;  ///< waypoints, visited in order then looped
    double speed_mm_s = 500.0;       ///< waypoints
};

class ScenarioError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Throws ScenarioError if the scenario violates its invariants.
void validate(const ScenarioSpec& spec);

/// Noise-free pose of object `index` at time t.
struct Pose {
    Vec3 position_mm;
    Quaternion orientation;
};
Pose scenario_pose(const ScenarioSpec& spec, std::size_t index, double t);

/// Frame k is captured at t = k / rate_hz with frame_number k + 1.
std::uint64_t frame_index(const ScenarioSpec& spec, double t);

/// Samples for the frame nearest to t. The result depends only on (spec, t):
/// noise and drops are drawn from generators seeded by (seed, frame, object).
/// Objects whose frame is dropped are omitted.
std::vector<RigidBodySample> simulate_step(const ScenarioSpec& spec, double t);

/// Paces simulate_step output on a clock, frame by frame from the time the
/// source is first polled. A duration bounds the stream.
class SimulatorSource final : public SampleSource {
public:
    SimulatorSource(ScenarioSpec spec, Clock& clock, std::optional<double> duration_s = std::nullopt);

    std::optional<RigidBodySample> next(std::stop_token stop) override;
    std::string describe() const override;
    const ScenarioSpec& spec() const { return spec_; }

private:
    ScenarioSpec spec_;
    Clock& clock_;
    std::optional<double> duration_;
    std::optional<double> start_;
    std::uint64_t next_frame_ = 0;
    std::vector<RigidBodySample> pending_;
    std::size_t pending_pos_ = 0;
};

}  // namespace mocaplink::ingest
