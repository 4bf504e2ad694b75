#include "mocaplink/simulator.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace mocaplink::ingest {

std::string_view to_string(ScenarioKind kind) {
    switch (kind) {
    case ScenarioKind::hover: return "hover";
    case ScenarioKind::circle: return "circle";
    case ScenarioKind::line: return "line";
    case ScenarioKind::waypoints: return "waypoints";
    }
    return "";
}

ScenarioKind scenario_kind_from_string(std::string_view name) {
    for (auto k : {ScenarioKind::hover, ScenarioKind::circle, ScenarioKind::line, ScenarioKind::waypoints}) {
        if (to_string(k) == name) return k;
    }
    throw ScenarioError("unknown scenario kind '" + std::string(name) + "'");
}

void validate(const ScenarioSpec& spec) {
    if (!(spec.rate_hz > 0.0) || !std::isfinite(spec.rate_hz)) throw ScenarioError("rate_hz must be > 0");
    if (!(spec.drop_probability >= 0.0 && spec.drop_probability <= 1.0)) {
        throw ScenarioError("drop_probability must be within [0, 1]");
    }
    for (double s : spec.noise_std_mm) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ScenarioError("noise_std_mm must be >= 0");
    }
    if (spec.objects.empty()) throw ScenarioError("scenario needs at least one object");
    for (const auto& name : spec.objects) {
        if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos) {
            throw ScenarioError("object names must be non-empty and contain no whitespace");
        }
    }
    switch (spec.kind) {
    case ScenarioKind::circle:
        if (!(spec.radius_mm > 0.0)) throw ScenarioError("circle radius_mm must be > 0");
        break;
    case ScenarioKind::waypoints: {
        if (spec.waypoints_mm.size() < 2) throw ScenarioError("waypoints scenario needs at least two points");
        if (!(spec.speed_mm_s > 0.0)) throw ScenarioError("waypoints speed_mm_s must be > 0");
        double length = 0.0;
        for (std::size_t i = 0; i < spec.waypoints_mm.size(); ++i) {
            const auto& a = spec.waypoints_mm[i];
            const auto& b = spec.waypoints_mm[(i + 1) % spec.waypoints_mm.size()];
            length += norm({b[0] - a[0], b[1] - a[1], b[2] - a[2]});
        }
        if (!(length > 0.0)) throw ScenarioError("waypoint path has zero length");
        break;
    }
    default: break;
    }
}

Pose scenario_pose(const ScenarioSpec& spec, std::size_t index, double t) {
    Pose pose{};
    switch (spec.kind) {
    case ScenarioKind::hover:
        pose.position_mm = spec.center_mm;
        pose.orientation = Quaternion::from_yaw(spec.yaw_deg * std::numbers::pi / 180.0);
        break;
    case ScenarioKind::circle: {
        const double phase = spec.angular_speed_rad_s * t;
        pose.position_mm = {spec.center_mm[0] + spec.radius_mm * std::cos(phase),
                            spec.center_mm[1] + spec.radius_mm * std::sin(phase), spec.center_mm[2]};
        const double heading = phase + std::copysign(std::numbers::pi / 2.0, spec.angular_speed_rad_s);
        pose.orientation = Quaternion::from_yaw(heading);
        break;
    }
    case ScenarioKind::line: {
        const auto& v = spec.velocity_mm_s;
        pose.position_mm = {spec.start_mm[0] + v[0] * t, spec.start_mm[1] + v[1] * t, spec.start_mm[2] + v[2] * t};
        pose.orientation = Quaternion::from_yaw((v[0] == 0.0 && v[1] == 0.0) ? 0.0 : std::atan2(v[1], v[0]));
        break;
    }
    case ScenarioKind::waypoints: {
        const auto& wp = spec.waypoints_mm;
        std::vector<double> lengths(wp.size());
        double total = 0.0;
        for (std::size_t i = 0; i < wp.size(); ++i) {
            const auto& a = wp[i];
            const auto& b = wp[(i + 1) % wp.size()];
            lengths[i] = norm({b[0] - a[0], b[1] - a[1], b[2] - a[2]});
            total += lengths[i];
        }
        double s = std::fmod(spec.speed_mm_s * t, total);
        std::size_t seg = 0;
        while (seg + 1 < wp.size() && (lengths[seg] == 0.0 || s > lengths[seg])) {
            s -= lengths[seg];
            ++seg;
        }
        const auto& a = wp[seg];
        const auto& b = wp[(seg + 1) % wp.size()];
        const double u = lengths[seg] > 0.0 ? std::min(s / lengths[seg], 1.0) : 0.0;
        pose.position_mm = {a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])};
        const double dx = b[0] - a[0], dy = b[1] - a[1];
        pose.orientation = Quaternion::from_yaw((dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx));
        break;
    }
    }
    const double k = static_cast<double>(index);
    for (int axis = 0; axis < 3; ++axis) pose.position_mm[axis] += k * spec.object_spacing_mm[axis];
    return pose;
}

std::uint64_t frame_index(const ScenarioSpec& spec, double t) {
    return static_cast<std::uint64_t>(std::llround(t * spec.rate_hz));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::vector<RigidBodySample> simulate_step(const ScenarioSpec& spec, double t) {
    const std::uint64_t k = frame_index(spec, t);
    std::vector<RigidBodySample> out;
    out.reserve(spec.objects.size());
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        std::mt19937_64 rng(splitmix64(splitmix64(spec.seed ^ splitmix64(k)) + i));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        if (unit(rng) < spec.drop_probability) continue;

        Pose pose = scenario_pose(spec, i, t);
        for (int axis = 0; axis < 3; ++axis) {
            if (spec.noise_std_mm[axis] > 0.0) {
                std::normal_distribution<double> noise(0.0, spec.noise_std_mm[axis]);
                pose.position_mm[axis] += noise(rng);
            }
        }
        RigidBodySample s;
        s.frame_number = k + 1;
        s.capture_time = t;
        s.object_name = spec.objects[i];
        s.position_mm = pose.position_mm;
        s.orientation = pose.orientation;
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------

SimulatorSource::SimulatorSource(ScenarioSpec spec, Clock& clock, std::optional<double> duration_s)
    : spec_(std::move(spec)), clock_(clock), duration_(duration_s) {
    validate(spec_);
}

std::string SimulatorSource::describe() const {
    return "simulate " + std::string(to_string(spec_.kind)) + " @ " + std::to_string(spec_.rate_hz) + " Hz, " +
           std::to_string(spec_.objects.size()) + " object(s)";
}

std::optional<RigidBodySample> SimulatorSource::next(std::stop_token stop) {
    while (pending_pos_ >= pending_.size()) {
        if (!start_) start_ = clock_.now();
        const double t = static_cast<double>(next_frame_) / spec_.rate_hz;
        if (duration_ && t > *duration_) return std::nullopt;
        if (!clock_.sleep_until(*start_ + t, stop, WakeOrder::ingest)) return std::nullopt;
        pending_ = simulate_step(spec_, t);
        pending_pos_ = 0;
        ++next_frame_;
    }
    return std::move(pending_[pending_pos_++]);
}

}  // namespace mocaplink::ingest
