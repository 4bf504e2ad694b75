#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "mocaplink/types.hpp"

namespace mocaplink::geodesy {

enum class GeodesyErrc { invalid_mapping, invalid_point, non_convergence, overflow };

class GeodesyError : public std::runtime_error {
public:
    GeodesyError(GeodesyErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    GeodesyErrc code() const noexcept { return code_; }

private:
    GeodesyErrc code_;
};

// ---------------------------------------------------------------------------
// Frame-tagged points. Arithmetic is only defined within one frame, so mixing
// capture, NED and ENU coordinates does not compile.

enum class Frame { capture, ned, enu };

template <Frame F>
struct LocalPoint {
    Vec3 v{};

    friend LocalPoint operator+(const LocalPoint& a, const LocalPoint& b) {
        return {{a.v[0] + b.v[0], a.v[1] + b.v[1], a.v[2] + b.v[2]}};
    }
    friend LocalPoint operator-(const LocalPoint& a, const LocalPoint& b) {
        return {{a.v[0] - b.v[0], a.v[1] - b.v[1], a.v[2] - b.v[2]}};
    }
    friend bool operator==(const LocalPoint&, const LocalPoint&) = default;
};

using CapturePoint = LocalPoint<Frame::capture>;
using NedPoint = LocalPoint<Frame::ned>;
using EnuPoint = LocalPoint<Frame::enu>;

using IntMatrix3 = std::array<std::array<int, 3>, 3>;

/// Signed permutation taking capture-frame axes onto NED axes. Always a
/// proper rotation (det = +1).
class FrameMapping {
public:
    /// Capture X-forward, Y-left, Z-up: N = +X, E = -Y, D = -Z.
    FrameMapping();

    /// Throws GeodesyError(invalid_mapping) unless `rows` is a signed
    /// permutation with determinant +1.
    static FrameMapping from_rows(const IntMatrix3& rows);
    static FrameMapping from_row_major(const std::array<int, 9>& values);
    static FrameMapping identity();

    const IntMatrix3& matrix() const { return m_; }
    Vec3 apply(const Vec3& v) const;
    Vec3 apply_transpose(const Vec3& v) const;

    /// Quaternion of the rotation M.
    Quaternion rotation() const;

    friend bool operator==(const FrameMapping&, const FrameMapping&) = default;

private:
    explicit FrameMapping(const IntMatrix3& m) : m_(m) {}
    IntMatrix3 m_;
};

IntMatrix3 compose(const IntMatrix3& outer, const IntMatrix3& inner);
int determinant(const IntMatrix3& m);

/// The fixed NED -> ENU signed permutation.
const IntMatrix3& ned_to_enu_matrix();

NedPoint capture_to_ned(const CapturePoint& p, const FrameMapping& mapping);
EnuPoint ned_to_enu(const NedPoint& p);
NedPoint enu_to_ned(const EnuPoint& p);

/// World-side and body-side remap of a capture-frame attitude:
/// R_ned = M * R_capture * M^T.
Quaternion capture_to_ned(const Quaternion& q, const FrameMapping& mapping);

// ---------------------------------------------------------------------------
// Ellipsoidal Earth

struct EllipsoidParams {
    double a;  ///< semi-major axis, m
    double f;  ///< flattening

    double e2() const { return f * (2.0 - f); }
    double b() const { return a * (1.0 - f); }
};

inline constexpr EllipsoidParams kWgs84{6378137.0, 1.0 / 298.257223563};

struct GeodeticPoint {
    double latitude_deg = 0.0;   ///< [-90, 90]
    double longitude_deg = 0.0;  ///< (-180, 180]
    double altitude_m = 0.0;     ///< above the ellipsoid
};

/// Throws GeodesyError(invalid_point) if latitude is outside [-90, 90] or any
/// field is not finite. Longitude is normalized into (-180, 180].
GeodeticPoint make_geodetic(double latitude_deg, double longitude_deg, double altitude_m);
double normalize_longitude(double longitude_deg);

Vec3 geodetic_to_ecef(const GeodeticPoint& g, const EllipsoidParams& e = kWgs84);

inline constexpr int kMaxLatitudeIterations = 10;
inline constexpr double kLatitudeTolerance = 1e-12;  ///< rad

GeodeticPoint ecef_to_geodetic(const Vec3& xyz, const EllipsoidParams& e = kWgs84);

/// Rows are the east, north and up unit vectors at `origin`, in ECEF.
std::array<Vec3, 3> ecef_to_enu_rotation(const GeodeticPoint& origin);

GeodeticPoint local_to_geodetic(const GeodeticPoint& origin, const EnuPoint& p, const EllipsoidParams& e = kWgs84);

// ---------------------------------------------------------------------------
// Velocity helpers for HIL_GPS

struct NedVelocityCms {
    std::int16_t vn;
    std::int16_t ve;
    std::int16_t vd;
    friend bool operator==(const NedVelocityCms&, const NedVelocityCms&) = default;
};

/// Rotates a capture-frame velocity into NED and scales to integer cm/s,
/// rounding half away from zero. Throws GeodesyError(overflow) if a
/// component does not fit in int16.
NedVelocityCms velocity_capture_to_ned_cms(const Vec3& v_mps, const FrameMapping& mapping);

inline constexpr double kDefaultCogMinSpeed = 0.05;  ///< m/s

/// Course over ground in centidegrees [0, 35999], or nullopt when the
/// horizontal speed is below `min_speed`.
std::optional<std::uint16_t> course_over_ground(double vn, double ve, double min_speed = kDefaultCogMinSpeed);

}  // namespace mocaplink::geodesy
