#include "mocaplink/geodesy.hpp"

#include <cmath>
#include <numbers>

namespace mocaplink::geodesy {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

FrameMapping::FrameMapping() : m_{{{1, 0, 0}, {0, -1, 0}, {0, 0, -1}}} {}

FrameMapping FrameMapping::identity() { return FrameMapping(IntMatrix3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}); }

FrameMapping FrameMapping::from_rows(const IntMatrix3& rows) {
    std::array<int, 3> column_hits{};
    for (const auto& row : rows) {
        int nonzero = 0;
        for (int c = 0; c < 3; ++c) {
            if (row[c] == 0) continue;
            if (row[c] != 1 && row[c] != -1) {
                throw GeodesyError(GeodesyErrc::invalid_mapping, "frame_mapping entries must be -1, 0 or 1");
            }
            ++nonzero;
            ++column_hits[c];
        }
        if (nonzero != 1) {
            throw GeodesyError(GeodesyErrc::invalid_mapping, "frame_mapping row must have exactly one nonzero entry");
        }
    }
    for (int hits : column_hits) {
        if (hits != 1) {
            throw GeodesyError(GeodesyErrc::invalid_mapping,
                               "frame_mapping column must have exactly one nonzero entry");
        }
    }
    if (determinant(rows) != 1) {
        throw GeodesyError(GeodesyErrc::invalid_mapping, "frame_mapping must be a proper rotation (det = +1)");
    }
    return FrameMapping(rows);
}

FrameMapping FrameMapping::from_row_major(const std::array<int, 9>& values) {
    IntMatrix3 rows;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rows[r][c] = values[3 * r + c];
    return from_rows(rows);
}

Vec3 FrameMapping::apply(const Vec3& v) const {
    Vec3 out{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out[r] += m_[r][c] * v[c];
    return out;
}

Vec3 FrameMapping::apply_transpose(const Vec3& v) const {
    Vec3 out{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out[c] += m_[r][c] * v[r];
    return out;
}

Quaternion FrameMapping::rotation() const {
    // Shepperd: pick the largest of the four squared components.
    const double m00 = m_[0][0], m11 = m_[1][1], m22 = m_[2][2];
    const double trace = m00 + m11 + m22;
    Quaternion q;
    if (trace > 0.0) {
        const double s = std::sqrt(trace + 1.0) * 2.0;
        q = {0.25 * s, (m_[2][1] - m_[1][2]) / s, (m_[0][2] - m_[2][0]) / s, (m_[1][0] - m_[0][1]) / s};
    } else if (m00 >= m11 && m00 >= m22) {
        const double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        q = {(m_[2][1] - m_[1][2]) / s, 0.25 * s, (m_[0][1] + m_[1][0]) / s, (m_[0][2] + m_[2][0]) / s};
    } else if (m11 >= m22) {
        const double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        q = {(m_[0][2] - m_[2][0]) / s, (m_[0][1] + m_[1][0]) / s, 0.25 * s, (m_[1][2] + m_[2][1]) / s};
    } else {
        const double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
        q = {(m_[1][0] - m_[0][1]) / s, (m_[0][2] + m_[2][0]) / s, (m_[1][2] + m_[2][1]) / s, 0.25 * s};
    }
    return q.normalized();
}

IntMatrix3 compose(const IntMatrix3& outer, const IntMatrix3& inner) {
    IntMatrix3 out{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 3; ++k) out[r][c] += outer[r][k] * inner[k][c];
    return out;
}

int determinant(const IntMatrix3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

const IntMatrix3& ned_to_enu_matrix() {
    static const IntMatrix3 m{{{0, 1, 0}, {1, 0, 0}, {0, 0, -1}}};
    return m;
}

NedPoint capture_to_ned(const CapturePoint& p, const FrameMapping& mapping) { return {mapping.apply(p.v)}; }

EnuPoint ned_to_enu(const NedPoint& p) { return {{p.v[1], p.v[0], -p.v[2]}}; }

NedPoint enu_to_ned(const EnuPoint& p) { return {{p.v[1], p.v[0], -p.v[2]}}; }

Quaternion capture_to_ned(const Quaternion& q, const FrameMapping& mapping) {
    const Quaternion m = mapping.rotation();
    return (m * q * m.conjugate()).normalized();
}

// ---------------------------------------------------------------------------

double normalize_longitude(double longitude_deg) {
    double lon = std::fmod(longitude_deg, 360.0);
    if (lon > 180.0) lon -= 360.0;
    if (lon <= -180.0) lon += 360.0;
    return lon;
}

GeodeticPoint make_geodetic(double latitude_deg, double longitude_deg, double altitude_m) {
    if (!std::isfinite(latitude_deg) || !std::isfinite(longitude_deg) || !std::isfinite(altitude_m)) {
        throw GeodesyError(GeodesyErrc::invalid_point, "geodetic coordinates must be finite");
    }
    if (latitude_deg < -90.0 || latitude_deg > 90.0) {
        throw GeodesyError(GeodesyErrc::invalid_point, "latitude must be within [-90, 90] degrees");
    }
    return {latitude_deg, normalize_longitude(longitude_deg), altitude_m};
}

Vec3 geodetic_to_ecef(const GeodeticPoint& g, const EllipsoidParams& e) {
    const double phi = g.latitude_deg * kDeg;
    const double lam = g.longitude_deg * kDeg;
    const double sphi = std::sin(phi), cphi = std::cos(phi);
    const double e2 = e.e2();
    const double n = e.a / std::sqrt(1.0 - e2 * sphi * sphi);
    const double h = g.altitude_m;
    return {(n + h) * cphi * std::cos(lam), (n + h) * cphi * std::sin(lam), (n * (1.0 - e2) + h) * sphi};
}

GeodeticPoint ecef_to_geodetic(const Vec3& xyz, const EllipsoidParams& e) {
    const double x = xyz[0], y = xyz[1], z = xyz[2];
    const double p = std::hypot(x, y);
    if (p == 0.0 && z == 0.0) {
        throw GeodesyError(GeodesyErrc::invalid_point, "ECEF origin has no geodetic equivalent");
    }
    const double e2 = e.e2();
    // Bowring's starting point, then the fixed-point form
    // tan(phi) = (z + e^2 N sin(phi)) / p, which stays well conditioned at the
    // poles where p -> 0.
    double phi = std::atan2(z, p * (1.0 - e2));
    bool converged = false;
    for (int i = 0; i < kMaxLatitudeIterations; ++i) {
        const double s = std::sin(phi);
        const double n = e.a / std::sqrt(1.0 - e2 * s * s);
        const double next = std::atan2(z + e2 * n * s, p);
        const double delta = std::abs(next - phi);
        phi = next;
        if (delta < kLatitudeTolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw GeodesyError(GeodesyErrc::non_convergence, "latitude iteration did not converge");
    }
    const double s = std::sin(phi), c = std::cos(phi);
    const double h = p * c + z * s - e.a * std::sqrt(1.0 - e2 * s * s);
    const double lon = p == 0.0 ? 0.0 : std::atan2(y, x) / kDeg;
    return {phi / kDeg, normalize_longitude(lon), h};
}

std::array<Vec3, 3> ecef_to_enu_rotation(const GeodeticPoint& origin) {
    const double phi = origin.latitude_deg * kDeg;
    const double lam = origin.longitude_deg * kDeg;
    const double sphi = std::sin(phi), cphi = std::cos(phi);
    const double slam = std::sin(lam), clam = std::cos(lam);
    return {{{-slam, clam, 0.0}, {-sphi * clam, -sphi * slam, cphi}, {cphi * clam, cphi * slam, sphi}}};
}

GeodeticPoint local_to_geodetic(const GeodeticPoint& origin, const EnuPoint& p, const EllipsoidParams& e) {
    const Vec3 base = geodetic_to_ecef(origin, e);
    const auto r = ecef_to_enu_rotation(origin);
    Vec3 xyz = base;
    for (int axis = 0; axis < 3; ++axis)
        for (int k = 0; k < 3; ++k) xyz[k] += r[axis][k] * p.v[axis];
    // Differential form: the inverse's own error at the origin cancels, and a
    // zero offset gives back the origin bit for bit.
    const GeodeticPoint here = ecef_to_geodetic(xyz, e);
    const GeodeticPoint there = ecef_to_geodetic(base, e);
    double dlon = here.longitude_deg - there.longitude_deg;
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon < -180.0) dlon += 360.0;
    GeodeticPoint out;
    out.latitude_deg = origin.latitude_deg + (here.latitude_deg - there.latitude_deg);
    out.longitude_deg = normalize_longitude(origin.longitude_deg + dlon);
    out.altitude_m = origin.altitude_m + (here.altitude_m - there.altitude_m);
    return out;
}

// ---------------------------------------------------------------------------

NedVelocityCms velocity_capture_to_ned_cms(const Vec3& v_mps, const FrameMapping& mapping) {
    const Vec3 ned = mapping.apply(v_mps);
    std::array<std::int16_t, 3> out{};
    for (int i = 0; i < 3; ++i) {
        const double cms = std::round(ned[i] * 100.0);
        if (!(cms >= -32768.0 && cms <= 32767.0)) {
            throw GeodesyError(GeodesyErrc::overflow, "velocity does not fit int16 cm/s");
        }
        out[i] = static_cast<std::int16_t>(cms);
    }
    return {out[0], out[1], out[2]};
}

std::optional<std::uint16_t> course_over_ground(double vn, double ve, double min_speed) {
    if (std::hypot(vn, ve) < min_speed) {
        return std::nullopt;
    }
    double deg = std::atan2(ve, vn) / kDeg;
    if (deg < 0.0) deg += 360.0;
    auto cdeg = static_cast<long>(std::lround(deg * 100.0));
    if (cdeg >= 36000) cdeg -= 36000;
    return static_cast<std::uint16_t>(cdeg);
}

}  // namespace mocaplink::geodesy
