#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mocaplink/geodesy.hpp"
#include "support.hpp"

using namespace mocaplink;
using namespace mocaplink::geodesy;

namespace {

constexpr long double kPi = 3.141592653589793238462643383279502884L;

// Extended-precision evaluation of the forward closed form, used as oracle.
std::array<long double, 3> ecef_ld(long double lat_deg, long double lon_deg, long double h) {
    const long double a = 6378137.0L;
    const long double f = 1.0L / 298.257223563L;
    const long double e2 = f * (2.0L - f);
    const long double phi = lat_deg * kPi / 180.0L;
    const long double lam = lon_deg * kPi / 180.0L;
    const long double n = a / std::sqrt(1.0L - e2 * std::sin(phi) * std::sin(phi));
    return {(n + h) * std::cos(phi) * std::cos(lam), (n + h) * std::cos(phi) * std::sin(lam),
            (n * (1.0L - e2) + h) * std::sin(phi)};
}

// Heikkinen's closed-form inverse in extended precision: an algorithm
// unrelated to the library's latitude iteration.
std::array<long double, 3> geodetic_ld(long double x, long double y, long double z) {
    const long double a = 6378137.0L;
    const long double f = 1.0L / 298.257223563L;
    const long double b = a * (1.0L - f);
    const long double e2 = f * (2.0L - f);
    const long double ep2 = (a * a - b * b) / (b * b);
    const long double p = std::sqrt(x * x + y * y);
    const long double F = 54.0L * b * b * z * z;
    const long double G = p * p + (1.0L - e2) * z * z - e2 * (a * a - b * b);
    const long double c = e2 * e2 * F * p * p / (G * G * G);
    const long double s = std::cbrt(1.0L + c + std::sqrt(c * c + 2.0L * c));
    const long double k = s + 1.0L + 1.0L / s;
    const long double P = F / (3.0L * k * k * G * G);
    const long double Q = std::sqrt(1.0L + 2.0L * e2 * e2 * P);
    const long double r0 = -P * e2 * p / (1.0L + Q) +
                           std::sqrt(0.5L * a * a * (1.0L + 1.0L / Q) - P * (1.0L - e2) * z * z / (Q * (1.0L + Q)) -
                                     0.5L * P * p * p);
    const long double U = std::sqrt((p - e2 * r0) * (p - e2 * r0) + z * z);
    const long double V = std::sqrt((p - e2 * r0) * (p - e2 * r0) + (1.0L - e2) * z * z);
    const long double z0 = b * b * z / (a * V);
    const long double h = U * (1.0L - b * b / (a * V));
    const long double lat = std::atan((z + ep2 * z0) / p);
    const long double lon = std::atan2(y, x);
    return {lat * 180.0L / kPi, lon * 180.0L / kPi, h};
}

double lon_diff(double a, double b) {
    double d = std::fmod(a - b + 540.0, 360.0) - 180.0;
    return std::abs(d);
}

}  // namespace

TEST_CASE("frame mapping basics") {
    const FrameMapping m;
    CHECK(capture_to_ned(CapturePoint{{1, 2, 3}}, m).v == Vec3{1, -2, -3});
    CHECK(capture_to_ned(CapturePoint{{1, 2, 3}}, FrameMapping::identity()).v == Vec3{1, 2, 3});
    CHECK(ned_to_enu(NedPoint{{1, 2, 3}}).v == Vec3{2, 1, -3});
    CHECK(enu_to_ned(ned_to_enu(NedPoint{{1, 2, 3}})).v == Vec3{1, 2, 3});
    // ned_to_enu applied to its own output as a NED value is the identity
    const auto once = ned_to_enu(NedPoint{{4, 5, 6}});
    CHECK(ned_to_enu(NedPoint{once.v}).v == Vec3{4, 5, 6});
    // heights are negative in NED
    CHECK(ned_to_enu(NedPoint{{0, 0, -4}}).v[2] == 4.0);
}

TEST_CASE("frame mapping validation") {
    CHECK_THROWS_AS(FrameMapping::from_row_major({1, 0, 0, 0, 1, 0, 0, 0, -1}), GeodesyError);  // det -1
    CHECK_THROWS_AS(FrameMapping::from_row_major({1, 1, 0, 0, 1, 0, 0, 0, 1}), GeodesyError);
    CHECK_THROWS_AS(FrameMapping::from_row_major({2, 0, 0, 0, 1, 0, 0, 0, 1}), GeodesyError);
    CHECK_THROWS_AS(FrameMapping::from_row_major({1, 0, 0, 1, 0, 0, 0, 0, 1}), GeodesyError);
    CHECK_NOTHROW(FrameMapping::from_row_major({0, 1, 0, 1, 0, 0, 0, 0, -1}));
}

TEST_CASE("all proper signed permutations preserve norm and compose exactly") {
    std::vector<FrameMapping> valid;
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& perm : perms) {
        for (int signs = 0; signs < 8; ++signs) {
            IntMatrix3 rows{};
            for (int r = 0; r < 3; ++r) rows[r][perm[r]] = (signs >> r & 1) ? -1 : 1;
            if (determinant(rows) == 1) valid.push_back(FrameMapping::from_rows(rows));
        }
    }
    CHECK(valid.size() == 24);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-100, 100);
    for (const auto& m : valid) {
        for (int i = 0; i < 20; ++i) {
            const Vec3 p{u(rng), u(rng), u(rng)};
            const auto ned = capture_to_ned(CapturePoint{p}, m);
            CHECK(std::abs(norm(ned.v) - norm(p)) <= 1e-14 * norm(p));
            std::array<double, 3> a{std::abs(p[0]), std::abs(p[1]), std::abs(p[2])};
            std::array<double, 3> b{std::abs(ned.v[0]), std::abs(ned.v[1]), std::abs(ned.v[2])};
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
            // capture -> NED -> ENU equals the single composed integer matrix
            const IntMatrix3 composed = compose(ned_to_enu_matrix(), m.matrix());
            const auto enu = ned_to_enu(ned);
            for (int r = 0; r < 3; ++r) {
                const double expect = composed[r][0] * p[0] + composed[r][1] * p[1] + composed[r][2] * p[2];
                CHECK(enu.v[r] == expect);
            }
        }
        CHECK(determinant(compose(ned_to_enu_matrix(), m.matrix())) == 1);
    }
}

TEST_CASE("attitude remap keeps a level body level") {
    const FrameMapping m;
    // Identity capture attitude (body aligned with the capture axes) maps to
    // identity in NED: body forward/right/down coincide with N/E/D.
    const Quaternion q = capture_to_ned(Quaternion{1, 0, 0, 0}, m);
    CHECK(std::abs(std::abs(q.w) - 1.0) < 1e-15);
    // A yaw of +30 deg about capture +Z (up, counter-clockwise) is a yaw of
    // -30 deg about NED down.
    const Quaternion yaw = Quaternion::from_yaw(30.0 * M_PI / 180.0);
    const Quaternion n = capture_to_ned(yaw, m);
    const double sign = n.w < 0 ? -1.0 : 1.0;
    CHECK(sign * n.w == doctest::Approx(std::cos(15.0 * M_PI / 180.0)));
    CHECK(sign * n.z == doctest::Approx(-std::sin(15.0 * M_PI / 180.0)));
    CHECK(n.x == doctest::Approx(0.0));
    CHECK(n.y == doctest::Approx(0.0));
}

TEST_CASE("geodetic point validation") {
    CHECK_THROWS_AS(make_geodetic(90.0001, 0, 0), GeodesyError);
    CHECK_THROWS_AS(make_geodetic(NAN, 0, 0), GeodesyError);
    CHECK(make_geodetic(0, 190, 0).longitude_deg == doctest::Approx(-170));
    CHECK(make_geodetic(0, -180, 0).longitude_deg == 180.0);
    CHECK(make_geodetic(0, 540, 0).longitude_deg == 180.0);
}

TEST_CASE("forward transform special points") {
    const Vec3 eq = geodetic_to_ecef({0, 0, 0});
    CHECK(eq[0] == 6378137.0);
    CHECK(eq[1] == 0.0);
    CHECK(eq[2] == 0.0);
    const double b = 6378137.0 * (1.0 - 1.0 / 298.257223563);
    const Vec3 pole = geodetic_to_ecef({90, 0, 0});
    CHECK(std::abs(pole[0]) < 1e-9);
    CHECK(pole[2] == doctest::Approx(b).epsilon(1e-15));

    const auto ld = ecef_ld(45, 45, 100);
    const Vec3 p = geodetic_to_ecef({45, 45, 100});
    for (int i = 0; i < 3; ++i) CHECK(std::abs(p[i] - static_cast<double>(ld[i])) < 1e-8);
}

TEST_CASE("inverse transform special points") {
    const auto g = ecef_to_geodetic({6378137.0, 0, 0});
    CHECK(g.latitude_deg == 0.0);
    CHECK(g.longitude_deg == 0.0);
    CHECK(std::abs(g.altitude_m) < 1e-9);
    const double b = 6378137.0 * (1.0 - 1.0 / 298.257223563);
    const auto pole = ecef_to_geodetic({0, 0, b});
    CHECK(pole.latitude_deg == 90.0);
    CHECK(std::abs(pole.altitude_m) < 1e-9);
    const auto south = ecef_to_geodetic({0, 0, -b - 25.0});
    CHECK(south.latitude_deg == -90.0);
    CHECK(south.altitude_m == doctest::Approx(25.0));
    CHECK_THROWS_AS(ecef_to_geodetic({0, 0, 0}), GeodesyError);
}

TEST_CASE("agreement with PROJ reference values") {
    const auto oracle = testing::load_json("geodesy_oracle.json");
    for (const auto& p : oracle["points"]) {
        const GeodeticPoint g = make_geodetic(p["lat"], p["lon"], p["h"]);
        const Vec3 x = geodetic_to_ecef(g);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(x[i] - p["ecef"][i].get<double>()) < 1e-6);
        const auto back = ecef_to_geodetic({p["ecef"][0], p["ecef"][1], p["ecef"][2]});
        CHECK(std::abs(back.latitude_deg - g.latitude_deg) < 1e-9);
        if (std::abs(g.latitude_deg) < 89.99) CHECK(lon_diff(back.longitude_deg, g.longitude_deg) < 1e-9);
        CHECK(std::abs(back.altitude_m - g.altitude_m) < 1e-6);
    }
    for (const auto& l : oracle["local"]) {
        const GeodeticPoint o = make_geodetic(l["origin"][0], l["origin"][1], l["origin"][2]);
        const auto r = local_to_geodetic(o, EnuPoint{{l["enu"][0], l["enu"][1], l["enu"][2]}});
        CHECK(std::abs(r.latitude_deg - l["geodetic"][0].get<double>()) < 1e-9);
        CHECK(lon_diff(r.longitude_deg, l["geodetic"][1].get<double>()) < 1e-9);
        CHECK(std::abs(r.altitude_m - l["geodetic"][2].get<double>()) < 1e-6);
    }
}

TEST_CASE("inverse agrees with an extended-precision closed form") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lat(-89.9, 89.9), lon(-180, 180), h(-10000, 10000);
    for (int i = 0; i < 2000; ++i) {
        const auto ld = ecef_ld(lat(rng), lon(rng), h(rng));
        const Vec3 x{static_cast<double>(ld[0]), static_cast<double>(ld[1]), static_cast<double>(ld[2])};
        const auto ref = geodetic_ld(x[0], x[1], x[2]);
        const auto g = ecef_to_geodetic(x);
        CHECK(std::abs(g.latitude_deg - static_cast<double>(ref[0])) < 1e-10);
        CHECK(lon_diff(g.longitude_deg, static_cast<double>(ref[1])) < 1e-10);
        CHECK(std::abs(g.altitude_m - static_cast<double>(ref[2])) < 1e-7);
    }
}

TEST_CASE("local to geodetic") {
    const GeodeticPoint origin = make_geodetic(47.3977, 8.5456, 488.0);
    const auto same = local_to_geodetic(origin, EnuPoint{{0, 0, 0}});
    CHECK(same.latitude_deg == doctest::Approx(origin.latitude_deg).epsilon(1e-15));
    CHECK(std::abs(same.latitude_deg - origin.latitude_deg) <= 1e-13);
    CHECK(std::abs(same.longitude_deg - origin.longitude_deg) <= 1e-13);
    CHECK(std::abs(same.altitude_m - origin.altitude_m) <= 1e-8);

    const auto north = local_to_geodetic(origin, EnuPoint{{0, 100, 0}});
    CHECK(north.latitude_deg > origin.latitude_deg);
    CHECK(std::abs(north.longitude_deg - origin.longitude_deg) < 1e-12);

    // 100 m east at latitude 40: small-angle arc on the parallel circle.
    const GeodeticPoint o40 = make_geodetic(40.0, -105.0, 1600.0);
    const auto east = local_to_geodetic(o40, EnuPoint{{100, 0, 0}});
    const auto ecef_o = ecef_ld(40.0L, -105.0L, 1600.0L);
    const long double radius = std::sqrt(ecef_o[0] * ecef_o[0] + ecef_o[1] * ecef_o[1]);
    const double expected_dlon = static_cast<double>(std::atan(100.0L / radius) * 180.0L / kPi);
    CHECK(std::abs((east.longitude_deg - o40.longitude_deg) - expected_dlon) < 1e-9);
}

TEST_CASE("local to geodetic matches flat earth inside the arena") {
    const GeodeticPoint origin = make_geodetic(-33.9, 151.2, 40.0);
    const Vec3 o = geodetic_to_ecef(origin);
    const auto rot = ecef_to_enu_rotation(origin);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const Vec3 enu{u(rng), u(rng), u(rng) * 0.4};
        const auto g = local_to_geodetic(origin, EnuPoint{enu});
        // Map the result back through ECEF into the tangent plane.
        const Vec3 x = geodetic_to_ecef(g);
        const Vec3 d{x[0] - o[0], x[1] - o[1], x[2] - o[2]};
        for (int k = 0; k < 3; ++k) {
            const double back = rot[k][0] * d[0] + rot[k][1] * d[1] + rot[k][2] * d[2];
            CHECK(std::abs(back - enu[k]) < 1e-5);
        }
    }
}

TEST_CASE("velocity scaling and course over ground") {
    CHECK(velocity_capture_to_ned_cms({1.234, 0, 0}, FrameMapping::identity()) == NedVelocityCms{123, 0, 0});
    CHECK(velocity_capture_to_ned_cms({0, 0, 0}, FrameMapping()) == NedVelocityCms{0, 0, 0});
    CHECK(velocity_capture_to_ned_cms({0, 0, -0.005}, FrameMapping()) == NedVelocityCms{0, 0, 1});
    CHECK(velocity_capture_to_ned_cms({-0.015, 0, 0}, FrameMapping::identity()) == NedVelocityCms{-2, 0, 0});
    CHECK_THROWS_AS(velocity_capture_to_ned_cms({330, 0, 0}, FrameMapping()), GeodesyError);

    CHECK(course_over_ground(1, 0) == 0);
    CHECK(course_over_ground(0, 1) == 9000);
    CHECK(course_over_ground(-1, 0) == 18000);
    CHECK(course_over_ground(0, -1) == 27000);
    CHECK(course_over_ground(1, -1e-9) == 0);  // wraps 35999.99.. to 0, never 36000
    CHECK_FALSE(course_over_ground(0.03, 0.03).has_value());
    CHECK(course_over_ground(0.04, 0.04).has_value());
}
