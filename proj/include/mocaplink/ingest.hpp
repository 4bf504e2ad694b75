#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "mocaplink/types.hpp"

namespace mocaplink::ingest {

/// One solved rigid-body pose from the capture system, in capture-native
/// units (millimeters).
struct RigidBodySample {
    std::uint64_t frame_number = 0;
    double capture_time = 0.0;  ///< seconds since stream epoch
    std::string object_name;
    Vec3 position_mm{};
    Quaternion orientation{};
    bool occluded = false;

    friend bool operator==(const RigidBodySample&, const RigidBodySample&) = default;
};

enum class IngestErrc { malformed_record, non_unit_quaternion, negative_time, corrupt_log, clock_skew, io_error };

std::string_view to_string(IngestErrc code);

class IngestError : public std::runtime_error {
public:
    IngestError(IngestErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    IngestErrc code() const noexcept { return code_; }

private:
    IngestErrc code_;
};

inline constexpr std::string_view kRecordMagic = "MOCAP1";
inline constexpr std::string_view kLogHeader = "#MOCAPLOG v1";
inline constexpr double kQuaternionTolerance = 1e-3;

/// Parses one `MOCAP1 ...` record. Quaternions within 1e-3 of unit norm are
/// normalized; others are rejected.
RigidBodySample parse_ingest_record(std::string_view record);

/// Formats a sample so that parse_ingest_record returns it bit-for-bit.
std::string format_ingest_record(const RigidBodySample& sample);

/// Splits a datagram into records; blank lines are skipped.
std::vector<std::string_view> split_records(std::string_view datagram);

/// A producer of samples. next() blocks until a sample is available, the
/// stream ends (nullopt) or `stop` is requested (nullopt).
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::optional<RigidBodySample> next(std::stop_token stop) = 0;
    virtual std::string describe() const = 0;
};

/// Live ingest: listens for MOCAP1 datagrams on a UDP port.
class UdpIngestSource final : public SampleSource {
public:
    UdpIngestSource(const std::string& bind_host, std::uint16_t port);
    ~UdpIngestSource() override;

    std::optional<RigidBodySample> next(std::stop_token stop) override;
    std::string describe() const override;
    std::uint16_t port() const { return port_; }

    std::uint64_t rejected_records() const { return rejected_; }

private:
    int fd_ = -1;
    std::uint16_t port_;
    std::string host_;
    std::vector<RigidBodySample> pending_;
    std::size_t pending_pos_ = 0;
    std::uint64_t rejected_ = 0;
};

}  // namespace mocaplink::ingest
