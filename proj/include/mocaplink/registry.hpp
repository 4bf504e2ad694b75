#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <pthread.h>

#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mocaplink/ingest.hpp"
#include "mocaplink/sender.hpp"
#include "mocaplink/tracking.hpp"

namespace mocaplink::station {

enum class StationErrc { insufficient_data, unknown_object, unknown_sender, invalid_config };

std::string_view to_string(StationErrc code);

class StationError : public std::runtime_error {
public:
    StationError(StationErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    StationErrc code() const noexcept { return code_; }

private:
    StationErrc code_;
};

inline constexpr std::size_t kFrameWindow = 256;

/// The newest kFrameWindow frame numbers of one object.
class FrameRing {
public:
    void push(std::uint64_t frame_number);
    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    std::uint64_t newest() const;
    /// Oldest to newest.
    std::vector<std::uint64_t> frames() const;

private:
    std::array<std::uint64_t, kFrameWindow> buf_{};
    std::size_t head_ = 0;  // next write slot
    std::size_t count_ = 0;
};

/// (expected - received) / expected over a window of strictly increasing
/// frame numbers, expected = newest - oldest + 1. Throws
/// StationError(insufficient_data) for fewer than two frames.
double compute_frame_drop_rate(std::span<const std::uint64_t> frames);

/// Reader/writer lock that lets a waiting writer in ahead of new readers,
/// so busy readers cannot starve the ingest loop. Satisfies SharedMutex.
class WriterPreferringMutex {
public:
    WriterPreferringMutex();
    ~WriterPreferringMutex();
    WriterPreferringMutex(const WriterPreferringMutex&) = delete;
    WriterPreferringMutex& operator=(const WriterPreferringMutex&) = delete;

    void lock();
    void unlock();
    bool try_lock();
    void lock_shared();
    void unlock_shared();
    bool try_lock_shared();

private:
    pthread_rwlock_t lock_;
};

struct ObjectView {
    std::string name;
    std::optional<ingest::RigidBodySample> latest;
    std::optional<tracking::TrackState> track;
    std::optional<double> drop_rate;
    double capture_rate_hz = 0.0;
    double first_seen = 0.0;  ///< service time
    double last_seen = 0.0;
    std::uint64_t samples = 0;
};

enum class ApplyResult { initialized, updated, predicted, awaiting_visible, rejected };

/// Per-object latest sample, filter and drop window. One writer (the ingest
/// loop) and any number of readers; every read is a copy taken under a
/// shared lock, so readers never see a half-applied sample.
class ObjectRegistry final : public streaming::TrackSource {
public:
    explicit ObjectRegistry(tracking::FilterParams defaults = {},
                            std::map<std::string, tracking::FilterParams> overrides = {});

    /// Registers a name before any sample arrives.
    void declare(const std::string& name);
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;

    /// Applies one sample whose capture_time is already on the service clock.
    ApplyResult apply(const ingest::RigidBodySample& sample, double service_time);

    std::optional<streaming::TrackSnapshot> track(const std::string& name) const override;
    std::optional<ObjectView> view(const std::string& name, double now) const;
    std::vector<ObjectView> snapshot(double now) const;

    tracking::FilterParams params_for(const std::string& name) const;

private:
    struct Entry {
        std::optional<ingest::RigidBodySample> latest;
        std::optional<tracking::TrackState> track;
        FrameRing frames;
        std::deque<double> arrivals;  // service times within the last second
        double first_seen = 0.0;
        double last_seen = 0.0;
        std::uint64_t samples = 0;
    };

    ObjectView make_view(const std::string& name, const Entry& e, double now) const;

    tracking::FilterParams defaults_;
    std::map<std::string, tracking::FilterParams> overrides_;
    mutable WriterPreferringMutex mutex_;
    std::map<std::string, Entry> entries_;
};

}  // namespace mocaplink::station
