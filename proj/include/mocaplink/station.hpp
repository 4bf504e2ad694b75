#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <thread>
#include <vector>

#include "mocaplink/clock.hpp"
#include "mocaplink/config.hpp"
#include "mocaplink/ingest.hpp"
#include "mocaplink/registry.hpp"
#include "mocaplink/replay.hpp"
#include "mocaplink/sender.hpp"

namespace mocaplink::station {

/// Builds the configured ingest source. Simulated and replayed streams are
/// paced on `clock`.
std::unique_ptr<ingest::SampleSource> make_source(const IngestConfig& config, Clock& clock);

struct SenderInfo {
    std::uint64_t id = 0;
    streaming::SenderConfig config;
    streaming::SenderStats stats;
};

struct IngestCounters {
    std::uint64_t applied = 0;
    std::uint64_t rejected = 0;
    std::uint64_t source_errors = 0;
};

/// The coordinator: owns the ingest task, the registry with one filter per
/// object, and the senders. Lifecycle calls may come from any thread and
/// are serialized internally.
class Station {
public:
    /// `source` overrides the configured ingest; `transports` defaults to UDP.
    Station(StationConfig config, Clock& clock, std::unique_ptr<ingest::SampleSource> source = nullptr,
            streaming::TransportFactory transports = streaming::udp_transport_factory());
    ~Station();
    Station(const Station&) = delete;
    Station& operator=(const Station&) = delete;

    /// Starts ingest and the configured initial senders.
    void start();
    /// Stops senders then ingest; returns the senders' final stats.
    std::vector<SenderInfo> stop();

    /// Blocks the caller as a clock participant until `duration` of service
    /// time has passed, ingest has ended (if `until_ingest_done`), or
    /// `interrupt` fires, then stops everything. Starts the station if needed.
    std::vector<SenderInfo> run(std::optional<double> duration, bool until_ingest_done, std::stop_token interrupt = {});

    std::uint64_t create_sender(const streaming::SenderConfig& config);
    streaming::SenderConfig update_sender(std::uint64_t id, const streaming::SenderPatch& patch);
    /// Final stats of the stopped sender.
    SenderInfo stop_sender(std::uint64_t id);
    std::vector<SenderInfo> senders() const;
    std::optional<SenderInfo> sender(std::uint64_t id) const;

    std::vector<ObjectView> snapshot_world() const;

    const ObjectRegistry& registry() const { return registry_; }
    const StationConfig& config() const { return config_; }
    const streaming::PacketContext& packet_context() const { return context_; }
    Clock& clock() const { return clock_; }
    std::string source_description() const;
    double uptime() const;
    bool ingest_finished() const { return ingest_done_.load(); }
    IngestCounters ingest_counters() const;

private:
    void ingest_loop(std::stop_token stop);

    StationConfig config_;
    Clock& clock_;
    std::unique_ptr<ingest::SampleSource> source_;
    std::string source_desc_;
    streaming::TransportFactory transports_;
    streaming::PacketContext context_;
    ObjectRegistry registry_;
    std::unique_ptr<ingest::ReplayWriter> writer_;

    mutable std::mutex lifecycle_mutex_;
    std::map<std::uint64_t, std::unique_ptr<streaming::Sender>> senders_;
    std::uint64_t next_id_ = 1;
    bool started_ = false;
    double started_at_ = 0.0;

    std::optional<double> capture_offset_;
    std::atomic<bool> ingest_done_{false};
    mutable std::mutex counters_mutex_;
    IngestCounters counters_;
    std::jthread ingest_thread_;
};

}  // namespace mocaplink::station
