#include "mocaplink/station.hpp"

#include <algorithm>
#include <chrono>

#include <spdlog/spdlog.h>

#include "mocaplink/simulator.hpp"

namespace mocaplink::station {

namespace {

// Consecutive source failures after which the ingest task gives up.
constexpr std::size_t kMaxConsecutiveSourceErrors = 1000;
// Polling step of Station::run.
constexpr double kRunStep = 0.05;

std::uint64_t wall_clock_usec() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());
}

}  // namespace

std::unique_ptr<ingest::SampleSource> make_source(const IngestConfig& config, Clock& clock) {
    switch (config.kind) {
    case SourceKind::simulate:
        return std::make_unique<ingest::SimulatorSource>(config.scenario, clock, config.duration_s);
    case SourceKind::replay:
        return std::make_unique<ingest::ReplaySource>(config.replay_path, config.pacing, clock);
    case SourceKind::udp:
        return std::make_unique<ingest::UdpIngestSource>(config.udp_host, config.udp_port);
    }
    throw StationError(StationErrc::invalid_config, "unknown ingest source");
}

Station::Station(StationConfig config, Clock& clock, std::unique_ptr<ingest::SampleSource> source,
                 streaming::TransportFactory transports)
    : config_(std::move(config)),
      clock_(clock),
      source_(source ? std::move(source) : make_source(config_.ingest, clock)),
      source_desc_(source_->describe()),
      transports_(std::move(transports)),
      registry_(config_.tracking, config_.tracking_overrides) {
    context_.origin = config_.origin;
    context_.mapping = config_.mapping;
    context_.gps = config_.gps;
    context_.epoch_offset_usec = config_.epoch_offset_usec.value_or(clock_.is_virtual() ? 0 : wall_clock_usec());
    for (const auto& name : config_.objects) registry_.declare(name);
    for (const auto& s : config_.senders) registry_.declare(s.object_name);
    if (config_.ingest.record_path) {
        writer_ = std::make_unique<ingest::ReplayWriter>(*config_.ingest.record_path);
    }
}

Station::~Station() { stop(); }

void Station::start() {
    // Hold the virtual clock still until every task is attached.
    clock_.attach();
    ClockParticipant guard(clock_);
    std::lock_guard lock(lifecycle_mutex_);
    if (started_) return;
    started_ = true;
    started_at_ = clock_.now();
    clock_.attach();
    ingest_thread_ = std::jthread([this](std::stop_token stop) { ingest_loop(stop); });
    for (const auto& cfg : config_.senders) {
        const std::uint64_t id = next_id_++;
        auto sender = std::make_unique<streaming::Sender>(id, cfg, registry_, context_, clock_, transports_);
        sender->start();
        senders_.emplace(id, std::move(sender));
    }
    spdlog::info("station: ingest from {}, {} sender(s)", source_desc_, senders_.size());
}

std::vector<SenderInfo> Station::stop() {
    std::vector<SenderInfo> out;
    {
        std::lock_guard lock(lifecycle_mutex_);
        for (auto& [id, sender] : senders_) {
            sender->stop();
            out.push_back({id, sender->config(), sender->snapshot_stats()});
        }
        senders_.clear();
    }
    if (ingest_thread_.joinable()) {
        ingest_thread_.request_stop();
        ingest_thread_.join();
    }
    return out;
}

std::vector<SenderInfo> Station::run(std::optional<double> duration, bool until_ingest_done,
                                     std::stop_token interrupt) {
    clock_.attach();
    ClockParticipant participant(clock_);
    start();
    const double t0 = clock_.now();
    while (!interrupt.stop_requested()) {
        if (until_ingest_done && ingest_done_.load()) break;
        const double now = clock_.now();
        double next = now + kRunStep;
        if (duration) {
            const double end = t0 + *duration;
            if (now >= end) break;
            next = std::min(next, end);
        }
        if (!clock_.sleep_until(next, interrupt, WakeOrder::control)) break;
    }
    return stop();
}

void Station::ingest_loop(std::stop_token stop) {
    ClockParticipant participant(clock_);
    std::size_t consecutive_errors = 0;
    while (!stop.stop_requested()) {
        std::optional<ingest::RigidBodySample> sample;
        try {
            sample = source_->next(stop);
            consecutive_errors = 0;
        } catch (const std::exception& e) {
            spdlog::warn("ingest: {}", e.what());
            {
                std::lock_guard lock(counters_mutex_);
                ++counters_.source_errors;
            }
            if (++consecutive_errors >= kMaxConsecutiveSourceErrors) {
                spdlog::error("ingest: giving up after {} consecutive errors", consecutive_errors);
                break;
            }
            continue;
        }
        if (!sample) break;

        // Capture timestamps are relative to the stream's own epoch; pin
        // that epoch to the service clock at the first sample.
        if (!capture_offset_) capture_offset_ = clock_.now() - sample->capture_time;
        const double service_time = sample->capture_time + *capture_offset_;
        const ApplyResult result = registry_.apply(*sample, service_time);
        {
            std::lock_guard lock(counters_mutex_);
            if (result == ApplyResult::rejected) {
                ++counters_.rejected;
            } else {
                ++counters_.applied;
            }
        }
        if (writer_) {
            try {
                writer_->write(*sample);
            } catch (const std::exception& e) {
                spdlog::warn("ingest: record writer: {}", e.what());
            }
        }
    }
    if (writer_) writer_->flush();
    ingest_done_.store(true);
}

std::uint64_t Station::create_sender(const streaming::SenderConfig& config) {
    try {
        config.validate();
    } catch (const streaming::SenderError& e) {
        throw StationError(StationErrc::invalid_config, e.what());
    }
    if (!registry_.contains(config.object_name)) {
        throw StationError(StationErrc::unknown_object, "no registered object named '" + config.object_name + "'");
    }
    std::lock_guard lock(lifecycle_mutex_);
    const std::uint64_t id = next_id_++;
    auto sender = std::make_unique<streaming::Sender>(id, config, registry_, context_, clock_, transports_);
    if (started_) sender->start();
    senders_.emplace(id, std::move(sender));
    spdlog::info("station: sender {} for {} -> {}:{} at {} Hz", id, config.object_name, config.endpoint.host,
                 config.endpoint.port, config.rate_hz);
    return id;
}

streaming::SenderConfig Station::update_sender(std::uint64_t id, const streaming::SenderPatch& patch) {
    std::lock_guard lock(lifecycle_mutex_);
    const auto it = senders_.find(id);
    if (it == senders_.end()) throw StationError(StationErrc::unknown_sender, "no sender " + std::to_string(id));
    try {
        return it->second->update(patch);
    } catch (const streaming::SenderError& e) {
        throw StationError(StationErrc::invalid_config, e.what());
    }
}

SenderInfo Station::stop_sender(std::uint64_t id) {
    std::unique_ptr<streaming::Sender> sender;
    {
        std::lock_guard lock(lifecycle_mutex_);
        const auto it = senders_.find(id);
        if (it == senders_.end()) throw StationError(StationErrc::unknown_sender, "no sender " + std::to_string(id));
        sender = std::move(it->second);
        senders_.erase(it);
        sender->stop();
    }
    return {id, sender->config(), sender->snapshot_stats()};
}

std::vector<SenderInfo> Station::senders() const {
    std::lock_guard lock(lifecycle_mutex_);
    std::vector<SenderInfo> out;
    for (const auto& [id, sender] : senders_) out.push_back({id, sender->config(), sender->snapshot_stats()});
    return out;
}

std::optional<SenderInfo> Station::sender(std::uint64_t id) const {
    std::lock_guard lock(lifecycle_mutex_);
    const auto it = senders_.find(id);
    if (it == senders_.end()) return std::nullopt;
    return SenderInfo{id, it->second->config(), it->second->snapshot_stats()};
}

std::vector<ObjectView> Station::snapshot_world() const { return registry_.snapshot(clock_.now()); }

std::string Station::source_description() const { return source_desc_; }

double Station::uptime() const {
    std::lock_guard lock(lifecycle_mutex_);
    return started_ ? clock_.now() - started_at_ : 0.0;
}

IngestCounters Station::ingest_counters() const {
    std::lock_guard lock(counters_mutex_);
    return counters_;
}

}  // namespace mocaplink::station
