#include "mocaplink/registry.hpp"

#include <algorithm>
#include <mutex>
#include <system_error>

#include <spdlog/spdlog.h>

namespace mocaplink::station {

std::string_view to_string(StationErrc code) {
    switch (code) {
    case StationErrc::insufficient_data: return "InsufficientData";
    case StationErrc::unknown_object: return "UnknownObject";
    case StationErrc::unknown_sender: return "UnknownSender";
    case StationErrc::invalid_config: return "InvalidConfig";
    }
    return "Unknown";
}

void FrameRing::push(std::uint64_t frame_number) {
    buf_[head_] = frame_number;
    head_ = (head_ + 1) % kFrameWindow;
    count_ = std::min(count_ + 1, kFrameWindow);
}

std::uint64_t FrameRing::newest() const { return buf_[(head_ + kFrameWindow - 1) % kFrameWindow]; }

std::vector<std::uint64_t> FrameRing::frames() const {
    std::vector<std::uint64_t> out;
    out.reserve(count_);
    const std::size_t start = (head_ + kFrameWindow - count_) % kFrameWindow;
    for (std::size_t i = 0; i < count_; ++i) out.push_back(buf_[(start + i) % kFrameWindow]);
    return out;
}

double compute_frame_drop_rate(std::span<const std::uint64_t> frames) {
    if (frames.size() < 2) {
        throw StationError(StationErrc::insufficient_data, "need at least two frames for a drop rate");
    }
    const double expected = static_cast<double>(frames.back() - frames.front() + 1);
    return (expected - static_cast<double>(frames.size())) / expected;
}

WriterPreferringMutex::WriterPreferringMutex() {
    pthread_rwlockattr_t attr;
    pthread_rwlockattr_init(&attr);
    pthread_rwlockattr_setkind_np(&attr, PTHREAD_RWLOCK_PREFER_WRITER_NONRECURSIVE_NP);
    const int rc = pthread_rwlock_init(&lock_, &attr);
    pthread_rwlockattr_destroy(&attr);
    if (rc != 0) throw std::system_error(rc, std::generic_category(), "pthread_rwlock_init");
}

WriterPreferringMutex::~WriterPreferringMutex() { pthread_rwlock_destroy(&lock_); }

void WriterPreferringMutex::lock() {
    if (const int rc = pthread_rwlock_wrlock(&lock_); rc != 0) {
        throw std::system_error(rc, std::generic_category(), "pthread_rwlock_wrlock");
    }
}

void WriterPreferringMutex::unlock() { pthread_rwlock_unlock(&lock_); }

bool WriterPreferringMutex::try_lock() { return pthread_rwlock_trywrlock(&lock_) == 0; }

void WriterPreferringMutex::lock_shared() {
    if (const int rc = pthread_rwlock_rdlock(&lock_); rc != 0) {
        throw std::system_error(rc, std::generic_category(), "pthread_rwlock_rdlock");
    }
}

void WriterPreferringMutex::unlock_shared() { pthread_rwlock_unlock(&lock_); }

bool WriterPreferringMutex::try_lock_shared() { return pthread_rwlock_tryrdlock(&lock_) == 0; }

// ---------------------------------------------------------------------------

ObjectRegistry::ObjectRegistry(tracking::FilterParams defaults, std::map<std::string, tracking::FilterParams> overrides)
    : defaults_(defaults), overrides_(std::move(overrides)) {
    defaults_.validate();
    for (const auto& [name, p] : overrides_) p.validate();
}

tracking::FilterParams ObjectRegistry::params_for(const std::string& name) const {
    const auto it = overrides_.find(name);
    return it == overrides_.end() ? defaults_ : it->second;
}

void ObjectRegistry::declare(const std::string& name) {
    std::unique_lock lock(mutex_);
    entries_.try_emplace(name);
}

bool ObjectRegistry::contains(const std::string& name) const {
    std::shared_lock lock(mutex_);
    return entries_.contains(name);
}

std::vector<std::string> ObjectRegistry::names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

ApplyResult ObjectRegistry::apply(const ingest::RigidBodySample& sample, double service_time) {
    const tracking::FilterParams params = params_for(sample.object_name);
    ingest::RigidBodySample aligned = sample;
    aligned.capture_time = service_time;

    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(sample.object_name);
    Entry& e = it->second;
    if (!e.frames.empty() && sample.frame_number <= e.frames.newest()) {
        spdlog::warn("registry: {} frame {} not newer than {}; dropped", sample.object_name, sample.frame_number,
                     e.frames.newest());
        return ApplyResult::rejected;
    }

    // Compute the new filter state first so a failure leaves the entry intact.
    std::optional<tracking::TrackState> next = e.track;
    ApplyResult result;
    if (!e.track) {
        if (sample.occluded) {
            result = ApplyResult::awaiting_visible;
        } else {
            next = tracking::kf_init(aligned, params);
            result = ApplyResult::initialized;
        }
    } else {
        try {
            next = tracking::kf_update(*e.track, aligned, params);
        } catch (const tracking::TrackingError& err) {
            spdlog::warn("registry: {} frame {}: {}", sample.object_name, sample.frame_number, err.what());
            return ApplyResult::rejected;
        }
        result = sample.occluded ? ApplyResult::predicted : ApplyResult::updated;
    }

    e.track = std::move(next);
    e.latest = sample;
    e.frames.push(sample.frame_number);
    if (e.samples == 0) e.first_seen = service_time;
    e.last_seen = service_time;
    ++e.samples;
    e.arrivals.push_back(service_time);
    while (!e.arrivals.empty() && e.arrivals.front() <= service_time - 1.0) e.arrivals.pop_front();
    return result;
}

std::optional<streaming::TrackSnapshot> ObjectRegistry::track(const std::string& name) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(name);
    if (it == entries_.end() || !it->second.track) return std::nullopt;
    return streaming::TrackSnapshot{*it->second.track, params_for(name)};
}

ObjectView ObjectRegistry::make_view(const std::string& name, const Entry& e, double now) const {
    ObjectView v;
    v.name = name;
    v.latest = e.latest;
    v.track = e.track;
    if (e.frames.size() >= 2) v.drop_rate = compute_frame_drop_rate(e.frames.frames());
    v.capture_rate_hz = static_cast<double>(
        std::count_if(e.arrivals.begin(), e.arrivals.end(), [&](double t) { return t > now - 1.0 && t <= now; }));
    v.first_seen = e.first_seen;
    v.last_seen = e.last_seen;
    v.samples = e.samples;
    return v;
}

std::optional<ObjectView> ObjectRegistry::view(const std::string& name, double now) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return make_view(name, it->second, now);
}

std::vector<ObjectView> ObjectRegistry::snapshot(double now) const {
    std::shared_lock lock(mutex_);
    std::vector<ObjectView> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(make_view(name, e, now));
    return out;
}

}  // namespace mocaplink::station
