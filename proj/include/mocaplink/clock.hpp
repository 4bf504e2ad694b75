#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <set>
#include <stop_token>

namespace mocaplink {

/// Tie-break order for tasks that wake at the same virtual instant. Ingest
/// runs first so a sender ticking at a capture instant sees that frame.
enum class WakeOrder : int { ingest = 0, sender = 1, control = 2 };

/// Service time source. `now()` is seconds since the clock's epoch (service
/// start). Periodic tasks only ever block through `sleep_until`, which lets
/// the virtual implementation drive them in simulated time.
class Clock {
public:
    virtual ~Clock() = default;

    virtual double now() const = 0;

    /// Returns false if `stop` was requested before the deadline.
    virtual bool sleep_until(double t, std::stop_token stop, WakeOrder order = WakeOrder::sender) = 0;

    /// Participant bookkeeping for the virtual clock; no-ops otherwise.
    /// attach() must be called by the spawning thread before the task starts.
    virtual void attach() {}
    virtual void detach() {}

    virtual bool is_virtual() const { return false; }
};

class SteadyClock final : public Clock {
public:
    SteadyClock();
    double now() const override;
    bool sleep_until(double t, std::stop_token stop, WakeOrder order = WakeOrder::sender) override;

private:
    std::chrono::steady_clock::time_point epoch_;
    std::mutex mutex_;
    std::condition_variable_any cv_;
};

/// Discrete-event clock. Time advances only when every attached participant
/// is blocked in sleep_until; waiters are then released one at a time in
/// (deadline, WakeOrder, arrival) order, so a run is fully sequential and
/// reproducible.
class VirtualClock final : public Clock {
public:
    explicit VirtualClock(double start = 0.0) : now_(start) {}

    double now() const override;
    bool sleep_until(double t, std::stop_token stop, WakeOrder order = WakeOrder::sender) override;
    void attach() override;
    void detach() override;
    bool is_virtual() const override { return true; }

private:
    struct Waiter {
        double t;
        int order;
        std::uint64_t seq;
        auto operator<=>(const Waiter&) const = default;
    };

    void advance_locked();

    mutable std::mutex mutex_;
    std::condition_variable_any cv_;
    double now_;
    int running_ = 0;
    std::uint64_t next_seq_ = 0;
    std::set<Waiter> waiters_;
    std::set<std::uint64_t> released_;
};

/// Detaches from the clock on scope exit; pairs with a Clock::attach()
/// performed by whoever spawned the task.
class ClockParticipant {
public:
    explicit ClockParticipant(Clock& clock) : clock_(clock) {}
    ~ClockParticipant() { clock_.detach(); }
    ClockParticipant(const ClockParticipant&) = delete;
    ClockParticipant& operator=(const ClockParticipant&) = delete;

private:
    Clock& clock_;
};

}  // namespace mocaplink
