#include "mocaplink/clock.hpp"

#include <algorithm>

namespace mocaplink {

SteadyClock::SteadyClock() : epoch_(std::chrono::steady_clock::now()) {}

double SteadyClock::now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

bool SteadyClock::sleep_until(double t, std::stop_token stop, WakeOrder) {
    const auto deadline =
        epoch_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(t));
    std::unique_lock lock(mutex_);
    cv_.wait_until(lock, stop, deadline, [] { return false; });
    return !stop.stop_requested();
}

double VirtualClock::now() const {
    std::lock_guard lock(mutex_);
    return now_;
}

bool VirtualClock::sleep_until(double t, std::stop_token stop, WakeOrder order) {
    std::unique_lock lock(mutex_);
    if (stop.stop_requested()) {
        return false;
    }
    if (t <= now_) {
        return true;
    }
    const Waiter me{t, static_cast<int>(order), next_seq_++};
    waiters_.insert(me);
    --running_;
    advance_locked();
    const bool released = cv_.wait(lock, stop, [&] { return released_.contains(me.seq); });
    if (released) {
        released_.erase(me.seq);
        return true;
    }
    // Stopped while waiting; a release may have raced the stop request.
    if (released_.erase(me.seq) == 0) {
        waiters_.erase(me);
        ++running_;
    }
    return false;
}

void VirtualClock::attach() {
    std::lock_guard lock(mutex_);
    ++running_;
}

void VirtualClock::detach() {
    std::lock_guard lock(mutex_);
    --running_;
    advance_locked();
}

void VirtualClock::advance_locked() {
    if (running_ > 0 || waiters_.empty()) {
        return;
    }
    const Waiter next = *waiters_.begin();
    waiters_.erase(waiters_.begin());
    now_ = std::max(now_, next.t);
    released_.insert(next.seq);
    ++running_;
    cv_.notify_all();
}

}  // namespace mocaplink
