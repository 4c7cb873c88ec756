#pragma once

#include <chrono>
#include <cstdint>

namespace ttc {

/// Monotonic nanosecond clock. All latency timestamps come from an injected
/// instance so tests can substitute a fake; wall-calendar time never enters
/// duration math.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ns() const = 0;
};

class SteadyClock final : public Clock {
public:
    std::int64_t now_ns() const override {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }
};

/// Process-wide default clock for call sites that do not inject one.
const Clock &steady_clock_instance();

} // namespace ttc
