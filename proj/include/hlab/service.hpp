#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "hlab/config.hpp"
#include "hlab/lab.hpp"

namespace hlab {

struct ServiceOptions {
    LabConfig config;
    DeviceSpec device;                    ///< network pointers by default
    std::optional<std::string> record;    ///< session log path; later segments get .1, .2, ... inserted
};

struct ServiceStats {
    std::uint64_t ticks = 0;
    std::uint64_t snapshots_published = 0;
    std::uint64_t snapshots_dropped = 0;
    std::uint64_t overruns = 0;
    std::uint64_t clients = 0;
    std::uint64_t segments = 0;
};

class WsSession;

/// Path of log segment `index` (0 keeps `base` unchanged).
std::string segment_path(const std::string& base, std::uint64_t index);

/// WebSocket front end plus the realtime servo thread. One scenario runs at a
/// time; clients on `/ws` receive snapshots and may send pointer, param,
/// scenario and reset messages.
class LabService {
public:
    explicit LabService(ServiceOptions options);
    ~LabService();

    LabService(const LabService&) = delete;
    LabService& operator=(const LabService&) = delete;

    /// Binds the port (0 picks a free one) and starts the threads. Throws
    /// std::runtime_error when the port cannot be bound.
    void start();
    void stop();
    /// False once stopped or after the servo thread failed.
    [[nodiscard]] bool running() const;
    [[nodiscard]] std::optional<std::string> failure() const;

    [[nodiscard]] std::uint16_t port() const;
    [[nodiscard]] ServiceStats stats() const;

private:
    friend class WsSession;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace hlab
