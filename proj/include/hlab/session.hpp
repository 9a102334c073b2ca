#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hlab/device.hpp"
#include "hlab/servo.hpp"
#include "hlab/snapshot.hpp"

namespace hlab {

inline constexpr const char* kLogFormat = "lablog";
inline constexpr int kLogVersion = 1;
inline constexpr std::size_t kFlushInterval = 256;

struct SessionHeader {
    int version = kLogVersion;
    ScenarioId scenario = ScenarioId::Friction;
    std::string variant;
    std::size_t devices = 1;
    double dt = kDefaultDt;
    std::string started_at;  ///< metadata only
    nlohmann::json config = nlohmann::json::object(); ///< flat key -> value, as at segment start

    friend bool operator==(const SessionHeader&, const SessionHeader&) = default;
};

struct TickRecord {
    std::uint64_t tick = 0;
    double t = 0.0;                         ///< end of the tick
    std::vector<DeviceSample> samples;      ///< per device, device-local
    std::vector<ForceCommand> forces;       ///< per device, as dispatched
    std::uint64_t state_hash = 0;
    std::vector<nlohmann::json> events;     ///< control changes applied before the step
    std::optional<nlohmann::json> snapshot; ///< on decimated ticks

    friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

/// Gap or regression in tick indices.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable, wrong format or unsupported version.
class LogFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The file ends inside a record.
class TruncatedLogError : public std::runtime_error {
public:
    TruncatedLogError(std::optional<std::uint64_t> last_complete_tick, std::size_t line);
    /// nullopt when not even tick 0 was complete.
    [[nodiscard]] std::optional<std::uint64_t> last_complete_tick() const { return last_complete_; }

private:
    std::optional<std::uint64_t> last_complete_;
};

nlohmann::json header_to_json(const SessionHeader& h);
SessionHeader header_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const TickRecord& r);
TickRecord record_from_json(const nlohmann::json& j);

/// Builds a record from what the servo loop reports for one tick.
TickRecord make_record(const TickTrace& trace);

/// Current UTC time as ISO-8601, for headers.
std::string utc_timestamp();

/// Append-only writer: header on construction, then one line per tick.
class SessionWriter {
public:
    SessionWriter(const std::string& path, const SessionHeader& header);
    ~SessionWriter();

    SessionWriter(const SessionWriter&) = delete;
    SessionWriter& operator=(const SessionWriter&) = delete;

    /// Throws IntegrityError unless record.tick continues the sequence.
    void append(const TickRecord& record);
    void flush();
    void close();

    [[nodiscard]] std::uint64_t records_written() const { return written_; }
    [[nodiscard]] const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::optional<std::uint64_t> last_tick_;
    std::uint64_t written_ = 0;
};

/// Moves serialization and disk I/O off the servo thread. Records pass
/// through a bounded queue; a full queue makes append() wait.
class AsyncSessionWriter {
public:
    AsyncSessionWriter(const std::string& path, const SessionHeader& header, std::size_t capacity = 1 << 16);
    ~AsyncSessionWriter();

    AsyncSessionWriter(const AsyncSessionWriter&) = delete;
    AsyncSessionWriter& operator=(const AsyncSessionWriter&) = delete;

    void append(TickRecord record);
    /// Drains the queue and closes the file. Rethrows a writer failure.
    void close();

private:
    void run();

    SessionWriter writer_;
    std::size_t capacity_;
    std::mutex mutex_;
    std::condition_variable changed_;
    std::deque<TickRecord> queue_;
    bool closing_ = false;
    std::exception_ptr failure_;
    std::thread thread_;
};

struct SessionLog {
    SessionHeader header;
    std::vector<TickRecord> records;

    /// Samples of one device in tick order.
    [[nodiscard]] std::vector<DeviceSample> device_samples(std::size_t device) const;
    [[nodiscard]] std::vector<std::uint64_t> hashes() const;
};

/// Parses a whole log. Throws LogFormatError, TruncatedLogError or
/// IntegrityError. A header-only file yields no records.
SessionLog read_session(std::istream& in);
SessionLog read_session_file(const std::string& path);

void write_session_file(const std::string& path, const SessionLog& log);

struct VerifyReport {
    bool match = true;
    std::optional<std::uint64_t> first_divergent_tick;
    std::uint64_t ticks_compared = 0;
};

/// Tick-by-tick comparison of recorded hashes against a re-run. A re-run
/// that is shorter or longer diverges at the first missing tick.
VerifyReport compare_hashes(const SessionLog& log, std::span<const std::uint64_t> rerun);

} // namespace hlab
