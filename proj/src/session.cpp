#include "hlab/session.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "hlab/protocol.hpp"
#include "hlab/state_hash.hpp"

namespace hlab {

using nlohmann::json;

namespace {

json sample_to_json(const DeviceSample& s)
{
    return {{"t", s.t}, {"pos", vec_to_json(s.pos)}, {"vel", vec_to_json(s.vel)}, {"button", s.button}};
}

DeviceSample sample_from_json(const json& j)
{
    return {j.at("t").get<double>(), vec_from_json(j.at("pos")), vec_from_json(j.at("vel")), j.at("button").get<bool>()};
}

std::string describe_tick(std::optional<std::uint64_t> tick)
{
    return tick ? "tick " + std::to_string(*tick) : std::string("none");
}

} // namespace

TruncatedLogError::TruncatedLogError(std::optional<std::uint64_t> last_complete_tick, std::size_t line)
    : std::runtime_error("session log truncated at line " + std::to_string(line) +
                         "; last complete record: " + describe_tick(last_complete_tick))
    , last_complete_(last_complete_tick)
{
}

json header_to_json(const SessionHeader& h)
{
    return {{"format", kLogFormat},  {"version", h.version}, {"scenario", to_string(h.scenario)},
            {"variant", h.variant},  {"devices", h.devices}, {"dt", h.dt},
            {"started_at", h.started_at}, {"config", h.config}};
}

SessionHeader header_from_json(const json& j)
{
    if (!j.is_object() || j.value("format", std::string{}) != kLogFormat) {
        throw LogFormatError("not a session log (missing format marker)");
    }
    SessionHeader h;
    try {
        h.version = j.at("version").get<int>();
    } catch (const json::exception&) {
        throw LogFormatError("session log header has no version");
    }
    if (h.version != kLogVersion) {
        throw LogFormatError("unsupported session log version " + std::to_string(h.version) + " (supported: " +
                             std::to_string(kLogVersion) + ")");
    }
    try {
        h.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        h.variant = j.value("variant", std::string{});
        h.devices = j.at("devices").get<std::size_t>();
        h.dt = j.at("dt").get<double>();
        h.started_at = j.value("started_at", std::string{});
        h.config = j.value("config", json::object());
    } catch (const std::exception& e) {
        throw LogFormatError(std::string("bad session log header: ") + e.what());
    }
    return h;
}

json record_to_json(const TickRecord& r)
{
    json samples = json::array();
    for (const auto& s : r.samples) {
        samples.push_back(sample_to_json(s));
    }
    json forces = json::array();
    for (const auto& f : r.forces) {
        forces.push_back(vec_to_json(f.force));
    }
    json j = {{"tick", r.tick},        {"t", r.t},
              {"samples", samples},    {"forces", forces},
              {"hash", hash_to_hex(r.state_hash)}};
    if (!r.events.empty()) {
        j["events"] = r.events;
    }
    if (r.snapshot) {
        j["snapshot"] = *r.snapshot;
    }
    return j;
}

TickRecord record_from_json(const json& j)
{
    TickRecord r;
    r.tick = j.at("tick").get<std::uint64_t>();
    r.t = j.at("t").get<double>();
    for (const auto& s : j.at("samples")) {
        r.samples.push_back(sample_from_json(s));
    }
    for (const auto& f : j.at("forces")) {
        r.forces.push_back({vec_from_json(f)});
    }
    r.state_hash = hash_from_hex(j.at("hash").get<std::string>());
    if (j.contains("events")) {
        for (const auto& e : j["events"]) {
            r.events.push_back(e);
        }
    }
    if (j.contains("snapshot")) {
        r.snapshot = j["snapshot"];
    }
    return r;
}

TickRecord make_record(const TickTrace& trace)
{
    TickRecord r;
    r.tick = trace.tick;
    r.t = trace.t;
    if (trace.samples) {
        r.samples = *trace.samples;
    }
    if (trace.forces) {
        r.forces = *trace.forces;
    }
    r.state_hash = trace.state_hash;
    if (trace.events) {
        for (const auto& e : *trace.events) {
            r.events.push_back(json::parse(e, nullptr, false));
        }
    }
    if (trace.snapshot) {
        r.snapshot = snapshot_to_json(*trace.snapshot);
    }
    return r;
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------

SessionWriter::SessionWriter(const std::string& path, const SessionHeader& header)
    : path_(path)
    , out_(path, std::ios::out | std::ios::trunc)
{
    if (!out_) {
        throw std::runtime_error("cannot open session log for writing: " + path);
    }
    out_ << header_to_json(header).dump() << '\n';
    out_.flush();
}

SessionWriter::~SessionWriter()
{
    try {
        close();
    } catch (...) {
    }
}

void SessionWriter::append(const TickRecord& record)
{
    const std::uint64_t expected = last_tick_ ? *last_tick_ + 1 : 0;
    if (record.tick != expected) {
        throw IntegrityError("tick " + std::to_string(record.tick) + " appended where tick " +
                             std::to_string(expected) + " was expected");
    }
    out_ << record_to_json(record).dump() << '\n';
    if (!out_) {
        throw std::runtime_error("write failed: " + path_);
    }
    last_tick_ = record.tick;
    if (++written_ % kFlushInterval == 0) {
        out_.flush();
    }
}

void SessionWriter::flush() { out_.flush(); }

void SessionWriter::close()
{
    if (out_.is_open()) {
        out_.flush();
        out_.close();
    }
}

// ---------------------------------------------------------------------------

AsyncSessionWriter::AsyncSessionWriter(const std::string& path, const SessionHeader& header, std::size_t capacity)
    : writer_(path, header)
    , capacity_(capacity == 0 ? 1 : capacity)
    , thread_([this] { run(); })
{
}

AsyncSessionWriter::~AsyncSessionWriter()
{
    try {
        close();
    } catch (...) {
    }
}

void AsyncSessionWriter::append(TickRecord record)
{
    std::unique_lock lock(mutex_);
    changed_.wait(lock, [&] { return queue_.size() < capacity_ || failure_; });
    if (failure_) {
        std::rethrow_exception(failure_);
    }
    queue_.push_back(std::move(record));
    changed_.notify_all();
}

void AsyncSessionWriter::run()
{
    std::unique_lock lock(mutex_);
    for (;;) {
        changed_.wait(lock, [&] { return !queue_.empty() || closing_; });
        if (queue_.empty() && closing_) {
            return;
        }
        std::deque<TickRecord> batch;
        batch.swap(queue_);
        changed_.notify_all();
        lock.unlock();
        try {
            for (const auto& r : batch) {
                writer_.append(r);
            }
        } catch (...) {
            lock.lock();
            failure_ = std::current_exception();
            changed_.notify_all();
            return;
        }
        lock.lock();
    }
}

void AsyncSessionWriter::close()
{
    {
        std::lock_guard lock(mutex_);
        closing_ = true;
    }
    changed_.notify_all();
    if (thread_.joinable()) {
        thread_.join();
    }
    writer_.close();
    if (failure_) {
        auto f = failure_;
        failure_ = nullptr;
        std::rethrow_exception(f);
    }
}

// ---------------------------------------------------------------------------

std::vector<DeviceSample> SessionLog::device_samples(std::size_t device) const
{
    std::vector<DeviceSample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.samples.at(device));
    }
    return out;
}

std::vector<std::uint64_t> SessionLog::hashes() const
{
    std::vector<std::uint64_t> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.state_hash);
    }
    return out;
}

SessionLog read_session(std::istream& in)
{
    SessionLog log;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw LogFormatError("session log is empty");
    }
    ++line_no;
    const json header = json::parse(line, nullptr, false);
    if (header.is_discarded()) {
        throw LogFormatError("session log header is not valid JSON");
    }
    log.header = header_from_json(header);

    std::optional<std::uint64_t> last;
    while (std::getline(in, line)) {
        ++line_no;
        const bool terminated = !in.eof();
        if (line.empty() && !terminated) {
            break;
        }
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !terminated) {
            if (!terminated || in.peek() == std::char_traits<char>::eof()) {
                throw TruncatedLogError(last, line_no);
            }
            throw LogFormatError("malformed record at line " + std::to_string(line_no) + " after " + describe_tick(last));
        }
        TickRecord r;
        try {
            r = record_from_json(j);
        } catch (const std::exception& e) {
            throw LogFormatError("bad record at line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::uint64_t expected = last ? *last + 1 : 0;
        if (r.tick != expected) {
            throw IntegrityError("line " + std::to_string(line_no) + " holds tick " + std::to_string(r.tick) +
                                 ", expected tick " + std::to_string(expected));
        }
        if (r.samples.size() != log.header.devices || r.forces.size() != log.header.devices) {
            throw LogFormatError("record at line " + std::to_string(line_no) + " does not match the device count");
        }
        last = r.tick;
        log.records.push_back(std::move(r));
    }
    return log;
}

SessionLog read_session_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LogFormatError("cannot open session log: " + path);
    }
    return read_session(in);
}

void write_session_file(const std::string& path, const SessionLog& log)
{
    SessionWriter w(path, log.header);
    for (const auto& r : log.records) {
        w.append(r);
    }
    w.close();
}

VerifyReport compare_hashes(const SessionLog& log, std::span<const std::uint64_t> rerun)
{
    VerifyReport report;
    const std::size_t n = std::min(log.records.size(), rerun.size());
    for (std::size_t i = 0; i < n; ++i) {
        ++report.ticks_compared;
        if (log.records[i].state_hash != rerun[i]) {
            report.match = false;
            report.first_divergent_tick = log.records[i].tick;
            return report;
        }
    }
    if (log.records.size() != rerun.size()) {
        report.match = false;
        report.first_divergent_tick = n;
    }
    return report;
}

} // namespace hlab
