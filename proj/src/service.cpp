#include "hlab/service.hpp"

#include <chrono>
#include <deque>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>
#include <variant>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "hlab/protocol.hpp"

namespace hlab {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

constexpr auto kPumpPeriod = std::chrono::milliseconds(2);
constexpr std::size_t kClientBacklog = 64;
constexpr std::size_t kMaxCloseReason = 120; // RFC 6455 limit is 123 bytes

struct Inbound {
    std::uint64_t client = 0;
    ClientMessage message;
};

struct Outbound {
    std::uint64_t client = 0; ///< 0 = everyone
    std::string text;
};

std::string request_name(const ClientMessage& m)
{
    switch (m.index()) {
    case 0: return "pointer";
    case 1: return "param";
    case 2: return "scenario";
    default: return "reset";
    }
}

} // namespace

std::string segment_path(const std::string& base, std::uint64_t index)
{
    if (index == 0) {
        return base;
    }
    const auto slash = base.find_last_of('/');
    const auto dot = base.find_last_of('.');
    const std::string tag = "." + std::to_string(index);
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash) || dot == 0 ||
        (slash != std::string::npos && dot == slash + 1)) {
        return base + tag;
    }
    return base.substr(0, dot) + tag + base.substr(dot);
}

class WsSession;

struct LabService::Impl {
    explicit Impl(ServiceOptions o)
        : options(std::move(o))
        , acceptor(ioc)
        , pump(ioc)
    {
        for (int i = 0; i < 2; ++i) {
            mailboxes.push_back(std::make_shared<PointerMailbox>());
        }
    }

    void accept();
    void schedule_pump();
    void flush_outbound();
    void broadcast(const std::shared_ptr<const std::string>& text);
    void servo_main();
    void servo_segments();

    ServiceOptions options;
    net::io_context ioc{1};
    tcp::acceptor acceptor;
    net::steady_timer pump;
    std::thread io_thread;
    std::thread servo_thread;
    std::atomic<bool> stopping{false};
    std::atomic<bool> alive{false};
    std::uint16_t bound_port = 0;

    std::vector<std::shared_ptr<PointerMailbox>> mailboxes;
    std::atomic<std::size_t> device_count{1};

    DropOldestQueue<std::string> snapshots{16};
    DropOldestQueue<Outbound> replies{1024};
    DropOldestQueue<Inbound> controls{1024};

    // io thread only
    std::map<std::uint64_t, std::shared_ptr<WsSession>> sessions;
    std::uint64_t next_client = 1;

    mutable std::mutex shared_mutex;
    std::string hello;
    std::optional<std::string> failure;

    std::atomic<std::uint64_t> ticks{0};
    std::atomic<std::uint64_t> published{0};
    std::atomic<std::uint64_t> overruns{0};
    std::atomic<std::uint64_t> clients{0};
    std::atomic<std::uint64_t> segments{0};
};

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, LabService::Impl& owner, std::uint64_t id)
        : ws_(std::move(socket))
        , owner_(owner)
        , id_(id)
    {
    }

    void start()
    {
        http::async_read(ws_.next_layer(), buffer_, request_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
    }

    void send(std::shared_ptr<const std::string> text)
    {
        if (closing_) {
            return;
        }
        if (queue_.size() >= kClientBacklog) {
            // Keep the frame being written; shed the oldest waiting one.
            queue_.erase(queue_.begin() + (writing_ ? 1 : 0));
        }
        queue_.push_back(std::move(text));
        if (!writing_) {
            write_next();
        }
    }

    /// Sends an error frame, then closes with the reason.
    void reject_and_close(const std::string& reason)
    {
        if (closing_) {
            return;
        }
        queue_.push_back(std::make_shared<const std::string>(error_message(reason)));
        closing_ = true;
        close_reason_ = reason.substr(0, kMaxCloseReason);
        if (!writing_) {
            write_next();
        }
    }

    void shutdown()
    {
        beast::error_code ec;
        ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ec);
        ws_.next_layer().socket().close(ec);
    }

private:
    void on_request(beast::error_code ec)
    {
        if (ec) {
            return;
        }
        if (request_.target() != "/ws" || !websocket::is_upgrade(request_)) {
            auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
            res->set(http::field::content_type, "text/plain");
            res->body() = "websocket endpoint is /ws\n";
            res->prepare_payload();
            res->keep_alive(false);
            http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
                self->shutdown();
            });
            return;
        }
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
    }

    void on_accept(beast::error_code ec)
    {
        if (ec) {
            return;
        }
        buffer_.consume(buffer_.size());
        owner_.sessions[id_] = shared_from_this();
        ++owner_.clients;
        std::string hello;
        {
            std::lock_guard lock(owner_.shared_mutex);
            hello = owner_.hello;
        }
        if (!hello.empty()) {
            send(std::make_shared<const std::string>(hello));
        }
        read_next();
    }

    void read_next()
    {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec)
    {
        if (ec) {
            drop();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        if (closing_) {
            return;
        }
        if (!ws_.got_text()) {
            reject_and_close("binary frames are not supported");
            return;
        }
        try {
            handle(parse_client_message(text));
        } catch (const ProtocolError& e) {
            reject_and_close(e.what());
            return;
        }
        read_next();
    }

    void handle(ClientMessage message)
    {
        if (const auto* p = std::get_if<PointerMessage>(&message)) {
            if (static_cast<std::size_t>(p->device) >= owner_.device_count.load()) {
                send(std::make_shared<const std::string>(
                    reject_message("pointer", "device " + std::to_string(p->device) + " is not used by this scenario")));
                return;
            }
            owner_.mailboxes[static_cast<std::size_t>(p->device)]->post(p->pos);
            return;
        }
        if (owner_.controls.push({id_, std::move(message)})) {
            // A dropped control request never gets an answer; tell its sender.
            send(std::make_shared<const std::string>(error_message("control queue overflow, request dropped")));
        }
    }

    void write_next()
    {
        if (queue_.empty()) {
            writing_ = false;
            if (closing_) {
                ws_.async_close(websocket::close_reason(websocket::close_code::policy_error, close_reason_),
                                [self = shared_from_this()](beast::error_code) { self->drop(); });
            }
            return;
        }
        writing_ = true;
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->drop();
                return;
            }
            self->queue_.pop_front();
            self->write_next();
        });
    }

    void drop()
    {
        if (owner_.sessions.erase(id_) > 0) {
            --owner_.clients;
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    LabService::Impl& owner_;
    std::uint64_t id_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool writing_ = false;
    bool closing_ = false;
    std::string close_reason_;
};

void LabService::Impl::accept()
{
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            return;
        }
        std::make_shared<WsSession>(std::move(socket), *this, next_client++)->start();
        accept();
    });
}

void LabService::Impl::broadcast(const std::shared_ptr<const std::string>& text)
{
    // Copy: a failing send may erase the session.
    auto targets = sessions;
    for (auto& [id, s] : targets) {
        s->send(text);
    }
}

void LabService::Impl::flush_outbound()
{
    for (auto& r : replies.drain()) {
        auto text = std::make_shared<const std::string>(std::move(r.text));
        if (r.client == 0) {
            broadcast(text);
        } else if (auto it = sessions.find(r.client); it != sessions.end()) {
            it->second->send(text);
        }
    }
    for (auto& s : snapshots.drain()) {
        broadcast(std::make_shared<const std::string>(std::move(s)));
    }
}

void LabService::Impl::schedule_pump()
{
    pump.expires_after(kPumpPeriod);
    pump.async_wait([this](beast::error_code ec) {
        if (ec) {
            return;
        }
        flush_outbound();
        schedule_pump();
    });
}

void LabService::Impl::servo_main()
{
    try {
        servo_segments();
    } catch (const std::exception& e) {
        std::lock_guard lock(shared_mutex);
        failure = e.what();
        std::cerr << "lab: servo thread stopped: " << e.what() << "\n";
    }
    alive = false;
}

void LabService::Impl::servo_segments()
{
    LabConfig config = options.config;
    std::deque<Inbound> backlog;
    double time_offset = 0.0; // keeps snapshot t increasing across segments

    auto reply = [&](std::uint64_t client, std::string text) { replies.push({client, std::move(text)}); };

    // Validates a scenario switch; nullopt (and a rejection) when invalid.
    auto switched = [&](const Inbound& in) -> std::optional<LabConfig> {
        const auto& m = std::get<ScenarioMessage>(in.message);
        LabConfig next = config;
        next.scenario = m.scenario;
        if (m.variant) {
            next.coriolis.variant = *m.variant;
        }
        const auto problems = validate(next);
        if (!problems.empty()) {
            reply(in.client, reject_message("scenario", problems.front()));
            return std::nullopt;
        }
        return next;
    };

    for (std::uint64_t segment = 0; !stopping; ++segment) {
        Lab lab(config, make_rig(config, options.device, ScriptEnd::Hold, mailboxes).rig);
        device_count = lab.scenario().device_count();
        const SessionHeader header = lab.header();
        {
            std::lock_guard lock(shared_mutex);
            hello = hello_message(config.scenario, header.variant, to_json(config));
            reply(0, hello);
        }
        segments = segment + 1;

        std::unique_ptr<AsyncSessionWriter> writer;
        if (options.record) {
            writer = std::make_unique<AsyncSessionWriter>(segment_path(*options.record, segment), header);
        }

        ServoLoop loop(lab.scenario(), lab.rig(), config.step(), config.servo_rate_hz, config.snapshot_rate_hz);
        loop.on_snapshot([&](const Snapshot& s) {
            Snapshot shifted = s;
            shifted.t += time_offset;
            snapshots.push(snapshot_message(shifted));
            ++published;
        });
        loop.on_tick([&](const TickTrace& trace) {
            if (writer) {
                writer->append(make_record(trace));
            }
            ++ticks;
        });
        loop.on_report([&](const TickReport& r) {
            if (r.overrun) {
                ++overruns;
            }
        });

        std::optional<LabConfig> next_config;
        std::optional<std::uint64_t> switch_client;
        loop.set_control_hook([&](std::uint64_t, bool& stop) {
            std::vector<std::string> events;
            for (auto& in : controls.drain()) {
                backlog.push_back(std::move(in));
            }
            while (!backlog.empty()) {
                Inbound in = std::move(backlog.front());
                backlog.pop_front();
                if (const auto* p = std::get_if<ParamMessage>(&in.message)) {
                    try {
                        json event = lab.set_param(p->name, p->value);
                        events.push_back(event.dump());
                        reply(in.client, applied_message("param", event));
                    } catch (const RejectedRequest& e) {
                        reply(in.client, reject_message("param", e.what()));
                    }
                } else if (std::holds_alternative<ResetMessage>(in.message)) {
                    json event = lab.reset();
                    events.push_back(event.dump());
                    reply(in.client, applied_message("reset", event));
                } else if (std::holds_alternative<ScenarioMessage>(in.message)) {
                    if (auto next = switched(in)) {
                        next_config = std::move(next);
                        switch_client = in.client;
                        stop = true;
                        break; // later requests go to the next scenario
                    }
                } else {
                    reply(in.client, reject_message(request_name(in.message), "unsupported request"));
                }
            }
            return events;
        });

        const LoopSummary summary = loop.run(SchedulePolicy::Realtime, 0, &stopping);
        time_offset += summary.final_t;
        if (writer) {
            writer->close();
        }

        // Input exhausted (replay device): idle until a switch or shutdown.
        while (!next_config && !stopping) {
            for (auto& in : controls.drain()) {
                backlog.push_back(std::move(in));
            }
            while (!backlog.empty() && !next_config) {
                Inbound in = std::move(backlog.front());
                backlog.pop_front();
                if (std::holds_alternative<ScenarioMessage>(in.message)) {
                    if (auto next = switched(in)) {
                        next_config = std::move(next);
                        switch_client = in.client;
                    }
                } else {
                    reply(in.client, reject_message(request_name(in.message), "device input has ended"));
                }
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        if (next_config) {
            config = *next_config;
            reply(*switch_client, applied_message("scenario", {{"name", to_string(config.scenario)},
                                                               {"variant", config.variant()}}));
        }
    }
}

LabService::LabService(ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(options)))
{
    const auto problems = validate(impl_->options.config);
    if (!problems.empty()) {
        throw ConfigError(problems);
    }
}

LabService::~LabService() { stop(); }

void LabService::start()
{
    Impl& s = *impl_;
    const auto port = static_cast<std::uint16_t>(s.options.config.port);
    try {
        const tcp::endpoint endpoint(net::ip::address_v4::any(), port);
        s.acceptor.open(endpoint.protocol());
        s.acceptor.set_option(net::socket_base::reuse_address(true));
        s.acceptor.bind(endpoint);
        s.acceptor.listen();
        s.bound_port = s.acceptor.local_endpoint().port();
    } catch (const boost::system::system_error& e) {
        throw std::runtime_error("cannot listen on port " + std::to_string(port) + ": " + e.code().message());
    }
    s.alive = true;
    s.accept();
    s.schedule_pump();
    s.io_thread = std::thread([&s] { s.ioc.run(); });
    s.servo_thread = std::thread([&s] { s.servo_main(); });
}

void LabService::stop()
{
    Impl& s = *impl_;
    s.stopping = true;
    if (s.servo_thread.joinable()) {
        s.servo_thread.join();
    }
    if (s.io_thread.joinable()) {
        net::post(s.ioc, [&s] {
            beast::error_code ec;
            s.acceptor.close(ec);
            s.pump.cancel();
            for (auto& [id, session] : s.sessions) {
                session->shutdown();
            }
            s.sessions.clear();
            s.ioc.stop();
        });
        s.io_thread.join();
    }
    s.alive = false;
}

bool LabService::running() const { return impl_->alive; }

std::optional<std::string> LabService::failure() const
{
    std::lock_guard lock(impl_->shared_mutex);
    return impl_->failure;
}

std::uint16_t LabService::port() const { return impl_->bound_port; }

ServiceStats LabService::stats() const
{
    const Impl& s = *impl_;
    return {s.ticks, s.published, s.snapshots.dropped(), s.overruns, s.clients, s.segments};
}

} // namespace hlab
