#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <sys/socket.h>
#include <sys/time.h>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include "hlab/protocol.hpp"
#include "hlab/service.hpp"

using namespace hlab;
using nlohmann::json;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

void receive_timeout(tcp::socket& s, int ms)
{
    timeval tv{ms / 1000, (ms % 1000) * 1000};
    setsockopt(s.native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

class Client {
public:
    explicit Client(std::uint16_t port)
        : ws_(ioc_)
    {
        tcp::resolver resolver(ioc_);
        net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        receive_timeout(ws_.next_layer(), 3000);
        ws_.handshake("127.0.0.1", "/ws");
    }

    void send(const std::string& text) { ws_.write(net::buffer(text)); }

    /// Next frame, or nullopt once the connection is gone.
    std::optional<json> read()
    {
        beast::flat_buffer buf;
        beast::error_code ec;
        ws_.read(buf, ec);
        if (ec) {
            return std::nullopt;
        }
        return json::parse(beast::buffers_to_string(buf.data()));
    }

    /// Skips frames until one of `type` arrives.
    std::optional<json> read_type(const std::string& type, int max_frames = 400)
    {
        for (int i = 0; i < max_frames; ++i) {
            auto m = read();
            if (!m) {
                return std::nullopt;
            }
            if ((*m)["type"] == type) {
                return m;
            }
        }
        return std::nullopt;
    }

    websocket::stream<tcp::socket>& stream() { return ws_; }

private:
    net::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

ServiceOptions options(ScenarioId id = ScenarioId::Friction, std::optional<std::string> record = std::nullopt)
{
    ServiceOptions o;
    o.config.scenario = id;
    o.config.port = 0;
    o.record = std::move(record);
    return o;
}

std::string pointer(double x, double y, double z, int device = 0)
{
    return serialize(PointerMessage{{x, y, z}, device});
}

std::string temp_path(const std::string& name) { return testing::TempDir() + name; }

} // namespace

TEST(SegmentPath, InsertsIndexBeforeExtension)
{
    EXPECT_EQ(segment_path("run.lablog", 0), "run.lablog");
    EXPECT_EQ(segment_path("run.lablog", 2), "run.2.lablog");
    EXPECT_EQ(segment_path("/tmp/a.b/run", 1), "/tmp/a.b/run.1");
    EXPECT_EQ(segment_path("/tmp/.hidden", 1), "/tmp/.hidden.1");
}

TEST(Service, HelloThenSnapshotsAtSixtyHertz)
{
    LabService svc(options());
    svc.start();
    ASSERT_NE(svc.port(), 0);
    Client c(svc.port());
    const auto hello = c.read();
    ASSERT_TRUE(hello);
    EXPECT_EQ((*hello)["type"], "hello");
    EXPECT_EQ((*hello)["v"], 1);
    EXPECT_EQ((*hello)["scenario"], "friction");

    ASSERT_TRUE(c.read_type("snapshot"));
    const auto begin = std::chrono::steady_clock::now();
    int n = 0;
    double last_t = 0.0;
    while (std::chrono::steady_clock::now() - begin < std::chrono::seconds(2)) {
        auto m = c.read();
        ASSERT_TRUE(m);
        if ((*m)["type"] == "snapshot") {
            ++n;
            const double t = (*m)["t"];
            ASSERT_GT(t, last_t);
            last_t = t;
            ASSERT_TRUE((*m)["hud"].contains("friction"));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    EXPECT_NEAR(n / secs, 60.0, 5.0);
    EXPECT_TRUE(svc.running());
    EXPECT_GT(svc.stats().ticks, 1000u);
    svc.stop();
    EXPECT_FALSE(svc.running());
}

TEST(Service, PointerParamAndLog)
{
    const auto log = temp_path("svc.lablog");
    LabService svc(options(ScenarioId::Friction, log));
    svc.start();
    {
        Client c(svc.port());
        ASSERT_TRUE(c.read_type("hello"));
        c.send(pointer(1, 0, 0));
        c.send(serialize(ParamMessage{"friction.mu_s", 0.6}));
        const auto applied = c.read_type("applied");
        ASSERT_TRUE(applied);
        EXPECT_EQ((*applied)["detail"]["name"], "friction.mu_s");

        c.send(serialize(ParamMessage{"friction.mu_k", 0.9}));
        const auto rejected = c.read_type("reject");
        ASSERT_TRUE(rejected);
        EXPECT_NE((*rejected)["reason"].get<std::string>().find("friction.mu_k"), std::string::npos);

        c.send(pointer(0, 0, 0, 1)); // friction has one device
        ASSERT_TRUE(c.read_type("reject"));
        ASSERT_TRUE(c.read_type("snapshot"));
    }
    svc.stop();

    const auto s = read_session_file(log);
    EXPECT_EQ(s.header.config["friction.mu_s"], 0.5);
    bool mapped = false;
    std::optional<std::uint64_t> event_tick;
    for (const auto& r : s.records) {
        mapped = mapped || r.samples[0].pos == Vec3{0.06, 0, 0};
        for (const auto& e : r.events) {
            if (e["name"] == "friction.mu_s") {
                event_tick = r.tick;
                EXPECT_EQ(e["value"], 0.6);
            }
        }
    }
    EXPECT_TRUE(mapped);
    ASSERT_TRUE(event_tick);
    // The session replays, parameter change included.
    EXPECT_TRUE(verify_replay(s).match);
}

TEST(Service, MalformedFrameClosesOnlyThatClient)
{
    LabService svc(options());
    svc.start();
    Client bad(svc.port());
    Client good(svc.port());
    ASSERT_TRUE(bad.read_type("hello"));
    ASSERT_TRUE(good.read_type("hello"));

    bad.send("{ this is not json");
    const auto err = bad.read_type("error");
    ASSERT_TRUE(err);
    EXPECT_FALSE((*err)["reason"].get<std::string>().empty());
    // Keep reading until the close frame arrives.
    while (bad.read()) {
    }
    EXPECT_EQ(bad.stream().reason().code, websocket::close_code::policy_error);
    EXPECT_FALSE(std::string(bad.stream().reason().reason.c_str()).empty());

    Client wrong_version(svc.port());
    wrong_version.send(R"({"v":2,"type":"reset"})");
    ASSERT_TRUE(wrong_version.read_type("error"));

    ASSERT_TRUE(good.read_type("snapshot"));
    EXPECT_TRUE(svc.running());
    svc.stop();
}

TEST(Service, PortInUseFailsAtStartup)
{
    LabService first(options());
    first.start();
    auto o = options();
    o.config.port = first.port();
    LabService second(o);
    try {
        second.start();
        FAIL() << "expected the bind to fail";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("cannot listen on port " + std::to_string(first.port())),
                  std::string::npos);
    }
    EXPECT_TRUE(first.running());
    first.stop();
}

TEST(Service, OtherPathsGetNotFound)
{
    LabService svc(options());
    svc.start();
    net::io_context ioc;
    tcp::socket sock(ioc);
    sock.connect({net::ip::make_address("127.0.0.1"), svc.port()});
    receive_timeout(sock, 3000);
    http::request<http::empty_body> req(http::verb::get, "/", 11);
    req.set(http::field::host, "127.0.0.1");
    http::write(sock, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(sock, buf, res);
    EXPECT_EQ(res.result(), http::status::not_found);

    // /ws without the upgrade headers is not a WebSocket either.
    tcp::socket plain(ioc);
    plain.connect({net::ip::make_address("127.0.0.1"), svc.port()});
    receive_timeout(plain, 3000);
    http::request<http::empty_body> get_ws(http::verb::get, "/ws", 11);
    get_ws.set(http::field::host, "127.0.0.1");
    http::write(plain, get_ws);
    beast::flat_buffer buf2;
    http::response<http::string_body> res2;
    http::read(plain, buf2, res2);
    EXPECT_EQ(res2.result(), http::status::not_found);
    svc.stop();
}

TEST(Service, ScenarioSwitchStartsNewSegment)
{
    const auto log = temp_path("switch.lablog");
    std::filesystem::remove(segment_path(log, 1));
    LabService svc(options(ScenarioId::Friction, log));
    svc.start();
    double before = 0.0;
    {
        Client c(svc.port());
        ASSERT_TRUE(c.read_type("hello"));
        before = (*c.read_type("snapshot"))["t"];
        c.send(serialize(ScenarioMessage{ScenarioId::Coriolis, PuckKind::Glider}));
        const auto hello = c.read_type("hello");
        ASSERT_TRUE(hello);
        EXPECT_EQ((*hello)["scenario"], "coriolis");
        EXPECT_EQ((*hello)["variant"], "glider");
        std::optional<json> snap;
        do {
            snap = c.read_type("snapshot");
            ASSERT_TRUE(snap);
        } while ((*snap)["scenario"] != "coriolis");
        EXPECT_GT((*snap)["t"].get<double>(), before);

        c.send(serialize(ScenarioMessage{ScenarioId::Precession, std::nullopt}));
        ASSERT_TRUE(c.read_type("hello"));
        c.send(pointer(0.1, 0.2, 0.0, 1)); // both hands exist now
        c.send(serialize(ResetMessage{}));
        ASSERT_TRUE(c.read_type("applied"));
    }
    EXPECT_EQ(svc.stats().segments, 3u);
    svc.stop();

    EXPECT_EQ(read_session_file(log).header.scenario, ScenarioId::Friction);
    const auto second = read_session_file(segment_path(log, 1));
    EXPECT_EQ(second.header.scenario, ScenarioId::Coriolis);
    EXPECT_EQ(second.header.variant, "glider");
    EXPECT_FALSE(second.records.empty());
    EXPECT_EQ(second.records.front().tick, 0u);
    const auto third = read_session_file(segment_path(log, 2));
    EXPECT_EQ(third.header.devices, 2u);
    EXPECT_TRUE(verify_replay(third).match);
}

TEST(Service, StopIsIdempotentAndDisconnectsClients)
{
    LabService svc(options());
    svc.start();
    Client c(svc.port());
    ASSERT_TRUE(c.read_type("hello"));
    svc.stop();
    svc.stop();
    while (c.read()) {
    }
    EXPECT_FALSE(svc.failure());
}
