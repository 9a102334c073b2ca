#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "hlab/device.hpp"

using namespace hlab;

namespace {

DeviceDescriptor desc(double half = 0.06, double max_n = 8.0) { return {half, max_n, 0}; }

} // namespace

TEST(ScriptedDeviceStep, LinearInterpolation)
{
    const Script s{{0.0, {0, 0, 0}}, {1.0, {0.02, 0, 0}}};
    EXPECT_NEAR(scripted_device_step(s, 0.5, desc()).pos.x, 0.01, 1e-15);
}

TEST(ScriptedDeviceStep, HoldsAtEnds)
{
    const Script s{{0.0, {0, 0, 0}}, {1.0, {0.02, 0, 0}}};
    EXPECT_EQ(scripted_device_step(s, 2.0, desc()).pos, (Vec3{0.02, 0, 0}));
    EXPECT_EQ(scripted_device_step(s, -1.0, desc()).pos, (Vec3{0, 0, 0}));
}

TEST(ScriptedDeviceStep, SingleWaypoint)
{
    const Script s{{0.3, {0.01, -0.02, 0.03}}};
    for (double t : {0.0, 0.3, 7.0}) {
        EXPECT_EQ(scripted_device_step(s, t, desc()).pos, (Vec3{0.01, -0.02, 0.03}));
    }
}

TEST(ScriptedDeviceStep, ClampedToWorkspace)
{
    const Script s{{0.0, {1.0, -1.0, 0.0}}};
    EXPECT_EQ(scripted_device_step(s, 0.0, desc(0.06)).pos, (Vec3{0.06, -0.06, 0.0}));
}

TEST(Script, ValidationAndParsing)
{
    EXPECT_THROW(validate_script({}), ConfigurationError);
    EXPECT_THROW(validate_script({{1.0, {}}, {1.0, {}}}), ConfigurationError);
    EXPECT_THROW(validate_script({{1.0, {}}, {0.5, {}}}), ConfigurationError);
    const Script s = parse_script(R"([{"t":0,"pos":[0,0,0]},{"t":1,"pos":[0.01,0,0],"button":true}])");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_TRUE(s[1].button);
    EXPECT_THROW(parse_script("{}"), ConfigurationError);
    EXPECT_THROW(parse_script("[{\"t\":0}]"), ConfigurationError);
    EXPECT_THROW(parse_script("not json"), ConfigurationError);
    EXPECT_THROW(parse_script("[]"), ConfigurationError);
    EXPECT_THROW(load_script("/nonexistent/script.json"), ConfigurationError);
}

TEST(ScriptedDevice, AtRestHasZeroVelocity)
{
    ScriptedDevice d({{0.0, {0.01, 0.02, 0.0}}}, desc(), 1e-3);
    for (int i = 0; i < 100; ++i) {
        const auto s = d.sample();
        ASSERT_TRUE(s);
        EXPECT_EQ(s->pos, (Vec3{0.01, 0.02, 0.0}));
        EXPECT_EQ(s->vel, Vec3{});
    }
}

TEST(ScriptedDevice, RampVelocitySettles)
{
    ScriptedDevice d({{0.0, {0, 0, 0}}, {5.0, {0.05, 0, 0}}}, desc(), 1e-3);
    DeviceSample s;
    for (int i = 0; i < 1000; ++i) {
        s = *d.sample();
    }
    // 50 Hz low-pass settles in far less than 1 s.
    EXPECT_NEAR(s.vel.x, 0.01, 1e-9);
}

TEST(ScriptedDevice, TimestampsAdvanceByDtAndAreDeterministic)
{
    const Script script{{0.0, {0, 0, 0}}, {0.2, {0.03, 0.01, 0}}, {0.4, {-0.02, 0, 0.01}}};
    ScriptedDevice a(script, desc(), 1e-3);
    ScriptedDevice b(script, desc(), 1e-3);
    double prev = -1.0;
    for (int i = 0; i < 600; ++i) {
        const auto sa = a.sample();
        const auto sb = b.sample();
        ASSERT_TRUE(sa && sb);
        ASSERT_EQ(*sa, *sb);
        ASSERT_EQ(sa->t, i * 1e-3);
        ASSERT_GT(sa->t, prev);
        prev = sa->t;
    }
}

TEST(ScriptedDevice, ExhaustEndsAfterLastWaypoint)
{
    ScriptedDevice d({{0.0, {}}, {0.005, {0.001, 0, 0}}}, desc(), 1e-3, ScriptEnd::Exhaust);
    int n = 0;
    while (d.sample()) {
        ++n;
    }
    EXPECT_EQ(n, 6); // t = 0 .. 0.005
    EXPECT_TRUE(d.ended());
    EXPECT_FALSE(d.sample());
}

TEST(Device, CommandForceClampsAndLogs)
{
    ScriptedDevice d({{0.0, {}}}, desc(0.06, 8.0), 1e-3);
    EXPECT_EQ(d.command_force({{0, 0, 0}}), DispatchStatus::Dispatched);
    EXPECT_EQ(d.command_force({{12, 0, 0}}), DispatchStatus::Dispatched);
    ASSERT_EQ(d.command_history().size(), 2u);
    EXPECT_EQ(d.command_history()[0].force, Vec3{});
    EXPECT_NEAR(d.command_history()[1].force.x, 8.0, 1e-12);
    EXPECT_LE(d.command_history()[1].force.norm(), 8.0);
}

TEST(ReplayDevice, YieldsExactlyTheLogThenEnds)
{
    std::vector<DeviceSample> log{{0.0, {0.01, 0, 0}, {}, false},
                                  {0.001, {0.02, 0, 0}, {1, 0, 0}, true},
                                  {0.002, {0.03, 0, 0}, {2, 0, 0}, false}};
    ReplayDevice d(log, desc());
    for (const auto& expected : log) {
        const auto s = d.sample();
        ASSERT_TRUE(s);
        EXPECT_EQ(*s, expected);
    }
    EXPECT_FALSE(d.sample());
    // Commands after the end of input are refused: the loop pauses.
    EXPECT_EQ(d.command_force({{1, 0, 0}}), DispatchStatus::Disconnected);
}

TEST(VelocityEstimator, FirstUpdateIsZeroThenFilters)
{
    VelocityEstimator v(1e-3, 50.0);
    EXPECT_EQ(v.update({1, 0, 0}), Vec3{});
    const double tau = 1.0 / (2.0 * 3.141592653589793 * 50.0);
    const double alpha = 1e-3 / (1e-3 + tau);
    const Vec3 e = v.update({1.001, 0, 0});
    EXPECT_NEAR(e.x, alpha * 1.0, 1e-12);
    v.reset();
    EXPECT_EQ(v.update({5, 5, 5}), Vec3{});
}

TEST(NetworkPointer, WorkspaceMapping)
{
    EXPECT_EQ(pointer_to_workspace({1, 0, 0}, 0.06), (Vec3{0.06, 0, 0}));
    EXPECT_EQ(pointer_to_workspace({-2, 0.5, 3}, 0.06), (Vec3{-0.06, 0.03, 0.06}));
    EXPECT_EQ(pointer_to_workspace({std::nan(""), 0, 0}, 0.06), (Vec3{0, 0, 0}));
}

TEST(NetworkPointer, LatestWinsAndHoldsLastPosition)
{
    NetworkPointerDevice d(desc(), 1e-3);
    EXPECT_EQ(d.sample()->pos, Vec3{});
    d.post_pointer({0.5, 0, 0});
    d.post_pointer({1, 0, 0});
    EXPECT_EQ(d.sample()->pos, (Vec3{0.06, 0, 0}));
    EXPECT_EQ(d.sample()->pos, (Vec3{0.06, 0, 0})); // no update: held
    d.disconnect();
    EXPECT_FALSE(d.sample());
}

TEST(NetworkPointer, SharedMailboxFromAnotherThread)
{
    auto box = std::make_shared<PointerMailbox>();
    NetworkPointerDevice d(desc(), 1e-3, box);
    std::thread writer([&] {
        for (int i = 0; i <= 100; ++i) {
            box->post({i / 100.0, 0, 0});
        }
    });
    writer.join();
    EXPECT_EQ(d.sample()->pos, (Vec3{0.06, 0, 0}));
}

TEST(DualRig, RestPoseAndMirror)
{
    const DeviceSample origin{0.0, {}, {}, false};
    const auto rest = dual_rig_sample(origin, origin, 0.15);
    EXPECT_EQ(rest.left.pos, (Vec3{-0.15, 0, 0}));
    EXPECT_EQ(rest.right.pos, (Vec3{0.15, 0, 0}));

    const DeviceSample moved{0.0, {0.01, 0, 0}, {}, false};
    const auto w = dual_rig_sample(origin, moved, 0.15);
    EXPECT_NEAR(w.right.pos.x - 0.15, -0.01, 1e-15);
    EXPECT_EQ(mirror_x(mirror_x(Vec3{1, 2, 3})), (Vec3{1, 2, 3}));
}

TEST(DualRig, EndsWhenEitherDeviceEnds)
{
    auto left = std::make_unique<ScriptedDevice>(Script{{0.0, {}}, {0.002, {}}}, desc(), 1e-3, ScriptEnd::Exhaust);
    auto right = std::make_unique<ScriptedDevice>(Script{{0.0, {}}}, desc(), 1e-3, ScriptEnd::Hold);
    DualRig rig(std::move(left), std::move(right), 0.15);
    int ticks = 0;
    while (rig.sample()) {
        ++ticks;
    }
    EXPECT_EQ(ticks, 3);
}

TEST(DualRig, CommandMirrorsRightForceAndClamps)
{
    auto left = std::make_unique<ScriptedDevice>(Script{{0.0, {}}}, desc(), 1e-3);
    auto right = std::make_unique<ScriptedDevice>(Script{{0.0, {}}}, desc(), 1e-3);
    DualRig rig(std::move(left), std::move(right), 0.15);
    const std::vector<ForceCommand> world{{{1, 2, 0}}, {{3, 0, 20}}};
    const auto local = rig.command(world);
    ASSERT_TRUE(local);
    EXPECT_EQ((*local)[0].force, (Vec3{1, 2, 0}));
    EXPECT_LT((*local)[1].force.x, 0.0);
    EXPECT_LE((*local)[1].force.norm(), 8.0);
}

TEST(DeviceForceSafety, PropertyRandomCommandsNeverExceedClamp)
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> d(-1000.0, 1000.0);
    std::uniform_real_distribution<double> lim(0.5, 12.0);
    for (int k = 0; k < 20; ++k) {
        const double max_n = lim(rng);
        ScriptedDevice dev({{0.0, {}}}, desc(0.06, max_n), 1e-3);
        for (int i = 0; i < 500; ++i) {
            dev.command_force({{d(rng), d(rng), d(rng)}});
        }
        for (const auto& c : dev.command_history()) {
            ASSERT_LE(c.force.norm(), max_n);
        }
    }
}
