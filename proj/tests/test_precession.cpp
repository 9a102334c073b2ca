#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hlab/precession.hpp"

using namespace hlab;

namespace {

// A vertical couple on the handles gives a torque that stays horizontal and
// perpendicular to a horizontal axis however far the axis has precessed.
HandleForcePair vertical_couple(double torque, double d)
{
    const double f = torque / (2.0 * d);
    return {{0, 0, -f}, {0, 0, f}};
}

} // namespace

TEST(Gyro, MomentOfInertia)
{
    EXPECT_DOUBLE_EQ(moment_of_inertia(1.0, 0.2), 0.02);
    EXPECT_DOUBLE_EQ(moment_of_inertia(2.0, 0.2), 0.04);
    const auto s = make_gyro_state(GyroConfig{}, {2, 0, 0});
    EXPECT_EQ(s.axis, (Vec3{1, 0, 0}));
    EXPECT_DOUBLE_EQ(s.angular_momentum.x, 2.0);
    EXPECT_FALSE(s.free_rod);
}

TEST(Gyro, HandlesToTorque)
{
    const Vec3 t = handles_to_torque({0, -0.5, 0}, {0, 0.5, 0}, 0.15, {1, 0, 0});
    EXPECT_NEAR(t.x, 0.0, 1e-15);
    EXPECT_NEAR(t.y, 0.0, 1e-15);
    EXPECT_NEAR(t.z, 0.15, 1e-15);
    // Equal forces on both handles translate the pivot but do not turn it.
    EXPECT_EQ(handles_to_torque({0.3, 1, -2}, {0.3, 1, -2}, 0.15, {1, 0, 0}), Vec3{});
}

TEST(Gyro, PrecessionRate)
{
    EXPECT_DOUBLE_EQ(precession_rate(0.5, 2.0), 0.25);
    EXPECT_EQ(precession_rate(0.0, 2.0), 0.0);
    EXPECT_THROW(precession_rate(0.5, 0.0), UndefinedPrecessionError);
}

TEST(GyroStep, PrecessesAtTorqueOverMomentum)
{
    const GyroConfig cfg;
    GyroState s = make_gyro_state(cfg, {1, 0, 0});
    ASSERT_DOUBLE_EQ(s.angular_momentum.norm(), 2.0);
    const auto couple = vertical_couple(0.5, cfg.handle_half_length);
    const double dt = 1e-3;

    // Torque check: the couple really is 0.5 N*m perpendicular to the axis.
    const Vec3 tau = handles_to_torque(couple.left, couple.right, cfg.handle_half_length, s.axis);
    ASSERT_NEAR(tau.norm(), 0.5, 1e-12);
    ASSERT_NEAR(dot(tau, s.axis), 0.0, 1e-15);

    const double oracle = 0.5 / 2.0;
    const int revolution = static_cast<int>(std::ceil(2.0 * std::numbers::pi / oracle / dt));
    double swept = 0.0;
    double at_two_seconds = 0.0;
    double worst_axis = 0.0;
    double worst_momentum = 0.0;
    for (int i = 1; i <= revolution; ++i) {
        const GyroState next = gyro_step(cfg, s, couple, dt);
        swept += std::atan2(cross(s.axis, next.axis).z, dot(s.axis, next.axis));
        worst_axis = std::max(worst_axis, std::abs(next.axis.norm() - 1.0));
        worst_momentum = std::max(worst_momentum, std::abs(next.angular_momentum.norm() - s.angular_momentum.norm()));
        ASSERT_EQ(next.spin_rate, s.spin_rate);
        s = next;
        if (i == 2000) {
            at_two_seconds = std::abs(swept);
        }
    }
    EXPECT_NEAR(at_two_seconds, 0.5, 0.02 * 0.5);
    EXPECT_NEAR(std::abs(swept) / (revolution * dt), oracle, 0.02 * oracle);
    EXPECT_LT(worst_axis, 1e-9);
    EXPECT_LT(worst_momentum, 1e-9);
}

TEST(GyroStep, MomentumFollowsTorque)
{
    // dL/dt points along the applied torque (right-hand rule).
    const GyroConfig cfg;
    const GyroState s = make_gyro_state(cfg, {1, 0, 0});
    const auto couple = vertical_couple(0.5, cfg.handle_half_length);
    const Vec3 tau = handles_to_torque(couple.left, couple.right, cfg.handle_half_length, s.axis);
    const GyroState next = gyro_step(cfg, s, couple, 1e-3);
    const Vec3 dl = (next.angular_momentum - s.angular_momentum) / 1e-3;
    EXPECT_NEAR((dl - tau).norm(), 0.0, 1e-3);
    EXPECT_LT(tau.y, 0.0);
    EXPECT_LT(next.axis.y, 0.0);
}

TEST(GyroStep, NoTorqueOrParallelTorqueLeavesAxis)
{
    const GyroConfig cfg;
    const GyroState s = make_gyro_state(cfg, normalized(Vec3{1, 2, 3}));
    EXPECT_EQ(gyro_step(cfg, s, {}, 1e-3).axis, s.axis);
    // A twist about the axis itself: forces tangent to the wheel.
    const GyroState x = make_gyro_state(cfg, {1, 0, 0});
    const GyroState after = gyro_step(cfg, x, {{0, -1, 0}, {0, 1, 0}}, 1e-3);
    EXPECT_NE(after.axis, x.axis); // (0,1,0) at +x gives torque along z: not parallel
    const GyroState twisted = gyro_step(cfg, x, {{0, 0, 0}, {0, 0, 0}}, 1e-3);
    EXPECT_EQ(twisted.axis, x.axis);
    for (int i = 0; i < 100; ++i) {
        // right force radial along the axis: zero moment arm
        ASSERT_EQ(gyro_step(cfg, x, {{-3, 0, 0}, {3, 0, 0}}, 1e-3).axis, x.axis);
    }
}

TEST(GyroStep, PropertyUnitAxisAndConstantMomentum)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-8.0, 8.0);
    const GyroConfig cfg;
    GyroState s = make_gyro_state(cfg, normalized(Vec3{0.3, -0.7, 0.2}));
    const double l0 = s.angular_momentum.norm();
    for (int i = 0; i < 20000; ++i) {
        s = gyro_step(cfg, s, {{d(rng), d(rng), d(rng)}, {d(rng), d(rng), d(rng)}}, 1e-3);
        ASSERT_NEAR(s.axis.norm(), 1.0, 1e-9);
        ASSERT_NEAR(s.angular_momentum.norm(), l0, 1e-9);
    }
}

TEST(GyroStep, StoppedWheelIsAFreeRod)
{
    GyroConfig cfg;
    cfg.spin_rate = 0.0;
    const GyroState s = make_gyro_state(cfg, {1, 0, 0});
    EXPECT_TRUE(s.free_rod);
    const GyroState next = gyro_step(cfg, s, {{0, -0.1, 0}, {0, 0.1, 0}}, 1e-3);
    EXPECT_TRUE(next.free_rod);
    // Pushing the right handle toward +y swings the axis toward +y.
    EXPECT_GT(next.axis.y, 0.0);
    EXPECT_NEAR(next.axis.norm(), 1.0, 1e-15);
    EXPECT_THROW(gyro_step(cfg, s, {{std::nan(""), 0, 0}, {}}, 1e-3), StateCorruptionError);
}

TEST(HandleReaction, Magnitude)
{
    const GyroConfig cfg;
    const GyroState s = make_gyro_state(cfg, {1, 0, 0});
    const Vec3 rate{0, 0, 0.5};
    const auto r = handle_reaction(cfg, s, rate);
    // |rate x L| / (2 d) = 1.0 / 0.3
    EXPECT_NEAR(r.right.norm(), 1.0 / 0.3, 1e-12);
    EXPECT_NEAR(dot(r.right, s.axis), 0.0, 1e-15);
    EXPECT_EQ(r.left, -r.right);
    // the couple reproduces the torque rate x L
    const Vec3 tau = handles_to_torque(r.left, r.right, cfg.handle_half_length, s.axis);
    EXPECT_NEAR((tau - cross(rate, s.angular_momentum)).norm(), 0.0, 1e-12);

    GyroConfig longer = cfg;
    longer.handle_half_length = 0.3;
    EXPECT_NEAR(handle_reaction(longer, s, rate).right.norm(), r.right.norm() / 2.0, 1e-12);
    EXPECT_EQ(handle_reaction(cfg, s, {}).right.norm(), 0.0);
}

TEST(GyroConfig, Violations)
{
    EXPECT_TRUE(GyroConfig{}.violations().empty());
    GyroConfig c;
    c.spin_rate = 250.0;
    c.wheel_mass = 0.0;
    EXPECT_EQ(c.violations().size(), 2u);
    EXPECT_THROW(c.validate(), ConfigurationError);
}

// --- the lab ---------------------------------------------------------------

TEST(PrecessionLab, HandsAtRestPoseExertNothing)
{
    PrecessionLab lab(GyroConfig{}, {});
    const std::vector<DeviceSample> rest{{0.0, {-0.15, 0, 0}, {}, false}, {0.0, {0.15, 0, 0}, {}, false}};
    for (int i = 0; i < 500; ++i) {
        const auto fb = lab.step(rest, 1e-3);
        ASSERT_EQ(fb.size(), 2u);
        ASSERT_EQ(fb[0].coupling_on_proxy, Vec3{});
        ASSERT_EQ(fb[1].coupling_on_proxy, Vec3{});
    }
    EXPECT_EQ(lab.state().axis, (Vec3{1, 0, 0}));
    EXPECT_EQ(*lab.snapshot(0.5).hud_value("torque"), 0.0);
}

TEST(PrecessionLab, LiftingOneHandPrecessesSideways)
{
    PrecessionLab lab(GyroConfig{}, {});
    const std::vector<DeviceSample> lift{{0.0, {-0.15, 0, -0.005}, {}, false}, {0.0, {0.15, 0, 0.005}, {}, false}};
    for (int i = 0; i < 200; ++i) {
        lab.step(lift, 1e-3);
    }
    const Vec3 a = lab.state().axis;
    // The torque from lifting the right hand points along -y; the axis
    // swings toward it sideways.
    EXPECT_LT(a.y, 0.0);
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
}

TEST(PrecessionLab, ResetAndRetune)
{
    PrecessionLab lab(GyroConfig{}, {});
    const std::vector<DeviceSample> lift{{0.0, {-0.15, 0, -0.01}, {}, false}, {0.0, {0.15, 0, 0.01}, {}, false}};
    for (int i = 0; i < 100; ++i) {
        lab.step(lift, 1e-3);
    }
    GyroConfig faster;
    faster.spin_rate = 200.0;
    const Vec3 axis = lab.state().axis;
    lab.set_config(faster);
    EXPECT_EQ(lab.state().axis, axis);
    EXPECT_DOUBLE_EQ(lab.state().angular_momentum.norm(), 4.0);
    lab.reset();
    EXPECT_EQ(lab.state().axis, (Vec3{1, 0, 0}));
    faster.spin_rate = -1.0;
    EXPECT_THROW(lab.set_config(faster), ConfigurationError);
}
