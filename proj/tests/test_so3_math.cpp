#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "vscmg/so3_math.hpp"

using namespace vscmg;

namespace {

// Full unit-quaternion kinematics, scalar first: p = (p0, pv).
Eigen::Vector4d full_rate(const Eigen::Vector4d& p, const Vec3& w)
{
    const Vec3 pv = p.tail<3>();
    Eigen::Vector4d d;
    d(0) = -0.5 * pv.dot(w);
    d.tail<3>() = 0.5 * (p(0) * w + pv.cross(w));
    return d;
}

Eigen::Vector4d full_rk4(const Eigen::Vector4d& p, const Vec3& w, double dt)
{
    const Eigen::Vector4d k1 = full_rate(p, w);
    const Eigen::Vector4d k2 = full_rate(p + 0.5 * dt * k1, w);
    const Eigen::Vector4d k3 = full_rate(p + 0.5 * dt * k2, w);
    const Eigen::Vector4d k4 = full_rate(p + dt * k3, w);
    return p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec3 reduced_rk4(const Vec3& q, const Vec3& w, double dt)
{
    const Vec3 k1 = quat_rate(q, w);
    const Vec3 k2 = quat_rate(q + 0.5 * dt * k1, w);
    const Vec3 k3 = quat_rate(q + 0.5 * dt * k2, w);
    const Vec3 k4 = quat_rate(q + dt * k3, w);
    return q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

TEST(Skew, ZeroVector)
{
    EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero());
}

TEST(Skew, UnitVectors)
{
    EXPECT_EQ(skew(Vec3::UnitX()) * Vec3::UnitY(), Vec3::UnitZ());
}

TEST(Skew, MatchesCrossProductComponentwise)
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        const Vec3 a = fixtures::random_vec3(rng, 1.0);
        const Vec3 b = fixtures::random_vec3(rng, 1.0);
        const Vec3 oracle(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2),
                          a(0) * b(1) - a(1) * b(0));
        EXPECT_LE((skew(a) * b - oracle).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Skew, AntisymmetricAndAnnihilatesItsVector)
{
    std::mt19937_64 rng(12);
    for (int i = 0; i < 200; ++i) {
        const Vec3 a = fixtures::random_vec3(rng, 3.0);
        const Mat3 s = skew(a);
        EXPECT_EQ(s + s.transpose(), Mat3::Zero());
        EXPECT_LE((s * a).norm(), 1e-15);
    }
}

TEST(Q0, Values)
{
    EXPECT_EQ(q0_of(Vec3::Zero()), 1.0);
    EXPECT_EQ(q0_of(Vec3(1.0, 0.0, 0.0)), 0.0);
    EXPECT_NEAR(q0_of(Vec3(0.1, 0.2, 0.2)), std::sqrt(0.91), 1e-15);
    EXPECT_NEAR(q0_of(Vec3(0.1, 0.2, 0.2)), 0.9539392014169456, 1e-15);
}

TEST(Q0, RejectsNormAboveOne)
{
    EXPECT_THROW(q0_of(Vec3(1.1, 0.0, 0.0)), DomainError);
    EXPECT_THROW(q0_of(Vec3(1.0 + 1e-9, 0.0, 0.0)), DomainError);
    EXPECT_THROW(q0_of(Vec3(std::nan(""), 0.0, 0.0)), DomainError);
    EXPECT_EQ(q0_of(Vec3(1.0 + 1e-13, 0.0, 0.0)), 0.0);
}

TEST(QuatRate, OriginIsHalfRate)
{
    const Vec3 w(0.3, -1.2, 2.5);
    EXPECT_EQ(quat_rate(Vec3::Zero(), w), Vec3(0.15, -0.6, 1.25));
}

TEST(QuatRate, ZeroRate)
{
    std::mt19937_64 rng(13);
    for (int i = 0; i < 50; ++i) {
        Vec3 q = fixtures::random_vec3(rng, 1.0);
        if (q.norm() > 1.0) q /= 2.0 * q.norm();
        EXPECT_EQ(quat_rate(q, Vec3::Zero()), Vec3::Zero());
    }
}

TEST(QuatRate, ExplicitMatrixAndFullQuaternionOracle)
{
    const Vec3 q(0.1, 0.0, 0.0);
    const Vec3 w(0.0, 0.0, 1.0);
    const double q0 = std::sqrt(1.0 - 0.01);
    Mat3 m;
    m << q0, -q(2), q(1),
         q(2), q0, -q(0),
         -q(1), q(0), q0;
    const Vec3 expected = 0.5 * m * w;
    EXPECT_LE((quat_rate(q, w) - expected).norm(), 1e-16);

    const double dt = 1e-6;
    Eigen::Vector4d p(q0, q(0), q(1), q(2));
    const Eigen::Vector4d fwd = full_rk4(p, w, dt);
    const Eigen::Vector4d bwd = full_rk4(p, w, -dt);
    const Vec3 fd = (fwd.tail<3>() - bwd.tail<3>()) / (2.0 * dt);
    EXPECT_LE((quat_rate(q, w) - fd).norm(), 1e-9);
}

TEST(QuatRate, RejectsNormAboveOne)
{
    EXPECT_THROW(quat_rate(Vec3(0.8, 0.8, 0.0), Vec3::UnitX()), DomainError);
}

TEST(QuatRate, IntegrationTracksFullQuaternion)
{
    // Slow tumble keeps q0 well away from zero where the reduced form is singular.
    const Vec3 w(0.004, -0.007, 0.005);
    Vec3 q(0.05, 0.02, -0.03);
    Eigen::Vector4d p(q0_of(q), q(0), q(1), q(2));
    const double dt = 0.01;
    for (int k = 0; k < 10000; ++k) {
        q = clamp_reduced_quaternion(reduced_rk4(q, w, dt));
        p = full_rk4(p, w, dt);
        ASSERT_LE(std::abs(q0_of(q) * q0_of(q) + q.squaredNorm() - 1.0), 1e-9);
    }
    EXPECT_LE((q - p.tail<3>()).norm(), 1e-9);
    EXPECT_NEAR(q0_of(q), p(0), 1e-9);
}

TEST(ClampReducedQuaternion, Policy)
{
    const Vec3 inside(0.3, 0.4, 0.5);
    EXPECT_EQ(clamp_reduced_quaternion(inside), inside);
    const Vec3 just_out = Vec3(1.0 + 5e-13, 0.0, 0.0);
    EXPECT_EQ(clamp_reduced_quaternion(just_out).norm(), 1.0);
    EXPECT_THROW(clamp_reduced_quaternion(Vec3(1.0 + 1e-10, 0.0, 0.0)), DomainError);
}
