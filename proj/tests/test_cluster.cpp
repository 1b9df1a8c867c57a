#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "vscmg/cluster.hpp"

using namespace vscmg;

namespace {

const double kTheta = fixtures::deg(54.75);

void expect_triads(const ClusterState& st, const MatX& ag, double tol)
{
    for (Eigen::Index i = 0; i < ag.cols(); ++i) {
        const Vec3 g = ag.col(i), s = st.spin_axes.col(i), t = st.transverse_axes.col(i);
        EXPECT_NEAR(s.norm(), 1.0, tol);
        EXPECT_NEAR(t.norm(), 1.0, tol);
        EXPECT_NEAR(g.dot(s), 0.0, tol);
        EXPECT_NEAR(g.dot(t), 0.0, tol);
        EXPECT_NEAR(s.dot(t), 0.0, tol);
        EXPECT_LE((g.cross(s) - t).norm(), tol);
    }
}

}  // namespace

TEST(Pyramid, GimbalAxesColumns)
{
    const ClusterParams c = pyramid_config(kTheta);
    ASSERT_EQ(c.count(), 4);
    const double s = std::sin(kTheta), co = std::cos(kTheta);
    EXPECT_EQ(c.gimbal_axes.col(0), Vec3(s, 0.0, co));
    EXPECT_EQ(c.gimbal_axes.col(1), Vec3(0.0, s, co));
    EXPECT_EQ(c.gimbal_axes.col(2), Vec3(-s, 0.0, co));
    EXPECT_EQ(c.gimbal_axes.col(3), Vec3(0.0, -s, co));
    EXPECT_NEAR(c.gimbal_axes(0, 0), 0.81664, 1e-5);
    EXPECT_NEAR(c.gimbal_axes(2, 0), 0.57715, 1e-5);
}

TEST(Pyramid, SpinAxesAtZeroGimbalAngle)
{
    const ClusterParams c = pyramid_config(kTheta);
    MatX expected(3, 4);
    expected << 0, -1, 0, 1,
                1, 0, -1, 0,
                0, 0, 0, 0;
    EXPECT_EQ(c.spin_axes0, expected);
    EXPECT_EQ(axes_of(c, VecX::Zero(4)).spin_axes, expected);
}

TEST(Pyramid, TransverseAxisIsCrossProduct)
{
    const ClusterParams c = pyramid_config(kTheta);
    const Vec3 t1 = c.transverse_axes0.col(0);
    EXPECT_LE((t1 - Vec3(-std::cos(kTheta), 0.0, std::sin(kTheta))).norm(), 1e-15);
}

TEST(Pyramid, DefaultInertias)
{
    const ClusterParams c = pyramid_config(kTheta);
    EXPECT_EQ(c.spin_inertia, VecX::Constant(4, 0.7));
    EXPECT_EQ(c.gimbal_inertia, VecX::Constant(4, 0.1));
    EXPECT_EQ(c.transverse_inertia, c.spin_inertia);
    EXPECT_NO_THROW(c.validate());
}

TEST(AxesOf, ZeroAngleReturnsInitialAxes)
{
    const ClusterParams c = pyramid_config(kTheta);
    const ClusterState st = axes_of(c, VecX::Zero(4));
    EXPECT_EQ(st.spin_axes, c.spin_axes0);
    EXPECT_LE((st.transverse_axes - c.transverse_axes0).norm(), 1e-15);
}

TEST(AxesOf, QuarterTurn)
{
    const ClusterParams c = pyramid_config(kTheta);
    const ClusterState st = axes_of(c, VecX::Constant(4, M_PI / 2));
    EXPECT_LE((st.spin_axes - c.transverse_axes0).norm(), 1e-15);
    EXPECT_LE((st.transverse_axes + c.spin_axes0).norm(), 1e-15);
}

TEST(AxesOf, Periodic)
{
    const ClusterParams c = pyramid_config(kTheta);
    std::mt19937_64 rng(21);
    for (int i = 0; i < 200; ++i) {
        const VecX g = fixtures::random_vec(rng, 4, 10.0);
        const ClusterState a = axes_of(c, g);
        const ClusterState b = axes_of(c, (g.array() + 2.0 * M_PI).matrix());
        EXPECT_LE((a.spin_axes - b.spin_axes).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((a.transverse_axes - b.transverse_axes).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(AxesOf, TriadsForRandomAngles)
{
    const ClusterParams c = pyramid_config(kTheta);
    std::mt19937_64 rng(22);
    for (int i = 0; i < 1000; ++i) {
        const ClusterState st = retarget_transverse(axes_of(c, fixtures::random_vec(rng, 4, 50.0)),
                                                    c.gimbal_axes);
        expect_triads(st, c.gimbal_axes, 1e-12);
    }
}

TEST(AxesOf, KeepsAnglesUnwrapped)
{
    const ClusterParams c = pyramid_config(kTheta);
    VecX g(4);
    g << -1.0, 7.0, 0.5, 13.0;
    const ClusterState st = axes_of(c, g);
    EXPECT_EQ(st.gimbal_angles, g);
    const VecX w = st.wrapped_angles();
    for (int i = 0; i < 4; ++i) {
        EXPECT_GE(w(i), 0.0);
        EXPECT_LT(w(i), 2.0 * M_PI);
        EXPECT_NEAR(std::remainder(w(i) - g(i), 2.0 * M_PI), 0.0, 1e-12);
    }
}

TEST(WrapTwoPi, EdgeValues)
{
    VecX g(4);
    g << 0.0, 2.0 * M_PI, -1e-18, -2.0 * M_PI;
    const VecX w = wrap_two_pi(g);
    for (int i = 0; i < 4; ++i) {
        EXPECT_GE(w(i), 0.0);
        EXPECT_LT(w(i), 2.0 * M_PI);
    }
}

TEST(RetargetTransverse, IdempotentOnOrthonormalState)
{
    const ClusterParams c = pyramid_config(kTheta);
    const ClusterState st = axes_of(c, VecX::Constant(4, 0.3));
    const ClusterState r = retarget_transverse(st, c.gimbal_axes);
    EXPECT_LE((r.spin_axes - st.spin_axes).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((r.transverse_axes - st.transverse_axes).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RetargetTransverse, RenormalizesPerturbedSpinAxes)
{
    const ClusterParams c = pyramid_config(kTheta);
    ClusterState st = axes_of(c, VecX::Zero(4));
    st.spin_axes *= 1.0 + 1e-7;
    const ClusterState r = retarget_transverse(st, c.gimbal_axes);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.spin_axes.col(i).norm(), 1.0, 1e-15);
}

TEST(RetargetTransverse, RandomPerturbationsPassInvariantChecker)
{
    const ClusterParams c = pyramid_config(kTheta);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        ClusterState st = axes_of(c, fixtures::random_vec(rng, 4, M_PI));
        // Stay in the gimbal plane: the retarget does not remove out-of-plane drift.
        for (int i = 0; i < 4; ++i) {
            st.spin_axes.col(i) += 1e-7 * u(rng) * st.spin_axes.col(i) +
                                   1e-7 * u(rng) * st.transverse_axes.col(i);
        }
        st.transverse_axes += 1e-7 * MatX::Random(3, 4);
        expect_triads(retarget_transverse(st, c.gimbal_axes), c.gimbal_axes, 1e-14);
    }
}

TEST(RetargetTransverse, DegenerateAxis)
{
    const ClusterParams c = pyramid_config(kTheta);
    ClusterState st = axes_of(c, VecX::Zero(4));
    st.spin_axes.col(2) *= 0.4;
    EXPECT_THROW(retarget_transverse(st, c.gimbal_axes), DegenerateAxis);
}

TEST(ClusterValidate, RejectsBrokenInvariants)
{
    const ClusterParams good = pyramid_config(kTheta);

    ClusterParams c = good;
    c.gimbal_axes(0, 0) += 1e-9;
    EXPECT_THROW(c.validate(), ValidationError);

    c = good;
    c.transverse_axes0.col(1) *= -1.0;  // left-handed triad
    EXPECT_THROW(c.validate(), ValidationError);

    c = good;
    c.spin_axes0.col(0) = c.gimbal_axes.col(0);
    EXPECT_THROW(c.validate(), ValidationError);

    c = good;
    c.gimbal_inertia(3) = 0.0;
    EXPECT_THROW(c.validate(), ValidationError);

    c = good;
    c.spin_inertia.resize(3);
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(ClusterFromAxes, DerivesTransverseAxes)
{
    const ClusterParams p = pyramid_config(kTheta);
    const ClusterParams c = ClusterParams::from_axes(p.gimbal_axes, p.spin_axes0, p.spin_inertia,
                                                     p.gimbal_inertia, p.transverse_inertia);
    EXPECT_LE((c.transverse_axes0 - p.transverse_axes0).norm(), 1e-15);
}

TEST(TotalInertia, ZeroClusterInertiaGivesBodyInertia)
{
    ClusterParams c = pyramid_config(kTheta);
    c.spin_inertia.setZero();
    c.gimbal_inertia.setZero();
    c.transverse_inertia.setZero();
    const Mat3 jb = fixtures::paper_body_inertia();
    EXPECT_EQ(total_inertia(jb, c, axes_of(c, VecX::Constant(4, 0.7))), jb);
}

TEST(TotalInertia, ExactlySymmetric)
{
    const ClusterParams c = pyramid_config(kTheta);
    std::mt19937_64 rng(24);
    for (int i = 0; i < 50; ++i) {
        const Mat3 j = total_inertia(fixtures::paper_body_inertia(), c,
                                     axes_of(c, fixtures::random_vec(rng, 4, M_PI)));
        EXPECT_EQ(j, j.transpose());
    }
}

TEST(TotalInertia, TraceIdentity)
{
    const ClusterParams c = pyramid_config(kTheta);
    const Mat3 jb = fixtures::paper_body_inertia();
    const Mat3 j = total_inertia(jb, c, axes_of(c, VecX::Zero(4)));
    const double expected = c.spin_inertia.sum() + c.gimbal_inertia.sum() +
                            c.transverse_inertia.sum();
    EXPECT_NEAR((j - jb).trace(), expected, 1e-12);
    EXPECT_NEAR(expected, 6.0, 1e-15);
}

TEST(TotalInertia, PositiveDefiniteForAllAngles)
{
    const ClusterParams c = pyramid_config(kTheta);
    std::mt19937_64 rng(25);
    for (int i = 0; i < 200; ++i) {
        const Mat3 j = total_inertia(fixtures::paper_body_inertia(), c,
                                     axes_of(c, fixtures::random_vec(rng, 4, M_PI)));
        EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat3>(j).eigenvalues().minCoeff(), 0.0);
    }
}

TEST(TotalMomentum, Cases)
{
    const ClusterParams c = pyramid_config(kTheta);
    const Mat3 jb = fixtures::paper_body_inertia();
    const ClusterState st = axes_of(c, VecX::Zero(4));
    EXPECT_EQ(total_momentum(jb, c, st, Vec3::Zero(), VecX::Zero(4), VecX::Zero(4)), Vec3::Zero());

    VecX ws = VecX::Zero(4);
    ws(0) = 3.0;
    const Vec3 h1 = total_momentum(jb, c, st, Vec3::Zero(), ws, VecX::Zero(4));
    EXPECT_LE((h1 - 0.7 * 3.0 * st.spin_axes.col(0)).norm(), 1e-15);

    // Spin-axis columns cancel pairwise at gamma = 0.
    const Vec3 h = total_momentum(jb, c, st, Vec3::Zero(), VecX::Constant(4, 2.0 * M_PI),
                                  VecX::Zero(4));
    EXPECT_LE(h.norm(), 1e-15);
}

TEST(AxisRates, IntegratedDerivativeMatchesClosedForm)
{
    // dA_s/dt = A_t diag(w_g), dA_t/dt = -A_s diag(w_g) for constant gimbal rates.
    const ClusterParams c = pyramid_config(kTheta);
    VecX wg(4);
    wg << 0.3, -0.7, 1.1, 0.05;
    MatX as = c.spin_axes0, at = c.transverse_axes0;
    auto rate = [&](const MatX& s, const MatX& t) {
        return std::pair<MatX, MatX>(t * wg.asDiagonal(), -s * wg.asDiagonal());
    };
    const double dt = 1e-3;
    for (int k = 0; k < 10000; ++k) {
        const auto [s1, t1] = rate(as, at);
        const auto [s2, t2] = rate(as + 0.5 * dt * s1, at + 0.5 * dt * t1);
        const auto [s3, t3] = rate(as + 0.5 * dt * s2, at + 0.5 * dt * t2);
        const auto [s4, t4] = rate(as + dt * s3, at + dt * t3);
        as += dt / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
        at += dt / 6.0 * (t1 + 2.0 * t2 + 2.0 * t3 + t4);
    }
    const ClusterState st = axes_of(c, wg * 10.0);
    for (int i = 0; i < 4; ++i) {
        EXPECT_LE((as.col(i) - st.spin_axes.col(i)).norm(), 1e-6);
        EXPECT_LE((at.col(i) - st.transverse_axes.col(i)).norm(), 1e-6);
    }
}
