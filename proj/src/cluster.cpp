#include "vscmg/cluster.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vscmg {

namespace {

constexpr double kTriadTol = 1e-12;

Vec3 column(const MatX& m, int i) { return m.col(i).head<3>(); }

[[noreturn]] void invalid(const std::string& what, int unit)
{
    std::ostringstream os;
    os << "cluster unit " << (unit + 1) << ": " << what;
    throw ValidationError(os.str());
}

}  // namespace

void ClusterParams::validate() const
{
    const auto n = gimbal_axes.cols();
    if (n < 1) {
        throw ValidationError("cluster must contain at least one unit");
    }
    if (gimbal_axes.rows() != 3 || spin_axes0.rows() != 3 || transverse_axes0.rows() != 3) {
        throw ValidationError("axis matrices must have 3 rows");
    }
    if (spin_axes0.cols() != n || transverse_axes0.cols() != n) {
        throw ValidationError("axis matrices must have the same column count");
    }
    if (spin_inertia.size() != n || gimbal_inertia.size() != n || transverse_inertia.size() != n) {
        throw ValidationError("inertia diagonals must have one entry per unit");
    }
    for (int i = 0; i < n; ++i) {
        const Vec3 g = column(gimbal_axes, i);
        const Vec3 s = column(spin_axes0, i);
        const Vec3 t = column(transverse_axes0, i);
        if (!g.allFinite() || !s.allFinite() || !t.allFinite()) {
            invalid("non-finite axis", i);
        }
        if (std::abs(g.norm() - 1.0) > kTriadTol) invalid("gimbal axis not unit length", i);
        if (std::abs(s.norm() - 1.0) > kTriadTol) invalid("spin axis not unit length", i);
        if (std::abs(t.norm() - 1.0) > kTriadTol) invalid("transverse axis not unit length", i);
        if (std::abs(g.dot(s)) > kTriadTol) invalid("gimbal and spin axes not orthogonal", i);
        if (std::abs(g.dot(t)) > kTriadTol) invalid("gimbal and transverse axes not orthogonal", i);
        if (std::abs(s.dot(t)) > kTriadTol) invalid("spin and transverse axes not orthogonal", i);
        if ((g.cross(s) - t).norm() > kTriadTol) invalid("transverse axis is not g x s", i);
        if (!(spin_inertia(i) > 0.0)) invalid("spin inertia must be positive", i);
        if (!(gimbal_inertia(i) > 0.0)) invalid("gimbal inertia must be positive", i);
        if (!(transverse_inertia(i) > 0.0)) invalid("transverse inertia must be positive", i);
    }
}

ClusterParams ClusterParams::from_axes(const MatX& gimbal_axes, const MatX& spin_axes0,
                                       const VecX& spin_inertia, const VecX& gimbal_inertia,
                                       const VecX& transverse_inertia)
{
    ClusterParams p;
    p.gimbal_axes = gimbal_axes;
    p.spin_axes0 = spin_axes0;
    p.transverse_axes0.resize(3, gimbal_axes.cols());
    if (spin_axes0.cols() == gimbal_axes.cols() && gimbal_axes.rows() == 3 && spin_axes0.rows() == 3) {
        for (int i = 0; i < gimbal_axes.cols(); ++i) {
            p.transverse_axes0.col(i) = column(gimbal_axes, i).cross(column(spin_axes0, i));
        }
    }
    p.spin_inertia = spin_inertia;
    p.gimbal_inertia = gimbal_inertia;
    p.transverse_inertia = transverse_inertia;
    return p;
}

VecX wrap_two_pi(const VecX& angles)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    VecX out(angles.size());
    for (Eigen::Index i = 0; i < angles.size(); ++i) {
        double a = std::fmod(angles(i), two_pi);
        if (a < 0.0) a += two_pi;
        // fmod of a value a hair below a multiple of 2pi can round up to 2pi
        if (a >= two_pi) a = 0.0;
        out(i) = a;
    }
    return out;
}

VecX ClusterState::wrapped_angles() const { return wrap_two_pi(gimbal_angles); }

ClusterState axes_of(const ClusterParams& params, const VecX& gimbal_angles)
{
    const int n = params.count();
    ClusterState st;
    st.gimbal_angles = gimbal_angles;
    st.spin_axes.resize(3, n);
    st.transverse_axes.resize(3, n);
    for (int i = 0; i < n; ++i) {
        const double c = std::cos(gimbal_angles(i));
        const double s = std::sin(gimbal_angles(i));
        st.spin_axes.col(i) = params.spin_axes0.col(i) * c + params.transverse_axes0.col(i) * s;
        st.transverse_axes.col(i) =
            column(params.gimbal_axes, i).cross(column(st.spin_axes, i));
    }
    return st;
}

ClusterState retarget_transverse(const ClusterState& state, const MatX& gimbal_axes)
{
    ClusterState out = state;
    for (int i = 0; i < gimbal_axes.cols(); ++i) {
        const Vec3 s = column(state.spin_axes, i);
        const double len = s.norm();
        if (!(len >= 0.5)) {
            std::ostringstream os;
            os << "spin axis " << (i + 1) << " has length " << len;
            throw DegenerateAxis(os.str());
        }
        const Vec3 su = s / len;
        out.spin_axes.col(i) = su;
        out.transverse_axes.col(i) = column(gimbal_axes, i).cross(su);
    }
    return out;
}

Mat3 total_inertia(const Mat3& body_inertia, const ClusterParams& params,
                   const ClusterState& state)
{
    // Sum of rank-one terms keeps the result exactly symmetric.
    Mat3 j = body_inertia;
    for (int i = 0; i < params.count(); ++i) {
        const Vec3 s = column(state.spin_axes, i);
        const Vec3 g = column(params.gimbal_axes, i);
        const Vec3 t = column(state.transverse_axes, i);
        j += params.spin_inertia(i) * (s * s.transpose());
        j += params.gimbal_inertia(i) * (g * g.transpose());
        j += params.transverse_inertia(i) * (t * t.transpose());
    }
    return j;
}

Vec3 total_momentum(const Mat3& body_inertia, const ClusterParams& params,
                    const ClusterState& state, const Vec3& omega, const VecX& wheel_speeds,
                    const VecX& gimbal_rates)
{
    const VecX hs = params.spin_inertia.cwiseProduct(wheel_speeds);
    const VecX hg = params.gimbal_inertia.cwiseProduct(gimbal_rates);
    return body_inertia * omega + state.spin_axes * hs + params.gimbal_axes * hg;
}

ClusterParams pyramid_config(double theta)
{
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    MatX ag(3, 4);
    ag << s, 0.0, -s, 0.0,
          0.0, s, 0.0, -s,
          c, c, c, c;
    MatX as0(3, 4);
    as0 << 0.0, -1.0, 0.0, 1.0,
           1.0, 0.0, -1.0, 0.0,
           0.0, 0.0, 0.0, 0.0;
    const VecX js = VecX::Constant(4, 0.7);
    const VecX jg = VecX::Constant(4, 0.1);
    return ClusterParams::from_axes(ag, as0, js, jg, js);
}

}  // namespace vscmg
