#include "vscmg/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "vscmg/so3_math.hpp"

namespace vscmg {

SpacecraftParams::SpacecraftParams(const Mat3& body_inertia, ClusterParams cluster)
    : body_inertia_(body_inertia), cluster_(std::move(cluster))
{
    if (!body_inertia.allFinite()) {
        throw ValidationError("J_b has non-finite entries");
    }
    if ((body_inertia - body_inertia.transpose()).cwiseAbs().maxCoeff() != 0.0) {
        throw ValidationError("J_b must be symmetric");
    }
    const Eigen::LDLT<Mat3> ldlt(body_inertia);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        Eigen::SelfAdjointEigenSolver<Mat3>(body_inertia, Eigen::EigenvaluesOnly)
                .eigenvalues()
                .minCoeff() <= 0.0) {
        throw ValidationError("J_b must be positive definite");
    }
    body_inertia_inv_ = ldlt.solve(Mat3::Identity());
    // Symmetrize the factorized inverse so J_b^-1 is exactly symmetric.
    body_inertia_inv_ = 0.5 * (body_inertia_inv_ + body_inertia_inv_.transpose()).eval();
    cluster_.validate();
}

PlantState PlantState::zero(int units)
{
    PlantState s;
    s.wheel_speeds = VecX::Zero(units);
    s.gimbal_rates = VecX::Zero(units);
    s.gimbal_angles = VecX::Zero(units);
    return s;
}

VecX PlantState::control_vector() const
{
    const auto n = wheel_speeds.size();
    VecX x(2 * n + 6);
    x << omega, wheel_speeds, gimbal_rates, q;
    return x;
}

PlantState PlantState::from_control_vector(const VecX& x, const VecX& angles)
{
    const auto n = angles.size();
    PlantState s;
    s.omega = x.head<3>();
    s.wheel_speeds = x.segment(3, n);
    s.gimbal_rates = x.segment(3 + n, n);
    s.q = x.segment<3>(3 + 2 * n);
    s.gimbal_angles = angles;
    return s;
}

bool PlantState::all_finite() const
{
    return omega.allFinite() && wheel_speeds.allFinite() && gimbal_rates.allFinite() &&
           q.allFinite() && gimbal_angles.allFinite();
}

ControlInput ControlInput::zero(int units)
{
    return {VecX::Zero(units), VecX::Zero(units)};
}

ControlInput ControlInput::from_vector(const VecX& u)
{
    const auto n = u.size() / 2;
    return {u.head(n), u.tail(n)};
}

VecX ControlInput::to_vector() const
{
    VecX u(wheel_torque.size() + gimbal_torque.size());
    u << wheel_torque, gimbal_torque;
    return u;
}

PlantStateDerivative state_derivative(const SpacecraftParams& p, const PlantState& x,
                                      const ControlInput& u, const Vec3& external_torque)
{
    const ClusterParams& c = p.cluster();
    const ClusterState axes = axes_of(c, x.gimbal_angles);

    const VecX hs = c.spin_inertia.cwiseProduct(x.wheel_speeds);
    const VecX hg = c.gimbal_inertia.cwiseProduct(x.gimbal_rates);
    const Vec3 h = p.body_inertia() * x.omega + axes.spin_axes * hs + c.gimbal_axes * hg;

    // A_t J_s diag(w_s) w_g
    const Vec3 gyro = axes.transverse_axes * hs.cwiseProduct(x.gimbal_rates);
    const Vec3 torque = axes.spin_axes * u.wheel_torque + c.gimbal_axes * u.gimbal_torque +
                        external_torque;

    PlantStateDerivative d;
    d.omega = p.body_inertia_inv() * (torque - gyro - x.omega.cross(h));
    d.wheel_speeds = -u.wheel_torque.cwiseQuotient(c.spin_inertia);
    d.gimbal_rates = -u.gimbal_torque.cwiseQuotient(c.gimbal_inertia);
    d.q = quat_rate(x.q, x.omega);
    d.gimbal_angles = x.gimbal_rates;
    return d;
}

namespace {

PlantState axpy(const PlantState& x, double a, const PlantStateDerivative& d)
{
    PlantState y;
    y.omega = x.omega + a * d.omega;
    y.wheel_speeds = x.wheel_speeds + a * d.wheel_speeds;
    y.gimbal_rates = x.gimbal_rates + a * d.gimbal_rates;
    y.q = x.q + a * d.q;
    y.gimbal_angles = x.gimbal_angles + a * d.gimbal_angles;
    return y;
}

}  // namespace

PlantState rk4_step(const SpacecraftParams& p, const PlantState& x, const ControlInput& u,
                    const Vec3& external_torque, double dt)
{
    if (!(dt > 0.0)) {
        throw ValidationError("integration step must be positive");
    }
    const auto k1 = state_derivative(p, x, u, external_torque);
    const auto k2 = state_derivative(p, axpy(x, 0.5 * dt, k1), u, external_torque);
    const auto k3 = state_derivative(p, axpy(x, 0.5 * dt, k2), u, external_torque);
    const auto k4 = state_derivative(p, axpy(x, dt, k3), u, external_torque);

    const double w = dt / 6.0;
    PlantState y;
    y.omega = x.omega + w * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega);
    y.wheel_speeds = x.wheel_speeds + w * (k1.wheel_speeds + 2.0 * k2.wheel_speeds +
                                           2.0 * k3.wheel_speeds + k4.wheel_speeds);
    y.gimbal_rates = x.gimbal_rates + w * (k1.gimbal_rates + 2.0 * k2.gimbal_rates +
                                           2.0 * k3.gimbal_rates + k4.gimbal_rates);
    y.q = x.q + w * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    y.gimbal_angles = x.gimbal_angles + w * (k1.gimbal_angles + 2.0 * k2.gimbal_angles +
                                             2.0 * k3.gimbal_angles + k4.gimbal_angles);
    y.q = clamp_reduced_quaternion(y.q);
    return y;
}

Vec3 plant_momentum(const SpacecraftParams& p, const PlantState& x)
{
    return total_momentum(p.body_inertia(), p.cluster(), axes_of(p.cluster(), x.gimbal_angles),
                          x.omega, x.wheel_speeds, x.gimbal_rates);
}

std::vector<TrajectoryPoint> propagate(const SpacecraftParams& p, const PlantState& x0,
                                       const ControlPolicy& control,
                                       const TorquePolicy& external_torque, double dt,
                                       double t_end)
{
    if (!(dt > 0.0)) {
        throw ValidationError("integration step must be positive");
    }
    if (!(t_end >= 0.0)) {
        throw ValidationError("end time must be non-negative");
    }
    // Step count from the ratio, so accumulated time never drifts past t_end.
    const auto steps = static_cast<long>(std::llround(std::floor(t_end / dt + 1e-9)));
    std::vector<TrajectoryPoint> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);

    PlantState x = x0;
    for (long k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        const ControlInput u = control(t, x);
        traj.push_back({t, x, u});
        if (k == steps) break;
        try {
            x = rk4_step(p, x, u, external_torque(t), dt);
        } catch (const DomainError& e) {
            std::ostringstream os;
            os << e.what() << " at t = " << (t + dt);
            throw DivergenceError(os.str());
        }
        if (!x.all_finite()) {
            std::ostringstream os;
            os << "state became non-finite at t = " << (t + dt);
            throw DivergenceError(os.str());
        }
    }
    return traj;
}

}  // namespace vscmg
