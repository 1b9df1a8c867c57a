#pragma once

#include <functional>
#include <vector>

#include "vscmg/cluster.hpp"
#include "vscmg/types.hpp"

namespace vscmg {

/// Rigid spacecraft carrying a VSCMG cluster.
class SpacecraftParams {
public:
    SpacecraftParams() = default;
    /// Throws ValidationError unless body_inertia is symmetric positive definite
    /// and the cluster is valid.
    SpacecraftParams(const Mat3& body_inertia, ClusterParams cluster);

    const Mat3& body_inertia() const { return body_inertia_; }
    const Mat3& body_inertia_inv() const { return body_inertia_inv_; }
    const ClusterParams& cluster() const { return cluster_; }
    int unit_count() const { return cluster_.count(); }
    /// Dimension of the control state x = [w; w_s; w_g; q].
    int state_dim() const { return 2 * unit_count() + 6; }
    int input_dim() const { return 2 * unit_count(); }

private:
    Mat3 body_inertia_ = Mat3::Identity();
    Mat3 body_inertia_inv_ = Mat3::Identity();
    ClusterParams cluster_;
};

/// Simulator truth. x = [omega; wheel_speeds; gimbal_rates; q] plus the
/// (unwrapped) gimbal angles that the axis matrices depend on.
struct PlantState {
    Vec3 omega = Vec3::Zero();
    VecX wheel_speeds;
    VecX gimbal_rates;
    Vec3 q = Vec3::Zero();
    VecX gimbal_angles;

    static PlantState zero(int units);

    /// The 2N+6 control state vector (gimbal angles excluded).
    VecX control_vector() const;
    /// Inverse of control_vector(); gimbal angles are taken from `angles`.
    static PlantState from_control_vector(const VecX& x, const VecX& angles);

    bool all_finite() const;
};

/// Time derivative of every PlantState field (same layout).
using PlantStateDerivative = PlantState;

/// u = [t_s; t_g] in N m.
struct ControlInput {
    VecX wheel_torque;
    VecX gimbal_torque;

    static ControlInput zero(int units);
    static ControlInput from_vector(const VecX& u);
    VecX to_vector() const;
};

PlantStateDerivative state_derivative(const SpacecraftParams& p, const PlantState& x,
                                      const ControlInput& u, const Vec3& external_torque);

/// Classical RK4 with u and the external torque held over the step.
PlantState rk4_step(const SpacecraftParams& p, const PlantState& x, const ControlInput& u,
                    const Vec3& external_torque, double dt);

/// Body-frame total angular momentum of a plant state.
Vec3 plant_momentum(const SpacecraftParams& p, const PlantState& x);

struct TrajectoryPoint {
    double t = 0.0;
    PlantState x;
    ControlInput u;
};

using ControlPolicy = std::function<ControlInput(double, const PlantState&)>;
using TorquePolicy = std::function<Vec3(double)>;

/// Fixed-step propagation from t = 0 to t_end. The control policy is sampled at
/// the start of each step. Throws DivergenceError on a non-finite state.
std::vector<TrajectoryPoint> propagate(const SpacecraftParams& p, const PlantState& x0,
                                       const ControlPolicy& control,
                                       const TorquePolicy& external_torque, double dt,
                                       double t_end);

}  // namespace vscmg
