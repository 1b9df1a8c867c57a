#pragma once

#include "vscmg/types.hpp"

namespace vscmg {

/// Geometry and inertia of a cluster of N variable-speed CMGs.
///
/// Columns of the 3xN axis matrices are body-frame unit vectors: gimbal axes
/// (fixed), and the spin / transverse axes at zero gimbal angle. Inertias are
/// per-unit diagonals in kg m^2.
struct ClusterParams {
    MatX gimbal_axes;         // A_g
    MatX spin_axes0;          // A_s at gamma = 0
    MatX transverse_axes0;    // A_t at gamma = 0
    VecX spin_inertia;        // J_s diagonal
    VecX gimbal_inertia;      // J_g diagonal
    VecX transverse_inertia;  // J_t diagonal; only used by total_inertia()

    int count() const { return static_cast<int>(gimbal_axes.cols()); }

    /// Throws ValidationError naming the first violated invariant.
    void validate() const;

    /// Builds params from A_g and A_s0 alone, deriving A_t0 = g_i x s0_i.
    static ClusterParams from_axes(const MatX& gimbal_axes, const MatX& spin_axes0,
                                   const VecX& spin_inertia, const VecX& gimbal_inertia,
                                   const VecX& transverse_inertia);
};

/// Current axis matrices for a set of gimbal angles. The angles are kept
/// unwrapped; use wrapped_angles() for reporting.
struct ClusterState {
    VecX gimbal_angles;
    MatX spin_axes;        // A_s(gamma)
    MatX transverse_axes;  // A_t(gamma)

    VecX wrapped_angles() const;
};

/// Maps each angle into [0, 2pi).
VecX wrap_two_pi(const VecX& angles);

/// A_s = A_s0 cos(gamma) + A_t0 sin(gamma) column-wise, then t_i re-derived as g_i x s_i.
ClusterState axes_of(const ClusterParams& params, const VecX& gimbal_angles);

/// Renormalizes every spin axis and rebuilds t_i = g_i x s_i.
/// Throws DegenerateAxis when some |s_i| < 0.5.
ClusterState retarget_transverse(const ClusterState& state, const MatX& gimbal_axes);

/// J = J_b + A_s J_s A_s^T + A_g J_g A_g^T + A_t J_t A_t^T.
Mat3 total_inertia(const Mat3& body_inertia, const ClusterParams& params,
                   const ClusterState& state);

/// Body-frame angular momentum h = J_b w + A_s J_s w_s + A_g J_g w_g.
Vec3 total_momentum(const Mat3& body_inertia, const ClusterParams& params,
                    const ClusterState& state, const Vec3& omega, const VecX& wheel_speeds,
                    const VecX& gimbal_rates);

/// Four-unit pyramid with side angle theta (radians) to the base.
/// Spin inertia 0.7, gimbal inertia 0.1; transverse inertia defaults to the
/// spin inertia.
ClusterParams pyramid_config(double theta);

}  // namespace vscmg
