#pragma once

#include "vscmg/dynamics.hpp"
#include "vscmg/types.hpp"

namespace vscmg {

/// Analytic Jacobian blocks of the nonlinear model. The rate blocks are exact
/// partial derivatives of the body-rate equation; the quaternion blocks are
/// their first-order forms about the origin.
struct JacobianBlocks {
    Mat3 f11;  // d(omega_dot)/d(omega)
    MatX f12;  // d(omega_dot)/d(wheel speeds), 3xN
    MatX f13;  // d(omega_dot)/d(gimbal rates), 3xN
    Mat3 f41;  // 1/2 (I + skew(q))
    Mat3 f44;  // -1/2 skew(omega)
};

/// Linear time-varying model xdot = A x + B u + C t_e at one sampling instant.
/// State ordering [w; w_s; w_g; q], input ordering [t_s; t_g].
struct LtvModel {
    MatX a;
    MatX b;
    MatX c;
    double timestamp = 0.0;
};

JacobianBlocks jac_blocks(const SpacecraftParams& p, const PlantState& x);

LtvModel build_ltv(const SpacecraftParams& p, const PlantState& x, double timestamp = 0.0);

/// Numerical rank of [B, AB, ..., A^(n-1) B] with singular-value cutoff
/// n * eps * sigma_max.
int controllability_rank(const MatX& a, const MatX& b);
inline int controllability_rank(const LtvModel& model)
{
    return controllability_rank(model.a, model.b);
}

}  // namespace vscmg
