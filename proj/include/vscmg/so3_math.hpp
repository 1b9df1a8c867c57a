#pragma once

#include "vscmg/types.hpp"

namespace vscmg {

/// Reduced quaternion norms may exceed one by at most this much (integration
/// round-off) before being treated as a domain violation.
inline constexpr double kQuatNormSlack = 1e-12;

/// Cross-product matrix: skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& a);

/// Scalar part q0 = sqrt(1 - |q|^2) of the unit quaternion whose vector part is q.
/// Throws DomainError when |q| > 1 + kQuatNormSlack.
double q0_of(const Vec3& q);

/// Kinematics of the reduced quaternion: qdot = 1/2 (q0 I + skew(q)) omega.
Vec3 quat_rate(const Vec3& q, const Vec3& omega);

/// Rescales q onto the unit sphere when it sits just outside it (within
/// kQuatNormSlack); throws DomainError for larger violations. Otherwise returns q.
Vec3 clamp_reduced_quaternion(const Vec3& q);

}  // namespace vscmg
