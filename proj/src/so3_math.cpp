#include "vscmg/so3_math.hpp"

#include <cmath>
#include <sstream>

namespace vscmg {

Mat3 skew(const Vec3& a)
{
    Mat3 m;
    m << 0.0, -a(2), a(1),
         a(2), 0.0, -a(0),
         -a(1), a(0), 0.0;
    return m;
}

namespace {

void check_norm(const Vec3& q)
{
    if (!q.allFinite()) {
        throw DomainError("reduced quaternion has non-finite components");
    }
    const double n = q.norm();
    if (n > 1.0 + kQuatNormSlack) {
        std::ostringstream os;
        os << "reduced quaternion norm " << n << " exceeds 1";
        throw DomainError(os.str());
    }
}

}  // namespace

double q0_of(const Vec3& q)
{
    check_norm(q);
    const double s = 1.0 - q.squaredNorm();
    return s > 0.0 ? std::sqrt(s) : 0.0;
}

Vec3 quat_rate(const Vec3& q, const Vec3& omega)
{
    const double q0 = q0_of(q);
    return 0.5 * (q0 * omega + skew(q) * omega);
}

Vec3 clamp_reduced_quaternion(const Vec3& q)
{
    check_norm(q);
    const double n = q.norm();
    return n > 1.0 ? Vec3(q / n) : q;
}

}  // namespace vscmg
