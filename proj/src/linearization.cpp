#include "vscmg/linearization.hpp"

#include <limits>

#include "vscmg/so3_math.hpp"

namespace vscmg {

JacobianBlocks jac_blocks(const SpacecraftParams& p, const PlantState& x)
{
    const ClusterParams& c = p.cluster();
    const ClusterState axes = axes_of(c, x.gimbal_angles);
    const Mat3& jb = p.body_inertia();
    const Mat3& jb_inv = p.body_inertia_inv();

    const VecX hs = c.spin_inertia.cwiseProduct(x.wheel_speeds);
    const VecX hg = c.gimbal_inertia.cwiseProduct(x.gimbal_rates);
    const Mat3 w_x = skew(x.omega);

    JacobianBlocks f;
    f.f11 = jb_inv * (skew(axes.spin_axes * hs) + skew(c.gimbal_axes * hg) - w_x * jb +
                      skew(jb * x.omega));

    // A_t J_s diag(v) scales column i of A_t by J_s,i v_i.
    const MatX at_js_wg = axes.transverse_axes * c.spin_inertia.cwiseProduct(x.gimbal_rates).asDiagonal();
    const MatX at_js_ws = axes.transverse_axes * hs.asDiagonal();
    f.f12 = -jb_inv * (at_js_wg + w_x * axes.spin_axes * c.spin_inertia.asDiagonal());
    f.f13 = -jb_inv * (at_js_ws + w_x * c.gimbal_axes * c.gimbal_inertia.asDiagonal());

    f.f41 = 0.5 * (Mat3::Identity() + skew(x.q));
    f.f44 = -0.5 * w_x;
    return f;
}

LtvModel build_ltv(const SpacecraftParams& p, const PlantState& x, double timestamp)
{
    const int n_units = p.unit_count();
    const int n = p.state_dim();
    const int m = p.input_dim();
    const int i_ws = 3;
    const int i_wg = 3 + n_units;
    const int i_q = 3 + 2 * n_units;

    const JacobianBlocks f = jac_blocks(p, x);
    const ClusterParams& c = p.cluster();
    const ClusterState axes = axes_of(c, x.gimbal_angles);

    LtvModel model;
    model.timestamp = timestamp;
    model.a = MatX::Zero(n, n);
    model.a.block(0, 0, 3, 3) = f.f11;
    model.a.block(0, i_ws, 3, n_units) = f.f12;
    model.a.block(0, i_wg, 3, n_units) = f.f13;
    model.a.block(i_q, 0, 3, 3) = f.f41;
    model.a.block(i_q, i_q, 3, 3) = f.f44;

    model.b = MatX::Zero(n, m);
    model.b.block(0, 0, 3, n_units) = p.body_inertia_inv() * axes.spin_axes;
    model.b.block(0, n_units, 3, n_units) = p.body_inertia_inv() * c.gimbal_axes;
    model.b.block(i_ws, 0, n_units, n_units) =
        (-c.spin_inertia.cwiseInverse()).asDiagonal().toDenseMatrix();
    model.b.block(i_wg, n_units, n_units, n_units) =
        (-c.gimbal_inertia.cwiseInverse()).asDiagonal().toDenseMatrix();

    model.c = MatX::Zero(n, 3);
    model.c.block(0, 0, 3, 3) = p.body_inertia_inv();
    return model;
}

int controllability_rank(const MatX& a, const MatX& b)
{
    const auto n = a.rows();
    const auto m = b.cols();
    if (n == 0) return 0;
    MatX ctrb(n, n * m);
    MatX block = b;
    for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.middleCols(k * m, m) = block;
        block = (a * block).eval();
    }
    const Eigen::JacobiSVD<MatX> svd(ctrb);
    const VecX& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) ++rank;
    }
    return rank;
}

}  // namespace vscmg
