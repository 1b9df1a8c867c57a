#include "vscmg/pole_placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vscmg/linearization.hpp"

namespace vscmg {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

bool is_real(const Complex& z) { return z.imag() == 0.0; }

// One eigenvector slot of the assignment: a real pole owns one column of the
// real basis, a conjugate pair owns two ([Re x, Im x]).
struct Slot {
    Complex pole;      // imag >= 0 for pairs
    int column = 0;    // first column in the real basis
    int subspace = 0;  // index into the admissible subspace table
    int repeat = 0;    // occurrence index among equal poles
    bool pair() const { return !is_real(pole); }
};

std::vector<std::pair<std::size_t, std::size_t>> closest_matching(
    const std::vector<Complex>& a, const std::vector<Complex>& b)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::vector<bool> used_a(a.size(), false);
    std::vector<bool> used_b(b.size(), false);
    for (std::size_t round = 0; round < std::min(a.size(), b.size()); ++round) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0;
        std::size_t bj = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (used_a[i]) continue;
            for (std::size_t j = 0; j < b.size(); ++j) {
                if (used_b[j]) continue;
                const double d = std::abs(a[i] - b[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        used_a[bi] = true;
        used_b[bj] = true;
        out.emplace_back(bi, bj);
    }
    return out;
}

// Orthonormal basis of {x : U1^H (A - lambda I) x = 0}, i.e. the eigenvectors
// that some feedback can attach to lambda.
CMatX admissible_subspace(const MatX& a, const MatX& u1, const Complex& lambda)
{
    const auto n = a.rows();
    if (u1.cols() == 0) {
        return CMatX::Identity(n, n);
    }
    if (is_real(lambda)) {
        const MatX shifted = u1.transpose() * (a - lambda.real() * MatX::Identity(n, n));
        const Eigen::JacobiSVD<MatX> svd(shifted, Eigen::ComputeFullV);
        const VecX& sv = svd.singularValues();
        const double tol = static_cast<double>(std::max(shifted.rows(), shifted.cols())) * kEps *
                           (sv.size() > 0 ? sv(0) : 0.0);
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (sv(i) > tol) ++rank;
        }
        return svd.matrixV().rightCols(n - rank).cast<Complex>();
    }
    const CMatX shifted =
        u1.transpose().cast<Complex>() * (a.cast<Complex>() - lambda * CMatX::Identity(n, n));
    const Eigen::JacobiSVD<CMatX> svd(shifted, Eigen::ComputeFullV);
    const VecX& sv = svd.singularValues();
    const double tol = static_cast<double>(std::max(shifted.rows(), shifted.cols())) * kEps *
                       (sv.size() > 0 ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) ++rank;
    }
    return svd.matrixV().rightCols(n - rank);
}

MatX drop_columns(const MatX& x, int first, int count)
{
    const auto n = x.cols();
    MatX out(x.rows(), n - count);
    out.leftCols(first) = x.leftCols(first);
    out.rightCols(n - first - count) = x.rightCols(n - first - count);
    return out;
}

// Columns of the full Q factor orthogonal to range(others).
MatX orthogonal_complement(const MatX& others)
{
    const auto n = others.rows();
    const Eigen::HouseholderQR<MatX> qr(others);
    const MatX q = qr.householderQ() * MatX::Identity(n, n);
    return q.rightCols(n - others.cols());
}

using CMatL = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;
using CVecL = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, 1>;

// Projects every column of the real basis back onto its admissible subspace,
// recomputed in long double with the same dimension. Rounding the subspaces to
// double leaves (A - lambda I) x off range(B) by ~eps |A|, which X^-1 amplifies
// for badly conditioned bases; the projected basis keeps M - A in range(B).
MatL polish_basis(const MatX& a, const MatX& b, Eigen::Index rank_b, const std::vector<Slot>& slots,
                  const std::vector<Eigen::Index>& dims, const MatX& xr)
{
    const auto n = a.rows();
    const MatL al = a.cast<long double>();
    const Eigen::JacobiSVD<MatL> bsvd(b.cast<long double>(), Eigen::ComputeFullU);
    const MatL u1 = bsvd.matrixU().rightCols(n - rank_b);
    MatL out = xr.cast<long double>();
    if (u1.cols() == 0) return out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const Slot& s = slots[i];
        const std::complex<long double> lambda(s.pole.real(), s.pole.imag());
        const CMatL shifted = u1.transpose().cast<std::complex<long double>>() *
                              (al.cast<std::complex<long double>>() -
                               lambda * CMatL::Identity(n, n));
        const Eigen::JacobiSVD<CMatL> svd(shifted, Eigen::ComputeFullV);
        const CMatL basis = svd.matrixV().rightCols(dims[i]);
        CVecL x = out.col(s.column).cast<std::complex<long double>>();
        if (s.pair()) {
            x += std::complex<long double>(0.0L, 1.0L) *
                 out.col(s.column + 1).cast<std::complex<long double>>();
        }
        const CVecL proj = basis * (basis.adjoint() * x);
        out.col(s.column) = proj.real();
        if (s.pair()) out.col(s.column + 1) = proj.imag();
    }
    return out;
}

class EigenvectorBasis {
public:
    EigenvectorBasis(std::vector<Slot> slots, std::vector<CMatX> subspaces, int n)
        : slots_(std::move(slots)), subspaces_(std::move(subspaces)), xr_(MatX::Zero(n, n))
    {
    }

    const std::vector<Slot>& slots() const { return slots_; }

    void set(const Slot& s, const CVecX& x)
    {
        if (s.pair()) {
            xr_.col(s.column) = x.real();
            xr_.col(s.column + 1) = x.imag();
        } else {
            xr_.col(s.column) = x.real();
        }
    }

    CVecX get(const Slot& s) const
    {
        if (s.pair()) {
            return xr_.col(s.column).cast<Complex>() +
                   Complex(0.0, 1.0) * xr_.col(s.column + 1).cast<Complex>();
        }
        return xr_.col(s.column).cast<Complex>();
    }

    void initialize(const GainResult* warm)
    {
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            const Slot& s = slots_[i];
            const CMatX& sub = subspaces_[static_cast<std::size_t>(s.subspace)];
            CVecX x = sub.col(s.repeat % sub.cols());
            if (warm != nullptr) {
                CVecX prev = warm->eigenvectors.col(warm_column(i));
                if (!s.pair()) prev = prev.real().cast<Complex>();
                const CVecX proj = sub * (sub.adjoint() * prev);
                if (proj.norm() > 1e-6) x = proj;
            }
            if (!s.pair()) x = x.real().cast<Complex>();
            set(s, x / x.norm());
        }
    }

    // Real-arithmetic |det| of the complex basis with unit columns:
    // det[x, conj(x)] = -2i det[Re x, Im x] for every pair.
    double objective() const
    {
        double scale = 1.0;
        for (const Slot& s : slots_) {
            if (s.pair()) scale *= 2.0;
        }
        return scale * std::abs(xr_.partialPivLu().determinant());
    }

    void sweep()
    {
        double current = objective();
        for (const Slot& s : slots_) {
            const CMatX& sub = subspaces_[static_cast<std::size_t>(s.subspace)];
            const MatX saved = xr_.middleCols(s.column, s.pair() ? 2 : 1);
            if (s.pair()) {
                update_pair(s, sub);
            } else {
                update_real(s, sub);
            }
            // Updates are exact maximizers; round-off can still undo a converged column.
            const double next = objective();
            if (next < current) {
                xr_.middleCols(s.column, saved.cols()) = saved;
            } else {
                current = next;
            }
        }
    }

    /// Complex eigenvector matrix in `requested` order.
    CMatX complex_basis() const
    {
        const auto n = xr_.rows();
        CMatX x(n, n);
        int col = 0;
        for (const Slot& s : slots_) {
            const CVecX v = get(s);
            x.col(col++) = v;
            if (s.pair()) x.col(col++) = v.conjugate();
        }
        return x;
    }

    /// Real block-diagonal pole matrix matching the real basis layout.
    MatX real_pole_matrix() const
    {
        const auto n = xr_.rows();
        MatX lam = MatX::Zero(n, n);
        for (const Slot& s : slots_) {
            const double a = s.pole.real();
            const double b = s.pole.imag();
            if (s.pair()) {
                lam(s.column, s.column) = a;
                lam(s.column, s.column + 1) = b;
                lam(s.column + 1, s.column) = -b;
                lam(s.column + 1, s.column + 1) = a;
            } else {
                lam(s.column, s.column) = a;
            }
        }
        return lam;
    }

    const MatX& real_basis() const { return xr_; }
    const CMatX& subspace(const Slot& s) const
    {
        return subspaces_[static_cast<std::size_t>(s.subspace)];
    }

private:
    // Column of the previous complex basis matching slot i (same slot layout).
    Eigen::Index warm_column(std::size_t i) const
    {
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < i; ++j) col += slots_[j].pair() ? 2 : 1;
        return col;
    }

    // With the other columns fixed, |det| is proportional to |y^T x| where y
    // spans the orthogonal complement of the others; the best unit x in the
    // subspace is the normalized projection of y.
    void update_real(const Slot& s, const CMatX& sub)
    {
        const MatX basis = sub.real();
        const VecX y = orthogonal_complement(drop_columns(xr_, s.column, 1)).col(0);
        const VecX coeff = basis.transpose() * y;
        const double norm = coeff.norm();
        if (norm <= kEps) return;
        xr_.col(s.column) = basis * (coeff / norm);
    }

    // With the other columns fixed, |det| is proportional to |det[v, conj v]|
    // = 2 |Im(v1 conj v2)| for v = Qc^T x, Qc the real 2-column complement.
    // Over x = S c with |c| = 1 that is the Rayleigh quotient of a Hermitian
    // matrix, maximized by its extreme eigenvector.
    void update_pair(const Slot& s, const CMatX& sub)
    {
        const MatX qc = orthogonal_complement(drop_columns(xr_, s.column, 2));
        const CMatX w = qc.transpose().cast<Complex>() * sub;
        const CVecX r1 = w.row(0).transpose();
        const CVecX r2 = w.row(1).transpose();
        CMatX h = (r2.conjugate() * r1.transpose() - r1.conjugate() * r2.transpose()) /
                  Complex(0.0, 2.0);
        h = (0.5 * (h + h.adjoint())).eval();
        const Eigen::SelfAdjointEigenSolver<CMatX> es(h);
        const VecX& ev = es.eigenvalues();
        const Eigen::Index pick = std::abs(ev(0)) >= std::abs(ev(ev.size() - 1)) ? 0 : ev.size() - 1;
        if (std::abs(ev(pick)) <= kEps) return;
        const CVecX x = sub * es.eigenvectors().col(pick);
        set(s, x / x.norm());
    }

    std::vector<Slot> slots_;
    std::vector<CMatX> subspaces_;
    MatX xr_;
};

}  // namespace

PoleSet::PoleSet(std::vector<Complex> poles) : poles_(std::move(poles))
{
    for (const Complex& p : poles_) {
        if (!std::isfinite(p.real()) || !std::isfinite(p.imag())) {
            throw ValidationError("pole set contains a non-finite value");
        }
        if (is_real(p)) continue;
        const auto same = std::count(poles_.begin(), poles_.end(), p);
        const auto conj = std::count(poles_.begin(), poles_.end(), std::conj(p));
        if (same != conj) {
            std::ostringstream os;
            os << "pole set is not closed under conjugation: " << p.real()
               << (p.imag() < 0 ? " - " : " + ") << std::abs(p.imag()) << "i has no partner";
            throw ValidationError(os.str());
        }
    }
}

double PoleSet::max_real() const
{
    double m = -std::numeric_limits<double>::infinity();
    for (const Complex& p : poles_) m = std::max(m, p.real());
    return m;
}

double robustness_measure(const CMatX& x)
{
    if (x.rows() != x.cols() || x.rows() == 0) {
        throw SingularBasis("eigenvector matrix must be square and non-empty");
    }
    CMatX xn = x;
    for (Eigen::Index j = 0; j < xn.cols(); ++j) {
        const double norm = xn.col(j).norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw SingularBasis("eigenvector matrix has a zero or non-finite column");
        }
        xn.col(j) /= norm;
    }
    const Eigen::JacobiSVD<CMatX> svd(xn);
    const VecX& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (!(smin > 0.0) || sv(0) / smin > 1.0 / kEps) {
        throw SingularBasis("eigenvector matrix is numerically singular");
    }
    return std::abs(xn.partialPivLu().determinant());
}

std::vector<Complex> closed_loop_eigs(const MatX& a, const MatX& b, const MatX& k)
{
    // Extended precision: single-input closed loops can have eigenvalue condition
    // numbers near 1e10, where a double QR iteration alone misplaces them by 1e-5.
    const MatL m = a.cast<long double>() + b.cast<long double>() * k.cast<long double>();
    const Eigen::EigenSolver<MatL> es(m, false);
    const auto& ev = es.eigenvalues();
    std::vector<Complex> out;
    out.reserve(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        out.emplace_back(static_cast<double>(ev(i).real()), static_cast<double>(ev(i).imag()));
    }
    std::sort(out.begin(), out.end(), [](const Complex& l, const Complex& r) {
        return l.real() != r.real() ? l.real() < r.real() : l.imag() < r.imag();
    });
    return out;
}

double multiset_pole_error(const std::vector<Complex>& achieved,
                           const std::vector<Complex>& requested, double floor)
{
    if (achieved.size() != requested.size()) {
        return std::numeric_limits<double>::infinity();
    }
    double worst = 0.0;
    for (const auto& [i, j] : closest_matching(achieved, requested)) {
        const double scale = std::max(std::abs(requested[j]), floor);
        worst = std::max(worst, std::abs(achieved[i] - requested[j]) / scale);
    }
    return worst;
}

bool poles_match(const std::vector<Complex>& achieved, const std::vector<Complex>& requested,
                 double rel_tol, double abs_tol)
{
    if (achieved.size() != requested.size()) return false;
    for (const auto& [i, j] : closest_matching(achieved, requested)) {
        const double err = std::abs(achieved[i] - requested[j]);
        if (!(err <= std::max(rel_tol * std::abs(requested[j]), abs_tol))) return false;
    }
    return true;
}

GainResult assign_poles(const MatX& a, const MatX& b, const PoleSet& poles,
                        const PlacementOptions& opts, const GainResult* warm_start)
{
    const auto n = a.rows();
    if (a.cols() != n || b.rows() != n || b.cols() < 1) {
        throw ValidationError("assign_poles: inconsistent A/B dimensions");
    }
    if (static_cast<Eigen::Index>(poles.size()) != n) {
        std::ostringstream os;
        os << "assign_poles: " << poles.size() << " poles requested for a system of order " << n;
        throw ValidationError(os.str());
    }
    const int rank = controllability_rank(a, b);
    if (rank < n) {
        std::ostringstream os;
        os << "controllability rank " << rank << " < " << n;
        throw UncontrollableError(os.str());
    }

    // B = U0 S V^T (rank r); U1 spans the complement of range(B).
    const Eigen::JacobiSVD<MatX> bsvd(b, Eigen::ComputeFullU | Eigen::ComputeThinV);
    const VecX& bsv = bsvd.singularValues();
    const double btol = static_cast<double>(std::max(b.rows(), b.cols())) * kEps * bsv(0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < bsv.size(); ++i) {
        if (bsv(i) > btol) ++r;
    }
    const MatX u0 = bsvd.matrixU().leftCols(r);
    const MatX u1 = bsvd.matrixU().rightCols(n - r);

    // Slot layout: poles in the given order, each conjugate pair once.
    std::vector<Slot> slots;
    std::vector<Complex> distinct;
    std::vector<int> multiplicity;
    std::vector<Complex> requested;
    int column = 0;
    for (const Complex& p : poles.values()) {
        if (p.imag() < 0.0) continue;
        auto it = std::find(distinct.begin(), distinct.end(), p);
        int idx;
        if (it == distinct.end()) {
            distinct.push_back(p);
            multiplicity.push_back(0);
            idx = static_cast<int>(distinct.size()) - 1;
        } else {
            idx = static_cast<int>(it - distinct.begin());
        }
        Slot s;
        s.pole = p;
        s.column = column;
        s.subspace = idx;
        s.repeat = multiplicity[static_cast<std::size_t>(idx)]++;
        column += s.pair() ? 2 : 1;
        slots.push_back(s);
        requested.push_back(p);
        if (s.pair()) requested.push_back(std::conj(p));
    }
    for (std::size_t i = 0; i < distinct.size(); ++i) {
        if (multiplicity[i] > r) {
            std::ostringstream os;
            os << "pole " << distinct[i].real() << (distinct[i].imag() < 0 ? "-" : "+")
               << std::abs(distinct[i].imag()) << "i has multiplicity " << multiplicity[i]
               << " > rank(B) = " << r;
            throw PlacementFailure(os.str());
        }
    }

    std::vector<CMatX> subspaces;
    subspaces.reserve(distinct.size());
    for (const Complex& p : distinct) {
        subspaces.push_back(admissible_subspace(a, u1, p));
        if (subspaces.back().cols() == 0) {
            throw UncontrollableError("empty admissible eigenvector subspace");
        }
    }

    const bool warm_ok = warm_start != nullptr && warm_start->requested == requested &&
                         warm_start->eigenvectors.rows() == n &&
                         warm_start->eigenvectors.cols() == n;

    EigenvectorBasis basis(slots, std::move(subspaces), static_cast<int>(n));
    basis.initialize(warm_ok ? warm_start : nullptr);

    GainResult result;
    double obj = basis.objective();
    result.objective_history.push_back(obj);
    if (opts.objective == PlacementObjective::AbsDet) {
        for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
            basis.sweep();
            const double next = basis.objective();
            result.objective_history.push_back(next);
            result.iterations = sweep;
            const bool converged = obj > 0.0 && (next - obj) <= opts.min_improvement * obj;
            obj = next;
            if (converged) break;
        }
    }

    const MatX& xr = basis.real_basis();
    if (!(obj > 0.0)) {
        throw PlacementFailure("eigenvector basis is singular");
    }
    // M = X Lambda X^-1, solved as X^T M^T = (X Lambda)^T. X can be badly
    // conditioned (few inputs), so the solve and residual run in long double.
    std::vector<Eigen::Index> dims;
    for (const Slot& s : basis.slots()) dims.push_back(basis.subspace(s).cols());
    const MatL xrl = polish_basis(a, b, r, basis.slots(), dims, xr);
    const MatL xl = xrl * basis.real_pole_matrix().cast<long double>();
    const MatL m = xrl.transpose().colPivHouseholderQr().solve(xl.transpose()).transpose();
    const MatL target = m - a.cast<long double>();
    const MatX vs = bsvd.matrixV().leftCols(r) * bsv.head(r).cwiseInverse().asDiagonal();
    result.k = (vs.cast<long double>() * (u0.transpose().cast<long double>() * target)).cast<double>();

    const long double tnorm = std::max<long double>(1.0L, target.norm());
    const double resid =
        static_cast<double>((b.cast<long double>() * result.k.cast<long double>() - target).norm() / tnorm);
    if (!(resid <= opts.residual_tolerance)) {
        std::ostringstream os;
        os << "gain residual " << resid << " above tolerance " << opts.residual_tolerance;
        throw PlacementFailure(os.str());
    }

    result.eigenvectors = basis.complex_basis();
    result.requested = requested;
    try {
        result.robustness = robustness_measure(result.eigenvectors);
    } catch (const SingularBasis& e) {
        throw PlacementFailure(std::string("final eigenvector basis: ") + e.what());
    }
    result.achieved = closed_loop_eigs(a, b, result.k);
    if (!poles_match(result.achieved, requested, opts.tolerance)) {
        std::ostringstream os;
        os << "achieved poles miss the requested set (relative error "
           << multiset_pole_error(result.achieved, requested) << ")";
        throw PlacementFailure(os.str());
    }
    return result;
}

}  // namespace vscmg
