#pragma once

#include <optional>
#include <vector>

#include "vscmg/types.hpp"

namespace vscmg {

/// A self-conjugate set of closed-loop poles (rad/s).
class PoleSet {
public:
    PoleSet() = default;
    /// Throws ValidationError if a pole is non-finite or a complex pole lacks
    /// its conjugate partner (with matching multiplicity).
    explicit PoleSet(std::vector<Complex> poles);

    const std::vector<Complex>& values() const { return poles_; }
    std::size_t size() const { return poles_.size(); }
    double max_real() const;
    bool stable() const { return !poles_.empty() && max_real() < 0.0; }

private:
    std::vector<Complex> poles_;
};

enum class PlacementObjective {
    /// Maximize |det| of the column-normalized eigenvector matrix.
    AbsDet,
    /// Keep the initial admissible eigenvectors; no conditioning sweeps.
    None,
};

struct PlacementOptions {
    /// Relative eigenvalue tolerance (absolute tolerance 1e-8 near zero).
    double tolerance = 1e-6;
    int max_sweeps = 20;
    /// Sweeps stop once the relative objective gain falls below this.
    double min_improvement = 1e-8;
    /// Bound on |B K - (M - A)| relative to |M - A|.
    double residual_tolerance = 1e-8;
    PlacementObjective objective = PlacementObjective::AbsDet;
};

struct GainResult {
    MatX k;                            // m x n, closed loop is A + B K
    std::vector<Complex> achieved;     // eig(A + B K), sorted
    double robustness = 0.0;
    int iterations = 0;                // completed sweeps
    std::vector<double> objective_history;  // objective before the first and after each sweep
    CMatX eigenvectors;                // column j pairs with requested pole j
    std::vector<Complex> requested;    // slot order of `eigenvectors`
};

/// Robust eigenstructure assignment. Returns K with eig(A + B K) equal to the
/// requested poles while locally maximizing the conditioning objective.
///
/// `warm_start` seeds the initial eigenvector choice with a previous result for
/// the same pole set (projected onto the new admissible subspaces).
///
/// Throws UncontrollableError when (A, B) is not controllable and
/// PlacementFailure when the result misses the tolerance or a pole's
/// multiplicity exceeds rank(B).
GainResult assign_poles(const MatX& a, const MatX& b, const PoleSet& poles,
                        const PlacementOptions& opts = {},
                        const GainResult* warm_start = nullptr);

/// |det| of X after scaling every column to unit length; 1 for an orthonormal
/// basis, tending to 0 as columns become dependent. Throws SingularBasis when
/// the condition number exceeds 1/eps.
double robustness_measure(const CMatX& x);

/// Eigenvalues of A + B K sorted by (real, imag).
std::vector<Complex> closed_loop_eigs(const MatX& a, const MatX& b, const MatX& k);

/// Largest distance between matched members of two equally sized multisets,
/// each distance divided by max(|requested|, floor). Matching pairs the
/// globally closest remaining elements first.
double multiset_pole_error(const std::vector<Complex>& achieved,
                           const std::vector<Complex>& requested, double floor = 1e-2);

/// True when every achieved pole is within max(rel_tol |p|, abs_tol) of its
/// matched requested pole.
bool poles_match(const std::vector<Complex>& achieved, const std::vector<Complex>& requested,
                 double rel_tol, double abs_tol = 1e-8);

}  // namespace vscmg
