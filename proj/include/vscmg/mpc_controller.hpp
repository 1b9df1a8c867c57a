#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vscmg/dynamics.hpp"
#include "vscmg/linearization.hpp"
#include "vscmg/pole_placement.hpp"

namespace vscmg {

enum class FallbackPolicy {
    HoldLastGain,  // reuse the previous gain; zero input if there is none
    ZeroInput,
    Fail,          // rethrow the placement error
};

/// Which model is advanced between samples.
enum class PlantModel {
    Nonlinear,  // full time-varying model (default)
    Linear,     // the frozen LTV model of the current sample
};

struct MpcConfig {
    double sample_period = 0.1;
    PoleSet poles;
    std::optional<double> torque_limit;
    /// Required decay margin: every closed-loop eigenvalue must satisfy Re <= -mu.
    double stability_margin = 0.2;
    FallbackPolicy fallback = FallbackPolicy::HoldLastGain;
    PlantModel plant = PlantModel::Nonlinear;
    bool warm_start = true;
    PlacementOptions placement;
    /// Optional diagonal change of coordinates x = T z applied before pole
    /// assignment, given as one scale per block (omega, wheel speeds, gimbal
    /// rates, q). The achieved poles are unchanged; the eigenvector conditioning
    /// the sweeps optimize is measured in z.
    std::optional<std::array<double, 4>> state_scaling;
    Vec3 external_torque = Vec3::Zero();

    /// Throws ValidationError.
    void validate() const;
};

/// Per-sample telemetry.
struct StepRecord {
    double t = 0.0;
    PlantState x;
    ControlInput u;
    double eigen_margin = 0.0;      // max Re eig of the applied closed loop
    double robustness = 0.0;
    double gain_delta = 0.0;        // Frobenius norm of K_k - K_{k-1}
    double closed_loop_norm = 0.0;  // spectral norm of A + B K
    int sweeps = 0;
    bool fallback_used = false;
};

struct MpcStepResult {
    ControlInput u;
    std::optional<GainResult> gain;  // gain in force after this step, if any
    StepRecord record;
    LtvModel model;
};

/// Diagonal of T for the configured block scales (ones when unset).
VecX scaling_diagonal(const MpcConfig& cfg, int units);

/// One pass of the receding-horizon loop: linearize at x, assign poles, and
/// form u = K x (clamped when a torque limit is set).
MpcStepResult mpc_step(const SpacecraftParams& p, const PlantState& x, double t,
                       const MpcConfig& cfg, const GainResult* prev = nullptr);

struct ClosedLoopRun {
    std::vector<StepRecord> records;
    PlantState final_state;
    bool diverged = false;
    std::string diagnostic;
};

/// Called with every sample's model; used for LTV dumps.
using ModelObserver = std::function<void(const LtvModel&)>;

/// Alternates mpc_step with RK4 sub-steps of length dt (which must divide the
/// sample period). Records one entry per sample, including t = t_end.
ClosedLoopRun run_closed_loop(const SpacecraftParams& p, const PlantState& x0,
                              const MpcConfig& cfg, double dt, double t_end,
                              const ModelObserver& observer = {});

/// Empirical proxies for the LTV stability hypotheses: bounded closed-loop
/// matrix, uniform eigenvalue margin, and slowly varying gain.
struct StabilityAudit {
    std::size_t samples = 0;
    double max_closed_loop_norm = 0.0;
    double max_eigen_real = 0.0;
    double max_gain_rate = 0.0;  // max gain_delta / sample_period
    std::size_t margin_violations = 0;
    std::size_t fallback_steps = 0;
};

/// A step violates the margin when its eigen_margin exceeds -mu + 1e-6. Fallback
/// steps placed no gain for that sample; they are counted separately.
StabilityAudit theorem1_audit(const std::vector<StepRecord>& records, double stability_margin,
                              double sample_period);

}  // namespace vscmg
