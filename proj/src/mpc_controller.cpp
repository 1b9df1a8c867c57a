#include "vscmg/mpc_controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace vscmg {

namespace {

constexpr double kMarginSlack = 1e-6;

double max_real(const std::vector<Complex>& ev)
{
    double m = -std::numeric_limits<double>::infinity();
    for (const Complex& z : ev) m = std::max(m, z.real());
    return m;
}

double spectral_norm(const MatX& m)
{
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<MatX>(m).singularValues()(0);
}

// RK4 on the frozen model xdot = A x + B u + C t_e, gimbal angles following w_g.
PlantState linear_step(const LtvModel& model, const PlantState& x, const VecX& u,
                       const Vec3& external_torque, double dt)
{
    const auto units = x.gimbal_angles.size();
    const VecX forcing = model.b * u + model.c * external_torque;
    auto f = [&](const VecX& z) -> VecX { return model.a * z + forcing; };
    const VecX z0 = x.control_vector();
    const VecX k1 = f(z0);
    const VecX k2 = f(z0 + 0.5 * dt * k1);
    const VecX k3 = f(z0 + 0.5 * dt * k2);
    const VecX k4 = f(z0 + dt * k3);
    const VecX z1 = z0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // Gimbal rates are affine in t over the step, so Simpson's rule integrates them exactly.
    const VecX wg0 = z0.segment(3 + units, units);
    const VecX wg1 = z1.segment(3 + units, units);
    const VecX wgm = (z0 + 0.5 * dt * k1).segment(3 + units, units);
    const VecX angles = x.gimbal_angles + dt / 6.0 * (wg0 + 4.0 * wgm + wg1);
    return PlantState::from_control_vector(z1, angles);
}

}  // namespace

void MpcConfig::validate() const
{
    if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
        throw ValidationError("mpc.sample_period must be positive");
    }
    if (!(stability_margin > 0.0) || !std::isfinite(stability_margin)) {
        throw ValidationError("mpc.stability_margin must be positive");
    }
    if (torque_limit && !(*torque_limit > 0.0)) {
        throw ValidationError("mpc.torque_limit must be positive when present");
    }
    if (poles.size() == 0) {
        throw ValidationError("mpc.poles must not be empty");
    }
    if (state_scaling) {
        for (double v : *state_scaling) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ValidationError("mpc.state_scaling entries must be positive");
            }
        }
    }
    if (placement.max_sweeps < 0) {
        throw ValidationError("placement.max_sweeps must be non-negative");
    }
    if (!(placement.tolerance > 0.0)) {
        throw ValidationError("placement.tolerance must be positive");
    }
}

VecX scaling_diagonal(const MpcConfig& cfg, int units)
{
    VecX d = VecX::Ones(2 * units + 6);
    if (!cfg.state_scaling) return d;
    const auto& s = *cfg.state_scaling;
    d.segment(0, 3).setConstant(s[0]);
    d.segment(3, units).setConstant(s[1]);
    d.segment(3 + units, units).setConstant(s[2]);
    d.segment(3 + 2 * units, 3).setConstant(s[3]);
    return d;
}

MpcStepResult mpc_step(const SpacecraftParams& p, const PlantState& x, double t,
                       const MpcConfig& cfg, const GainResult* prev)
{
    MpcStepResult out;
    out.model = build_ltv(p, x, t);
    const VecX state = x.control_vector();

    const MatX* k_applied = nullptr;
    try {
        const GainResult* warm = cfg.warm_start ? prev : nullptr;
        if (cfg.state_scaling) {
            // Eigenvectors stay in z so warm starts remain consistent; K maps back to x.
            const VecX d = scaling_diagonal(cfg, p.unit_count());
            const VecX dinv = d.cwiseInverse();
            const MatX az = dinv.asDiagonal() * out.model.a * d.asDiagonal();
            const MatX bz = dinv.asDiagonal() * out.model.b;
            out.gain = assign_poles(az, bz, cfg.poles, cfg.placement, warm);
            out.gain->k = out.gain->k * dinv.asDiagonal();
        } else {
            out.gain = assign_poles(out.model.a, out.model.b, cfg.poles, cfg.placement, warm);
        }
        k_applied = &out.gain->k;
        out.record.robustness = out.gain->robustness;
        out.record.sweeps = out.gain->iterations;
    } catch (const UncontrollableError&) {
        if (cfg.fallback == FallbackPolicy::Fail) throw;
        out.record.fallback_used = true;
    } catch (const PlacementFailure&) {
        if (cfg.fallback == FallbackPolicy::Fail) throw;
        out.record.fallback_used = true;
    }

    if (out.record.fallback_used && cfg.fallback == FallbackPolicy::HoldLastGain &&
        prev != nullptr) {
        out.gain = *prev;
        k_applied = &out.gain->k;
        out.record.robustness = prev->robustness;
    }

    VecX u = VecX::Zero(p.input_dim());
    MatX closed = out.model.a;
    if (k_applied != nullptr) {
        u = *k_applied * state;
        closed += out.model.b * *k_applied;
    }
    if (cfg.torque_limit) {
        u = u.cwiseMax(-*cfg.torque_limit).cwiseMin(*cfg.torque_limit);
    }
    out.u = ControlInput::from_vector(u);

    out.record.t = t;
    out.record.x = x;
    out.record.u = out.u;
    const Eigen::EigenSolver<MatX> es(closed, false);
    const CVecX ev = es.eigenvalues();
    out.record.eigen_margin = max_real(std::vector<Complex>(ev.data(), ev.data() + ev.size()));
    out.record.closed_loop_norm = spectral_norm(closed);
    if (prev != nullptr && k_applied != nullptr) {
        out.record.gain_delta = (*k_applied - prev->k).norm();
    }
    return out;
}

ClosedLoopRun run_closed_loop(const SpacecraftParams& p, const PlantState& x0,
                              const MpcConfig& cfg, double dt, double t_end,
                              const ModelObserver& observer)
{
    cfg.validate();
    if (!(dt > 0.0) || !(t_end >= 0.0)) {
        throw ValidationError("integrator step must be positive and end time non-negative");
    }
    const double ratio = cfg.sample_period / dt;
    const long substeps = std::lround(ratio);
    if (substeps < 1 || std::abs(ratio - static_cast<double>(substeps)) > 1e-9 * ratio) {
        throw ValidationError("integrator step must divide the sample period");
    }
    const long samples = static_cast<long>(std::floor(t_end / cfg.sample_period + 1e-9));

    ClosedLoopRun run;
    run.records.reserve(static_cast<std::size_t>(samples) + 1);
    PlantState x = x0;
    std::optional<GainResult> gain;

    for (long k = 0; k <= samples; ++k) {
        const double t = static_cast<double>(k) * cfg.sample_period;
        MpcStepResult step = mpc_step(p, x, t, cfg, gain ? &*gain : nullptr);
        if (observer) observer(step.model);
        run.records.push_back(step.record);
        if (step.gain) gain = std::move(step.gain);
        if (k == samples) break;

        const VecX u = step.u.to_vector();
        try {
            for (long j = 0; j < substeps; ++j) {
                if (cfg.plant == PlantModel::Linear) {
                    x = linear_step(step.model, x, u, cfg.external_torque, dt);
                } else {
                    x = rk4_step(p, x, step.u, cfg.external_torque, dt);
                }
                if (!x.all_finite()) {
                    throw DivergenceError("state became non-finite");
                }
            }
        } catch (const DomainError& e) {
            run.diverged = true;
            run.diagnostic = std::string(e.what());
        } catch (const DivergenceError& e) {
            run.diverged = true;
            run.diagnostic = std::string(e.what());
        }
        if (run.diverged) {
            std::ostringstream os;
            os << run.diagnostic << " (between t = " << t << " and t = "
               << t + cfg.sample_period << ")";
            run.diagnostic = os.str();
            break;
        }
    }
    run.final_state = x;
    return run;
}

StabilityAudit theorem1_audit(const std::vector<StepRecord>& records, double stability_margin,
                              double sample_period)
{
    StabilityAudit audit;
    audit.samples = records.size();
    audit.max_eigen_real = -std::numeric_limits<double>::infinity();
    for (const StepRecord& r : records) {
        audit.max_closed_loop_norm = std::max(audit.max_closed_loop_norm, r.closed_loop_norm);
        audit.max_eigen_real = std::max(audit.max_eigen_real, r.eigen_margin);
        audit.max_gain_rate = std::max(audit.max_gain_rate, r.gain_delta / sample_period);
        if (r.fallback_used) {
            ++audit.fallback_steps;
        } else if (r.eigen_margin > -stability_margin + kMarginSlack) {
            ++audit.margin_violations;
        }
    }
    return audit;
}

}  // namespace vscmg
