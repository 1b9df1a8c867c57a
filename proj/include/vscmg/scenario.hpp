#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "vscmg/dynamics.hpp"
#include "vscmg/mpc_controller.hpp"

namespace vscmg {

/// SplitMix64 (Steele, Lea & Flood). Draw k of a stream seeded with s is
///   z  = s + k * 0x9E3779B97F4A7C15   (k = 1, 2, ...)
///   z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   out = z ^ (z >> 31)
/// and uniform() maps it to (out >> 11) * 2^-53 in [0, 1).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();

private:
    std::uint64_t state_;
};

struct InitialConditions {
    std::uint64_t seed = 1;
    double omega_scale = 1e-3;
    double q_scale = 1e-1;
    double wheel_speed = 0.0;  // rad/s, applied to every wheel
    // Explicit values override the random draw / defaults field by field.
    std::optional<Vec3> omega;
    std::optional<Vec3> q;
    std::optional<VecX> wheel_speeds;
    std::optional<VecX> gimbal_rates;
    std::optional<VecX> gimbal_angles;
};

struct OutputConfig {
    std::filesystem::path dir = "out";
    std::string trajectory = "trajectory.csv";
    std::string summary = "summary.txt";
    std::string ltv_dump = "ltv_dump.csv";
    bool dump_ltv = false;
};

struct ScenarioConfig {
    std::string name;
    SpacecraftParams spacecraft;
    std::optional<double> theta_deg;  // set when the cluster is a pyramid
    InitialConditions initial;
    MpcConfig mpc;
    double dt = 0.01;
    double t_end = 100.0;
    OutputConfig output;
};

inline constexpr std::string_view kPaperPreset = "paper-s4";
inline constexpr double kPyramidThetaDeg = 54.75;

/// The four-unit pyramid scenario: J_b = [[15053, 3000, -1000], [3000, 6510, 2000],
/// [-1000, 2000, 11122]] kg m^2, J_s = 0.7, J_g = 0.1, theta = 54.75 deg, wheels at
/// 2pi rad/s, gimbals at rest, and the fourteen-pole set below.
ScenarioConfig paper_s4_preset();
std::vector<Complex> paper_s4_poles();

/// Named presets; throws ValidationError for an unknown name.
ScenarioConfig preset(std::string_view name);

/// Parses a JSON scenario. A "preset" key supplies defaults for every field not
/// present in the document. Throws ParseError (with line and column) for
/// malformed text and ValidationError naming the offending field otherwise.
ScenarioConfig parse_scenario(std::string_view text, std::string_view source = "<string>");
ScenarioConfig load_scenario(const std::filesystem::path& path);

nlohmann::json cluster_to_json(const ClusterParams& c);
ClusterParams cluster_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

/// omega ~ U[0,1)^3 * omega_scale, q ~ U[0,1)^3 * q_scale (drawn in that order),
/// every wheel at wheel_speed, gimbals at rest at zero angle.
PlantState draw_initial_state(const ScenarioConfig& cfg, std::uint64_t seed);

/// The random draw with any explicit overrides from the config applied.
PlantState initial_state(const ScenarioConfig& cfg);

/// Trajectory CSV header: t, w1..3, ws1..N, wg1..N, q1..3, gamma1..N, ts1..N,
/// tg1..N, eigen_margin, robustness, fallback.
std::vector<std::string> trajectory_columns(int units);
void write_trajectory_csv(std::ostream& os, const std::vector<StepRecord>& records, int units);

/// Appends one LTV snapshot as rows "k,t,matrix,row,c0..c{n-1}".
void write_ltv_rows(std::ostream& os, long sample, const LtvModel& model);

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitDivergence = 3,
    kExitPlacement = 4,
};

struct RunOutcome {
    int exit_code = kExitOk;
    ClosedLoopRun run;
    StabilityAudit audit;
    double momentum_drift = 0.0;  // max relative deviation of |h| from its initial value
    std::string message;
};

/// Runs the closed loop and writes the trajectory CSV, summary and optional
/// LTV dump under cfg.output.dir.
RunOutcome run(const ScenarioConfig& cfg);

std::string summary_text(const ScenarioConfig& cfg, const RunOutcome& outcome);

using BigInt = boost::multiprecision::cpp_int;

/// Number of frozen models in a full gain-scheduling grid:
/// p_gamma^N * p_w^3 * p_ws^N * p_wg^N * p_q^3.
BigInt grid_design_count(unsigned p_gamma, unsigned p_w, unsigned p_ws, unsigned p_wg,
                         unsigned p_q, unsigned units);

}  // namespace vscmg
