#include "vscmg/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace vscmg {

using nlohmann::json;

std::uint64_t SplitMix64::next()
{
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix64::uniform()
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::vector<Complex> paper_s4_poles()
{
    return {
        {-0.2, 0.0}, {-0.8, 0.0},
        {-0.2, 0.1}, {-0.2, -0.1},
        {-0.6, 0.1}, {-0.6, -0.1},
        {-1.5, 1.0}, {-1.5, -1.0},
        {-1.6, 1.0}, {-1.6, -1.0},
        {-1.7, 1.0}, {-1.7, -1.0},
        {-1.8, 1.0}, {-1.8, -1.0},
    };
}

ScenarioConfig paper_s4_preset()
{
    Mat3 jb;
    jb << 15053.0, 3000.0, -1000.0,
          3000.0, 6510.0, 2000.0,
          -1000.0, 2000.0, 11122.0;
    const double theta = kPyramidThetaDeg * std::numbers::pi / 180.0;

    ScenarioConfig cfg;
    cfg.name = std::string(kPaperPreset);
    cfg.spacecraft = SpacecraftParams(jb, pyramid_config(theta));
    cfg.theta_deg = kPyramidThetaDeg;
    cfg.initial.seed = 1;
    cfg.initial.omega_scale = 1e-3;
    cfg.initial.q_scale = 1e-1;
    cfg.initial.wheel_speed = 2.0 * std::numbers::pi;
    cfg.mpc.sample_period = 0.1;
    cfg.mpc.poles = PoleSet(paper_s4_poles());
    cfg.mpc.stability_margin = 0.2;
    cfg.dt = 0.01;
    cfg.t_end = 100.0;
    return cfg;
}

ScenarioConfig preset(std::string_view name)
{
    if (name == kPaperPreset) return paper_s4_preset();
    throw ValidationError("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// JSON helpers. Every accessor carries the dotted path of the field so
// validation errors point at the offending entry.

namespace {

[[noreturn]] void bad_field(const std::string& path, const std::string& what)
{
    throw ValidationError(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object()) bad_field(path, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
        if (ok.count(item.key()) == 0) {
            bad_field(path.empty() ? item.key() : path + "." + item.key(), "unknown field");
        }
    }
}

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

double as_number(const json& v, const std::string& path)
{
    if (!v.is_number()) bad_field(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) bad_field(path, "must be finite");
    return d;
}

VecX as_vector(const json& v, const std::string& path)
{
    if (!v.is_array()) bad_field(path, "expected an array of numbers");
    VecX out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = as_number(v[i], path + "[" + std::to_string(i) + "]");
    }
    return out;
}

// Scalar broadcast to `count` entries, or an explicit array.
VecX as_diagonal(const json& v, const std::string& path, Eigen::Index count)
{
    if (v.is_number()) return VecX::Constant(count, as_number(v, path));
    VecX d = as_vector(v, path);
    if (d.size() != count) {
        bad_field(path, "expected " + std::to_string(count) + " entries");
    }
    return d;
}

Vec3 as_vec3(const json& v, const std::string& path)
{
    const VecX d = as_vector(v, path);
    if (d.size() != 3) bad_field(path, "expected 3 entries");
    return d;
}

MatX as_matrix(const json& v, const std::string& path)
{
    if (!v.is_array() || v.empty()) bad_field(path, "expected a non-empty array of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!v[r].is_array()) bad_field(path, "expected a non-empty array of rows");
        if (r == 0) cols = v[r].size();
        if (v[r].size() != cols || cols == 0) bad_field(path, "rows must have equal, non-zero length");
    }
    MatX m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_number(
                v[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
        }
    }
    return m;
}

json matrix_rows(const MatX& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json vector_json(const VecX& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

std::vector<Complex> as_poles(const json& v, const std::string& path)
{
    if (!v.is_array()) bad_field(path, "expected an array of [re, im] pairs");
    std::vector<Complex> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (v[i].is_number()) {
            out.emplace_back(as_number(v[i], p), 0.0);
        } else if (v[i].is_array() && v[i].size() == 2) {
            out.emplace_back(as_number(v[i][0], p + "[0]"), as_number(v[i][1], p + "[1]"));
        } else {
            bad_field(p, "expected a number or an [re, im] pair");
        }
    }
    return out;
}

FallbackPolicy as_fallback(const json& v, const std::string& path)
{
    if (v == "hold-last-gain") return FallbackPolicy::HoldLastGain;
    if (v == "zero-input") return FallbackPolicy::ZeroInput;
    if (v == "fail") return FallbackPolicy::Fail;
    bad_field(path, "expected \"hold-last-gain\", \"zero-input\" or \"fail\"");
}

const char* fallback_name(FallbackPolicy f)
{
    switch (f) {
    case FallbackPolicy::HoldLastGain: return "hold-last-gain";
    case FallbackPolicy::ZeroInput: return "zero-input";
    case FallbackPolicy::Fail: return "fail";
    }
    return "?";
}

ClusterParams parse_cluster(const json& j, const std::string& path,
                            const std::optional<ClusterParams>& base,
                            std::optional<double>& theta_deg)
{
    check_keys(j, path, {"theta_deg", "A_g", "A_s0", "A_t0", "J_s", "J_g", "J_t"});
    ClusterParams c;
    if (j.contains("theta_deg")) {
        if (j.contains("A_g") || j.contains("A_s0") || j.contains("A_t0")) {
            bad_field(path, "give either theta_deg or explicit axis matrices, not both");
        }
        const double deg = as_number(j["theta_deg"], join(path, "theta_deg"));
        if (!(deg > 0.0 && deg < 90.0)) bad_field(join(path, "theta_deg"), "must lie in (0, 90)");
        c = pyramid_config(deg * std::numbers::pi / 180.0);
        theta_deg = deg;
    } else if (j.contains("A_g")) {
        if (!j.contains("A_s0")) bad_field(join(path, "A_s0"), "required with A_g");
        const MatX ag = as_matrix(j["A_g"], join(path, "A_g"));
        const MatX as0 = as_matrix(j["A_s0"], join(path, "A_s0"));
        if (ag.rows() != 3 || as0.rows() != 3 || as0.cols() != ag.cols()) {
            bad_field(path, "A_g and A_s0 must both be 3xN");
        }
        const VecX ones = VecX::Ones(ag.cols());
        c = ClusterParams::from_axes(ag, as0, ones, ones, ones);
        if (j.contains("A_t0")) {
            c.transverse_axes0 = as_matrix(j["A_t0"], join(path, "A_t0"));
        }
        theta_deg.reset();
        if (!j.contains("J_s") || !j.contains("J_g")) {
            bad_field(path, "J_s and J_g are required with explicit axes");
        }
    } else if (base) {
        c = *base;
    } else {
        bad_field(path, "needs theta_deg or A_g/A_s0");
    }
    const auto n = c.gimbal_axes.cols();
    if (j.contains("J_s")) c.spin_inertia = as_diagonal(j["J_s"], join(path, "J_s"), n);
    if (j.contains("J_g")) c.gimbal_inertia = as_diagonal(j["J_g"], join(path, "J_g"), n);
    if (j.contains("J_t")) {
        c.transverse_inertia = as_diagonal(j["J_t"], join(path, "J_t"), n);
    } else if (!base || j.contains("theta_deg") || j.contains("A_g")) {
        // Transverse inertia is not part of the dynamics; default to the spin inertia.
        c.transverse_inertia = c.spin_inertia;
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        bad_field(path, e.what());
    }
    return c;
}

void validate_scenario(const ScenarioConfig& cfg)
{
    const int units = cfg.spacecraft.unit_count();
    if (units < 1) throw ValidationError("cluster: missing");
    try {
        cfg.mpc.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("mpc: ") + e.what());
    }
    if (static_cast<int>(cfg.mpc.poles.size()) != cfg.spacecraft.state_dim()) {
        throw ValidationError("mpc.poles: expected " + std::to_string(cfg.spacecraft.state_dim()) +
                              " poles (2N+6), got " + std::to_string(cfg.mpc.poles.size()));
    }
    if (!cfg.mpc.poles.stable()) {
        throw ValidationError("mpc.poles: every pole must have a negative real part");
    }
    if (!(cfg.dt > 0.0)) throw ValidationError("sim.dt: must be positive");
    if (!(cfg.t_end >= 0.0)) throw ValidationError("sim.t_end: must be non-negative");
    const double ratio = cfg.mpc.sample_period / cfg.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0) {
        throw ValidationError("sim.dt: must divide mpc.sample_period");
    }
    const InitialConditions& ic = cfg.initial;
    auto check_len = [units](const std::optional<VecX>& v, const char* field) {
        if (v && v->size() != units) {
            throw ValidationError(std::string("initial.") + field + ": expected " +
                                  std::to_string(units) + " entries");
        }
    };
    check_len(ic.wheel_speeds, "wheel_speeds");
    check_len(ic.gimbal_rates, "gimbal_rates");
    check_len(ic.gimbal_angles, "gimbal_angles");
    if (ic.q && ic.q->norm() > 1.0) throw ValidationError("initial.q: norm must not exceed 1");
    if (!ic.q && std::sqrt(3.0) * ic.q_scale > 1.0) {
        throw ValidationError("initial.q_scale: random draw could leave the unit ball");
    }
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte)
{
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

nlohmann::json cluster_to_json(const ClusterParams& c)
{
    return json{
        {"A_g", matrix_rows(c.gimbal_axes)},
        {"A_s0", matrix_rows(c.spin_axes0)},
        {"A_t0", matrix_rows(c.transverse_axes0)},
        {"J_s", vector_json(c.spin_inertia)},
        {"J_g", vector_json(c.gimbal_inertia)},
        {"J_t", vector_json(c.transverse_inertia)},
    };
}

ClusterParams cluster_from_json(const nlohmann::json& j)
{
    std::optional<double> theta;
    return parse_cluster(j, "cluster", std::nullopt, theta);
}

nlohmann::json scenario_to_json(const ScenarioConfig& cfg)
{
    json poles = json::array();
    for (const Complex& p : cfg.mpc.poles.values()) poles.push_back({p.real(), p.imag()});
    json mpc{
        {"sample_period", cfg.mpc.sample_period},
        {"poles", poles},
        {"stability_margin", cfg.mpc.stability_margin},
        {"fallback", fallback_name(cfg.mpc.fallback)},
        {"plant", cfg.mpc.plant == PlantModel::Linear ? "linear" : "nonlinear"},
        {"warm_start", cfg.mpc.warm_start},
        {"external_torque", vector_json(cfg.mpc.external_torque)},
        {"placement",
         {{"tolerance", cfg.mpc.placement.tolerance},
          {"max_sweeps", cfg.mpc.placement.max_sweeps},
          {"min_improvement", cfg.mpc.placement.min_improvement},
          {"objective",
           cfg.mpc.placement.objective == PlacementObjective::None ? "none" : "abs-det"}}},
    };
    mpc["torque_limit"] = cfg.mpc.torque_limit ? json(*cfg.mpc.torque_limit) : json(nullptr);
    mpc["state_scaling"] = cfg.mpc.state_scaling ? json(*cfg.mpc.state_scaling) : json(nullptr);

    json initial{
        {"seed", cfg.initial.seed},
        {"omega_scale", cfg.initial.omega_scale},
        {"q_scale", cfg.initial.q_scale},
        {"wheel_speed", cfg.initial.wheel_speed},
    };
    if (cfg.initial.omega) initial["omega"] = vector_json(*cfg.initial.omega);
    if (cfg.initial.q) initial["q"] = vector_json(*cfg.initial.q);
    if (cfg.initial.wheel_speeds) initial["wheel_speeds"] = vector_json(*cfg.initial.wheel_speeds);
    if (cfg.initial.gimbal_rates) initial["gimbal_rates"] = vector_json(*cfg.initial.gimbal_rates);
    if (cfg.initial.gimbal_angles) initial["gimbal_angles"] = vector_json(*cfg.initial.gimbal_angles);

    return json{
        {"name", cfg.name},
        {"spacecraft", {{"J_b", matrix_rows(cfg.spacecraft.body_inertia())}}},
        {"cluster", cluster_to_json(cfg.spacecraft.cluster())},
        {"initial", initial},
        {"mpc", mpc},
        {"sim", {{"dt", cfg.dt}, {"t_end", cfg.t_end}}},
        {"output",
         {{"dir", cfg.output.dir.string()},
          {"trajectory", cfg.output.trajectory},
          {"summary", cfg.output.summary},
          {"ltv_dump", cfg.output.ltv_dump},
          {"dump_ltv", cfg.output.dump_ltv}}},
    };
}

ScenarioConfig parse_scenario(std::string_view text, std::string_view source)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        std::ostringstream os;
        os << source << ":" << line << ":" << col << ": " << e.what();
        throw ParseError(os.str());
    }
    check_keys(doc, "", {"name", "preset", "spacecraft", "cluster", "initial", "mpc", "sim", "output"});

    ScenarioConfig cfg;
    const bool has_preset = doc.contains("preset");
    if (has_preset) {
        if (!doc["preset"].is_string()) bad_field("preset", "expected a string");
        cfg = preset(doc["preset"].get<std::string>());
    }
    if (doc.contains("name")) {
        if (!doc["name"].is_string()) bad_field("name", "expected a string");
        cfg.name = doc["name"].get<std::string>();
    }

    // Spacecraft and cluster are rebuilt together since SpacecraftParams validates both.
    Mat3 jb;
    bool have_jb = has_preset;
    if (has_preset) jb = cfg.spacecraft.body_inertia();
    if (doc.contains("spacecraft")) {
        const json& s = doc["spacecraft"];
        check_keys(s, "spacecraft", {"J_b"});
        if (s.contains("J_b")) {
            const MatX m = as_matrix(s["J_b"], "spacecraft.J_b");
            if (m.rows() != 3 || m.cols() != 3) bad_field("spacecraft.J_b", "expected a 3x3 matrix");
            jb = m;
            have_jb = true;
        }
    }
    if (!have_jb) bad_field("spacecraft.J_b", "required");

    std::optional<ClusterParams> base_cluster;
    if (has_preset) base_cluster = cfg.spacecraft.cluster();
    ClusterParams cluster;
    if (doc.contains("cluster")) {
        cluster = parse_cluster(doc["cluster"], "cluster", base_cluster, cfg.theta_deg);
    } else if (base_cluster) {
        cluster = *base_cluster;
    } else {
        bad_field("cluster", "required");
    }
    try {
        cfg.spacecraft = SpacecraftParams(jb, cluster);
    } catch (const ValidationError& e) {
        bad_field("spacecraft", e.what());
    }

    if (doc.contains("initial")) {
        const json& j = doc["initial"];
        check_keys(j, "initial", {"seed", "omega_scale", "q_scale", "wheel_speed", "omega", "q",
                                  "wheel_speeds", "gimbal_rates", "gimbal_angles"});
        InitialConditions& ic = cfg.initial;
        if (j.contains("seed")) {
            if (!j["seed"].is_number_unsigned()) bad_field("initial.seed", "expected a non-negative integer");
            ic.seed = j["seed"].get<std::uint64_t>();
        }
        if (j.contains("omega_scale")) ic.omega_scale = as_number(j["omega_scale"], "initial.omega_scale");
        if (j.contains("q_scale")) ic.q_scale = as_number(j["q_scale"], "initial.q_scale");
        if (j.contains("wheel_speed")) ic.wheel_speed = as_number(j["wheel_speed"], "initial.wheel_speed");
        if (j.contains("omega")) ic.omega = as_vec3(j["omega"], "initial.omega");
        if (j.contains("q")) ic.q = as_vec3(j["q"], "initial.q");
        if (j.contains("wheel_speeds")) ic.wheel_speeds = as_vector(j["wheel_speeds"], "initial.wheel_speeds");
        if (j.contains("gimbal_rates")) ic.gimbal_rates = as_vector(j["gimbal_rates"], "initial.gimbal_rates");
        if (j.contains("gimbal_angles")) ic.gimbal_angles = as_vector(j["gimbal_angles"], "initial.gimbal_angles");
    }

    if (doc.contains("mpc")) {
        const json& j = doc["mpc"];
        check_keys(j, "mpc", {"sample_period", "poles", "stability_margin", "torque_limit",
                              "fallback", "plant", "warm_start", "external_torque", "placement",
                              "state_scaling"});
        MpcConfig& m = cfg.mpc;
        if (j.contains("sample_period")) m.sample_period = as_number(j["sample_period"], "mpc.sample_period");
        if (j.contains("poles")) {
            try {
                m.poles = PoleSet(as_poles(j["poles"], "mpc.poles"));
            } catch (const ValidationError& e) {
                bad_field("mpc.poles", e.what());
            }
        }
        if (j.contains("stability_margin")) {
            m.stability_margin = as_number(j["stability_margin"], "mpc.stability_margin");
        }
        if (j.contains("torque_limit")) {
            if (j["torque_limit"].is_null()) {
                m.torque_limit.reset();
            } else {
                m.torque_limit = as_number(j["torque_limit"], "mpc.torque_limit");
            }
        }
        if (j.contains("fallback")) m.fallback = as_fallback(j["fallback"], "mpc.fallback");
        if (j.contains("plant")) {
            if (j["plant"] == "nonlinear") {
                m.plant = PlantModel::Nonlinear;
            } else if (j["plant"] == "linear") {
                m.plant = PlantModel::Linear;
            } else {
                bad_field("mpc.plant", "expected \"nonlinear\" or \"linear\"");
            }
        }
        if (j.contains("warm_start")) {
            if (!j["warm_start"].is_boolean()) bad_field("mpc.warm_start", "expected true or false");
            m.warm_start = j["warm_start"].get<bool>();
        }
        if (j.contains("external_torque")) {
            m.external_torque = as_vec3(j["external_torque"], "mpc.external_torque");
        }
        if (j.contains("state_scaling")) {
            if (j["state_scaling"].is_null()) {
                m.state_scaling.reset();
            } else {
                const VecX v = as_vector(j["state_scaling"], "mpc.state_scaling");
                if (v.size() != 4) {
                    bad_field("mpc.state_scaling",
                              "expected four block scales [omega, wheel_speeds, gimbal_rates, q]");
                }
                m.state_scaling = std::array<double, 4>{v(0), v(1), v(2), v(3)};
            }
        }
        if (j.contains("placement")) {
            const json& pj = j["placement"];
            check_keys(pj, "mpc.placement", {"tolerance", "max_sweeps", "min_improvement", "objective"});
            if (pj.contains("tolerance")) {
                m.placement.tolerance = as_number(pj["tolerance"], "mpc.placement.tolerance");
            }
            if (pj.contains("max_sweeps")) {
                if (!pj["max_sweeps"].is_number_integer()) {
                    bad_field("mpc.placement.max_sweeps", "expected an integer");
                }
                m.placement.max_sweeps = pj["max_sweeps"].get<int>();
            }
            if (pj.contains("min_improvement")) {
                m.placement.min_improvement =
                    as_number(pj["min_improvement"], "mpc.placement.min_improvement");
            }
            if (pj.contains("objective")) {
                if (pj["objective"] == "abs-det") {
                    m.placement.objective = PlacementObjective::AbsDet;
                } else if (pj["objective"] == "none") {
                    m.placement.objective = PlacementObjective::None;
                } else {
                    bad_field("mpc.placement.objective", "expected \"abs-det\" or \"none\"");
                }
            }
        }
    } else if (!has_preset) {
        bad_field("mpc.poles", "required");
    }

    if (doc.contains("sim")) {
        const json& j = doc["sim"];
        check_keys(j, "sim", {"dt", "t_end"});
        if (j.contains("dt")) cfg.dt = as_number(j["dt"], "sim.dt");
        if (j.contains("t_end")) cfg.t_end = as_number(j["t_end"], "sim.t_end");
    }

    if (doc.contains("output")) {
        const json& j = doc["output"];
        check_keys(j, "output", {"dir", "trajectory", "summary", "ltv_dump", "dump_ltv"});
        auto str = [&j](const char* key) {
            if (!j[key].is_string()) bad_field(std::string("output.") + key, "expected a string");
            return j[key].get<std::string>();
        };
        if (j.contains("dir")) cfg.output.dir = str("dir");
        if (j.contains("trajectory")) cfg.output.trajectory = str("trajectory");
        if (j.contains("summary")) cfg.output.summary = str("summary");
        if (j.contains("ltv_dump")) cfg.output.ltv_dump = str("ltv_dump");
        if (j.contains("dump_ltv")) {
            if (!j["dump_ltv"].is_boolean()) bad_field("output.dump_ltv", "expected true or false");
            cfg.output.dump_ltv = j["dump_ltv"].get<bool>();
        }
    }

    validate_scenario(cfg);
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path.string() + ": cannot open file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

PlantState draw_initial_state(const ScenarioConfig& cfg, std::uint64_t seed)
{
    const int units = cfg.spacecraft.unit_count();
    SplitMix64 rng(seed);
    PlantState x = PlantState::zero(units);
    for (int i = 0; i < 3; ++i) x.omega(i) = rng.uniform() * cfg.initial.omega_scale;
    for (int i = 0; i < 3; ++i) x.q(i) = rng.uniform() * cfg.initial.q_scale;
    x.wheel_speeds.setConstant(cfg.initial.wheel_speed);
    return x;
}

PlantState initial_state(const ScenarioConfig& cfg)
{
    PlantState x = draw_initial_state(cfg, cfg.initial.seed);
    const InitialConditions& ic = cfg.initial;
    if (ic.omega) x.omega = *ic.omega;
    if (ic.q) x.q = *ic.q;
    if (ic.wheel_speeds) x.wheel_speeds = *ic.wheel_speeds;
    if (ic.gimbal_rates) x.gimbal_rates = *ic.gimbal_rates;
    if (ic.gimbal_angles) x.gimbal_angles = *ic.gimbal_angles;
    return x;
}

// ---------------------------------------------------------------------------
// CSV output

namespace {

void put(std::string& line, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += ',';
    line += buf;
}

void put_all(std::string& line, const VecX& v)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) put(line, v(i));
}

}  // namespace

std::vector<std::string> trajectory_columns(int units)
{
    std::vector<std::string> cols{"t", "w1", "w2", "w3"};
    auto add = [&](const char* prefix, int count) {
        for (int i = 1; i <= count; ++i) cols.push_back(prefix + std::to_string(i));
    };
    add("ws", units);
    add("wg", units);
    add("q", 3);
    add("gamma", units);
    add("ts", units);
    add("tg", units);
    cols.insert(cols.end(), {"eigen_margin", "robustness", "fallback"});
    return cols;
}

void write_trajectory_csv(std::ostream& os, const std::vector<StepRecord>& records, int units)
{
    const auto cols = trajectory_columns(units);
    std::string header;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) header += ',';
        header += cols[i];
    }
    os << header << '\n';
    for (const StepRecord& r : records) {
        std::string line;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", r.t);
        line += buf;
        put_all(line, r.x.omega);
        put_all(line, r.x.wheel_speeds);
        put_all(line, r.x.gimbal_rates);
        put_all(line, r.x.q);
        put_all(line, wrap_two_pi(r.x.gimbal_angles));
        put_all(line, r.u.wheel_torque);
        put_all(line, r.u.gimbal_torque);
        put(line, r.eigen_margin);
        put(line, r.robustness);
        line += r.fallback_used ? ",1" : ",0";
        os << line << '\n';
    }
}

void write_ltv_rows(std::ostream& os, long sample, const LtvModel& model)
{
    auto emit = [&](const char* name, const MatX& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            std::string line = std::to_string(sample);
            put(line, model.timestamp);
            line += ',';
            line += name;
            line += ',' + std::to_string(r);
            put_all(line, m.row(r).transpose());
            os << line << '\n';
        }
    };
    emit("A", model.a);
    emit("B", model.b);
}

// ---------------------------------------------------------------------------

std::string summary_text(const ScenarioConfig& cfg, const RunOutcome& outcome)
{
    std::ostringstream os;
    os.precision(10);
    os << "scenario: " << cfg.name << '\n';
    os << "seed: " << cfg.initial.seed << '\n';
    os << "samples: " << outcome.run.records.size() << '\n';
    if (!outcome.run.records.empty()) {
        const StepRecord& last = outcome.run.records.back();
        os << "terminal_t: " << last.t << '\n';
        os << "terminal_norm_omega: " << last.x.omega.norm() << '\n';
        os << "terminal_norm_q: " << last.x.q.norm() << '\n';
        os << "terminal_norm_wheel_speeds: " << last.x.wheel_speeds.norm() << '\n';
        os << "terminal_norm_gimbal_rates: " << last.x.gimbal_rates.norm() << '\n';
    }
    os << "momentum_relative_drift: " << outcome.momentum_drift << '\n';
    const StabilityAudit& a = outcome.audit;
    os << "audit_max_closed_loop_norm: " << a.max_closed_loop_norm << '\n';
    os << "audit_max_eigen_real: " << a.max_eigen_real << '\n';
    os << "audit_max_gain_rate: " << a.max_gain_rate << '\n';
    os << "audit_margin_violations: " << a.margin_violations << '\n';
    os << "audit_fallback_steps: " << a.fallback_steps << '\n';
    os << "diverged: " << (outcome.run.diverged ? "yes" : "no") << '\n';
    if (!outcome.message.empty()) os << "message: " << outcome.message << '\n';
    return os.str();
}

RunOutcome run(const ScenarioConfig& cfg)
{
    RunOutcome outcome;
    std::error_code ec;
    std::filesystem::create_directories(cfg.output.dir, ec);
    if (ec) {
        throw Error("cannot create output directory " + cfg.output.dir.string() + ": " + ec.message());
    }

    std::ofstream ltv;
    if (cfg.output.dump_ltv) {
        const auto path = cfg.output.dir / cfg.output.ltv_dump;
        ltv.open(path, std::ios::binary);
        if (!ltv) throw Error("cannot write " + path.string());
    }
    long sample = 0;
    ModelObserver observer;
    if (cfg.output.dump_ltv) {
        observer = [&](const LtvModel& m) { write_ltv_rows(ltv, sample++, m); };
    }

    const PlantState x0 = initial_state(cfg);
    try {
        outcome.run = run_closed_loop(cfg.spacecraft, x0, cfg.mpc, cfg.dt, cfg.t_end, observer);
    } catch (const PlacementFailure& e) {
        outcome.exit_code = kExitPlacement;
        outcome.message = e.what();
    } catch (const UncontrollableError& e) {
        outcome.exit_code = kExitPlacement;
        outcome.message = e.what();
    }

    const auto& recs = outcome.run.records;
    if (!recs.empty()) {
        outcome.audit = theorem1_audit(recs, cfg.mpc.stability_margin, cfg.mpc.sample_period);
        const double h0 = plant_momentum(cfg.spacecraft, recs.front().x).norm();
        for (const StepRecord& r : recs) {
            const double h = plant_momentum(cfg.spacecraft, r.x).norm();
            const double d = h0 > 0.0 ? std::abs(h - h0) / h0 : std::abs(h - h0);
            outcome.momentum_drift = std::max(outcome.momentum_drift, d);
        }
    }
    if (outcome.run.diverged) {
        outcome.exit_code = kExitDivergence;
        outcome.message = outcome.run.diagnostic;
    }

    const auto traj_path = cfg.output.dir / cfg.output.trajectory;
    std::ofstream traj(traj_path, std::ios::binary);
    if (!traj) throw Error("cannot write " + traj_path.string());
    write_trajectory_csv(traj, recs, cfg.spacecraft.unit_count());

    const auto sum_path = cfg.output.dir / cfg.output.summary;
    std::ofstream sum(sum_path, std::ios::binary);
    if (!sum) throw Error("cannot write " + sum_path.string());
    sum << summary_text(cfg, outcome);
    return outcome;
}

BigInt grid_design_count(unsigned p_gamma, unsigned p_w, unsigned p_ws, unsigned p_wg,
                         unsigned p_q, unsigned units)
{
    if (p_gamma < 1 || p_w < 1 || p_ws < 1 || p_wg < 1 || p_q < 1 || units < 1) {
        throw ValidationError("grid_design_count: every argument must be at least 1");
    }
    using boost::multiprecision::pow;
    return pow(BigInt(p_gamma), units) * pow(BigInt(p_w), 3) * pow(BigInt(p_ws), units) *
           pow(BigInt(p_wg), units) * pow(BigInt(p_q), 3);
}

}  // namespace vscmg
