#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "test_util.hpp"
#include "vscmg/linearization.hpp"
#include "vscmg/so3_math.hpp"

using namespace vscmg;
namespace fs = std::filesystem;

namespace {

constexpr int N = 4;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail)
{
    std::printf("%s  %-24s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Central differences of the body-rate derivative over the control state.
MatX numeric_jacobian(const SpacecraftParams& p, const PlantState& x)
{
    const VecX v = x.control_vector();
    MatX j(3, v.size());
    for (Eigen::Index c = 0; c < v.size(); ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(v(c)));
        VecX vp = v, vm = v;
        vp(c) += h;
        vm(c) -= h;
        const auto dp = state_derivative(p, PlantState::from_control_vector(vp, x.gimbal_angles),
                                         ControlInput::zero(N), Vec3::Zero());
        const auto dm = state_derivative(p, PlantState::from_control_vector(vm, x.gimbal_angles),
                                         ControlInput::zero(N), Vec3::Zero());
        j.col(c) = (dp.omega - dm.omega) / (2.0 * h);
    }
    return j;
}

void jacobian_fidelity()
{
    const auto t0 = std::chrono::steady_clock::now();
    const SpacecraftParams p = fixtures::paper_spacecraft();
    std::mt19937_64 rng(41);
    double worst = 0.0;  // max error / tolerance over all blocks
    for (int i = 0; i < 100; ++i) {
        const PlantState x = fixtures::random_state(rng, N, 1e-2 / std::sqrt(3.0), 20.0, 1.0,
                                                    1e-1 / std::sqrt(3.0));
        const JacobianBlocks j = jac_blocks(p, x);
        const MatX fd = numeric_jacobian(p, x);
        const MatX blocks[] = {j.f11, j.f12, j.f13};
        const MatX fds[] = {fd.middleCols(0, 3), fd.middleCols(3, N), fd.middleCols(3 + N, N)};
        for (int b = 0; b < 3; ++b) {
            const double tol = std::max(1e-6, 1e-4 * blocks[b].norm());
            worst = std::max(worst, (blocks[b] - fds[b]).cwiseAbs().maxCoeff() / tol);
        }
    }
    const JacobianBlocks o = jac_blocks(p, PlantState::zero(N));
    const bool origin = o.f41 == 0.5 * Mat3::Identity() && o.f44 == Mat3::Zero();
    const double secs = seconds_since(t0);
    report("jacobian-fidelity", worst <= 1.0 && origin && secs < 10.0,
           fmt("worst err/tol %.3g, origin blocks %s, %.2f s", worst, origin ? "exact" : "wrong",
               secs));
}

void geometry()
{
    const ClusterParams c = pyramid_config(fixtures::deg(kPyramidThetaDeg));
    std::mt19937_64 rng(22);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ClusterState st =
            retarget_transverse(axes_of(c, fixtures::random_vec(rng, N, 50.0)), c.gimbal_axes);
        for (int k = 0; k < N; ++k) {
            const Vec3 g = c.gimbal_axes.col(k), s = st.spin_axes.col(k),
                       t = st.transverse_axes.col(k);
            const double errs[] = {std::abs(s.norm() - 1.0), std::abs(t.norm() - 1.0),
                                   std::abs(g.dot(s)),       std::abs(g.dot(t)),
                                   std::abs(s.dot(t)),       (g.cross(s) - t).norm()};
            for (double e : errs) worst = std::max(worst, e);
        }
    }
    MatX as0(3, 4);
    as0 << 0, -1, 0, 1,
           1, 0, -1, 0,
           0, 0, 0, 0;
    const bool exact = axes_of(c, VecX::Zero(N)).spin_axes == as0;
    report("geometry", worst <= 1e-12 && exact,
           fmt("worst triad error %.3g, A_s(0) %s", worst, exact ? "exact" : "differs"));
}

std::vector<Complex> random_stable_poles(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> re(-3.0, -0.1), im(0.1, 2.0), coin(0.0, 1.0);
    std::vector<Complex> p;
    while (static_cast<int>(p.size()) < n) {
        if (static_cast<int>(p.size()) + 2 <= n && coin(rng) < 0.5) {
            const Complex z(re(rng), im(rng));
            p.push_back(z);
            p.push_back(std::conj(z));
        } else {
            p.emplace_back(re(rng), 0.0);
        }
    }
    return p;
}

MatX random_matrix(std::mt19937_64& rng, int r, int c)
{
    std::normal_distribution<double> g(0.0, 1.0);
    MatX m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
}

// Returns the multiset error, or +inf when assign_poles rejects its own result.
double place_error(const MatX& a, const MatX& b, const std::vector<Complex>& poles, bool& real_k)
{
    try {
        const GainResult r = assign_poles(a, b, PoleSet(poles));
        real_k = real_k && r.k.allFinite();
        return multiset_pole_error(closed_loop_eigs(a, b, r.k), poles);
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

void pole_placement()
{
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<int> nd(1, 14);
    int placed = 0, missed = 0;
    double worst = 0.0;
    bool real_k = true;
    std::string first_miss;
    while (placed < 200) {
        const int n = nd(rng);
        const int m = std::uniform_int_distribution<int>(1, std::min(n, 8))(rng);
        const MatX a = random_matrix(rng, n, n);
        const MatX b = random_matrix(rng, n, m);
        if (controllability_rank(a, b) < n) continue;
        const auto poles = random_stable_poles(rng, n);
        const double e = place_error(a, b, poles, real_k);
        ++placed;
        if (!(e <= 1e-6)) {
            if (missed++ == 0) first_miss = fmt(" (first: pair %d, n = %d, m = %d)", placed, n, m);
        } else {
            worst = std::max(worst, e);
        }
    }
    const SpacecraftParams p = fixtures::paper_spacecraft();
    const ScenarioConfig cfg = preset(kPaperPreset);
    const LtvModel model = build_ltv(p, initial_state(cfg));
    const double preset_err = place_error(model.a, model.b, paper_s4_poles(), real_k);
    report("pole-placement", missed == 0 && preset_err <= 1e-6 && real_k,
           fmt("%d/200 random pairs within 1e-6 (worst passing %.3g)%s, paper-s4 t=0 error %.3g",
               200 - missed, worst, first_miss.c_str(), preset_err));
}

void closed_loop(const fs::path& dir)
{
    ScenarioConfig cfg = preset(kPaperPreset);
    cfg.output.dir = dir / "closed_loop";
    const auto t0 = std::chrono::steady_clock::now();
    const RunOutcome out = run(cfg);
    const double secs = seconds_since(t0);
    report("momentum-conservation",
           out.exit_code == kExitOk && out.momentum_drift <= 1e-6 && secs < 60.0,
           fmt("relative drift of |h| %.3g over %.0f s, %.2f s", out.momentum_drift, cfg.t_end,
               secs));

    const auto& recs = out.run.records;
    const auto at60 = std::find_if(recs.begin(), recs.end(),
                                   [](const StepRecord& r) { return r.t >= 60.0 - 1e-9; });
    double nq = INFINITY, nw = INFINITY;
    if (at60 != recs.end()) {
        nq = at60->x.q.norm();
        nw = at60->x.omega.norm();
    }
    report("closed-loop-convergence",
           out.exit_code == kExitOk && nq <= 1e-3 && nw <= 1e-4 &&
               out.audit.margin_violations == 0 && out.audit.fallback_steps == 0,
           fmt("seed %llu: |q| %.3g, |w| %.3g at t = 60 s; margin violations %zu, fallback "
               "steps %zu, max Re %.9g",
               static_cast<unsigned long long>(cfg.initial.seed), nq, nw,
               out.audit.margin_violations, out.audit.fallback_steps, out.audit.max_eigen_real));
}

void controllability()
{
    const SpacecraftParams p = fixtures::paper_spacecraft();
    const ScenarioConfig cfg = preset(kPaperPreset);
    const int drawn = controllability_rank(build_ltv(p, initial_state(cfg)));
    const int origin = controllability_rank(build_ltv(p, PlantState::zero(N)));
    report("controllability-rank", drawn == 14 && origin < 14,
           fmt("rank %d at the drawn state, %d at x = 0", drawn, origin));
}

void grid_count()
{
    const BigInt c = grid_design_count(8, 8, 8, 8, 8, 4);
    const BigInt expected = boost::multiprecision::pow(BigInt(8), 18);
    std::ostringstream os;
    os << c;
    report("gridcount", c == expected, os.str());
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void determinism(const fs::path& dir)
{
    ScenarioConfig cfg = preset(kPaperPreset);
    cfg.output.dump_ltv = true;
    cfg.output.dir = dir / "det_a";
    run(cfg);
    cfg.output.dir = dir / "det_b";
    run(cfg);
    const std::string ta = slurp(dir / "det_a" / cfg.output.trajectory);
    const std::string tb = slurp(dir / "det_b" / cfg.output.trajectory);
    const std::string la = slurp(dir / "det_a" / cfg.output.ltv_dump);
    const std::string lb = slurp(dir / "det_b" / cfg.output.ltv_dump);
    report("determinism", !ta.empty() && ta == tb && !la.empty() && la == lb,
           fmt("trajectory %zu bytes, ltv dump %zu bytes, %s", ta.size(), la.size(),
               ta == tb && la == lb ? "identical" : "differ"));
}

}  // namespace

int main()
{
    const fs::path dir = fs::temp_directory_path() / "vscmg_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const std::function<void()> criteria[] = {
        jacobian_fidelity,
        geometry,
        [&] { closed_loop(dir); },
        pole_placement,
        controllability,
        grid_count,
        [&] { determinism(dir); },
    };
    for (const auto& c : criteria) {
        try {
            c();
        } catch (const std::exception& e) {
            report("error", false, e.what());
        }
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
