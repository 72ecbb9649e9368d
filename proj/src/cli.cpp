#include "lcvx/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "lcvx/config.hpp"
#include "lcvx/error.hpp"
#include "lcvx/export.hpp"
#include "lcvx/micp.hpp"
#include "lcvx/solver.hpp"

namespace lcvx
{

using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
    {
        throw std::runtime_error("cannot write " + p.string());
    }
    f << text;
}

void write_json(const fs::path& p, const json& j)
{
    write_file(p, j.dump(2) + "\n");
}

bool all_rays(const ProblemSpec& spec)
{
    for (const auto& c : spec.cones)
    {
        if (!c.is_ray())
        {
            return false;
        }
    }
    return true;
}

/// Condition 4 for quadratic costs needs a terminal point; `x_tf` may be empty otherwise.
ConditionReport conditions_for(const ProblemConfig& cfg, double tf, const Eigen::VectorXd& x_tf)
{
    const ProblemSpec& spec = cfg.spec;
    ConditionReport rep;
    rep.results.push_back(check_condition1(spec.sys, cfg.conditions));
    rep.results.push_back(check_condition2(spec.sys, spec.cones, spec.K, cfg.conditions));
    rep.results.push_back(check_condition3(spec.sys, spec.cones, spec.K, cfg.conditions));
    const bool needs_point = spec.terminal.cost == TerminalSpec::Cost::Quadratic;
    if (needs_point && x_tf.size() == 0)
    {
        ConditionResult r;
        r.condition = 4;
        r.verdict = Verdict::Inconclusive;
        r.detail = "quadratic terminal cost: no terminal point available";
        rep.results.push_back(r);
        return rep;
    }
    const Eigen::VectorXd x = x_tf.size() > 0 ? x_tf : spec.x0;
    try
    {
        rep.results.push_back(check_condition4(spec.terminal, tf, x, cfg.conditions));
    }
    catch (const InvalidInput& e)
    {
        ConditionResult r;
        r.condition = 4;
        r.verdict = Verdict::Fails;
        r.detail = e.what();
        rep.results.push_back(r);
    }
    return rep;
}

SolveOptions solve_options(const ProblemConfig& cfg)
{
    SolveOptions o;
    o.conic = cfg.solver;
    return o;
}

int verdict_exit(Verdict v)
{
    switch (v)
    {
    case Verdict::Holds:
        return kExitOk;
    case Verdict::Inconclusive:
        return kExitInconclusive;
    case Verdict::Fails:
        return kExitFail;
    }
    return kExitFail;
}

int cmd_check(const std::string& config_path, const std::string& out_path, std::ostream& out)
{
    const ProblemConfig cfg = load_config(config_path);
    Eigen::VectorXd x_tf;
    double tf = cfg.tf.value_or(cfg.spec.terminal.fixes_final_time() ? cfg.spec.terminal.fixed_final_time() : 1.0);
    if (cfg.spec.terminal.cost == TerminalSpec::Cost::Quadratic && cfg.tf)
    {
        const FixedTfResult r = solve_fixed_tf(cfg.spec, *cfg.tf, cfg.N, solve_options(cfg));
        if (r.feasible)
        {
            x_tf = r.solution->x.back();
        }
    }
    const ConditionReport rep = conditions_for(cfg, tf, x_tf);
    const json j = to_json(rep);
    if (out_path.empty())
    {
        out << j.dump(2) << "\n";
    }
    else
    {
        write_json(out_path, j);
        out << "conditions: " << to_string(rep.overall()) << " (report written to " << out_path << ")\n";
    }
    if (!all_rays(cfg.spec))
    {
        out << "warning: non-ray pointing sets; the a-priori guarantee is unverified, rely on a-posteriori checks\n";
    }
    return verdict_exit(rep.overall());
}

struct SolveArgs
{
    std::string config;
    std::string out_dir{"lcvx_out"};
    double tf{0.0};
    bool min_time{false};
};

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err)
{
    const ProblemConfig cfg = load_config(a.config);
    const ProblemSpec& spec = cfg.spec;
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    const auto t0 = std::chrono::steady_clock::now();

    json summary;
    summary["config"] = a.config;
    FixedTfResult result;
    try
    {
        const bool use_min_time =
            a.min_time || (a.tf <= 0.0 && !cfg.tf && spec.terminal.cost == TerminalSpec::Cost::MinimumTime);
        if (use_min_time)
        {
            if (!cfg.has_bracket())
            {
                throw ConfigError("/time/bracket", "minimum-time search needs a bracket");
            }
            MinTimeOptions mo;
            mo.solve = solve_options(cfg);
            mo.tol_t = cfg.tol_t;
            MinTimeResult mt = min_time(spec, cfg.N, cfg.t_lo, cfg.t_hi, mo);
            json probes = json::array();
            for (const auto& p : mt.probes)
            {
                probes.push_back({{"tf", p.tf}, {"feasible", p.feasible}, {"status", p.status}});
            }
            summary["min_time"] = {{"bracket", {cfg.t_lo, cfg.t_hi}},
                                   {"tol", cfg.tol_t},
                                   {"largest_infeasible_tf", mt.t_infeasible},
                                   {"probes", probes},
                                   {"warnings", mt.warnings}};
            for (const auto& w : mt.warnings)
            {
                err << "warning: " << w << "\n";
            }
            result = std::move(mt.best);
        }
        else
        {
            const double tf = a.tf > 0.0 ? a.tf : cfg.tf.value_or(0.0);
            if (!(tf > 0.0))
            {
                throw ConfigError("/time/tf", "fixed-time solve needs tf (config or --tf)");
            }
            result = solve_fixed_tf(spec, tf, cfg.N, solve_options(cfg));
        }
    }
    catch (const SolverFailure& e)
    {
        write_file(dir / "diagnostics.txt", std::string(e.what()) + "\n");
        err << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }

    if (!result.feasible)
    {
        summary["status"] = "infeasible";
        summary["wall_time"] = seconds_since(t0);
        write_json(dir / "summary.json", summary);
        out << "infeasible at tf = " << result.transcription.tf << "\n";
        return kExitFail;
    }
    const Solution& sol = *result.solution;
    const AdjointTrace trace = extract_primer(spec, result.transcription, result.conic);
    const VerificationReport ver = verify_lossless(sol, spec, cfg.verify, &trace);
    const ConditionReport cond = conditions_for(cfg, sol.tf, sol.x.back());
    const double wall = seconds_since(t0);

    summary["status"] = "optimal";
    summary["solution"] = solution_summary(sol);
    summary["verification"] = to_json(ver);
    summary["adjoint"] = {{"available", trace.available},
                          {"normalization", trace.normalization},
                          {"recursion_residual", trace.available
                                                     ? adjoint_recursion_residual(trace, result.transcription.dynamics.Ad)
                                                     : 0.0},
                          {"note", trace.note}};
    summary["conditions"] = to_json(cond);
    summary["wall_time"] = wall;
    write_json(dir / "summary.json", summary);

    std::ofstream traj(dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(traj, sol, &trace);
    std::ofstream states(dir / "plot_states.csv", std::ios::binary);
    write_states_csv(states, sol);
    std::ofstream norms(dir / "plot_input_norms.csv", std::ios::binary);
    write_input_norms_csv(norms, sol);
    std::ofstream gains(dir / "plot_gains.csv", std::ios::binary);
    write_gains_csv(gains, sol, trace);

    out << "tf = " << format_real(sol.tf) << " s, cost = " << format_real(sol.cost)
        << ", conformance = " << ver.conformance << ", cardinality " << (ver.cardinality_ok ? "ok" : "VIOLATED")
        << ", pointing " << (ver.pointing_ok ? "ok" : "VIOLATED") << ", wall " << wall << " s\n";
    if (!all_rays(spec))
    {
        out << "warning: non-ray pointing sets; the a-priori guarantee is unverified, see the verification report\n";
    }
    return kExitOk;
}

struct CompareArgs
{
    std::string config;
    std::string out_dir{"lcvx_out"};
    double tf{0.0};
    double gap{1e-4};
    int node_limit{20000};
};

int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err)
{
    const ProblemConfig cfg = load_config(a.config);
    const ProblemSpec& spec = cfg.spec;
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    try
    {
        const auto t0 = std::chrono::steady_clock::now();
        const FixedTfResult rel = solve_fixed_tf(spec, a.tf, cfg.N, solve_options(cfg));
        const double t_rel = seconds_since(t0);
        BnbOptions bo;
        bo.gap_tol = a.gap;
        bo.node_limit = a.node_limit;
        bo.conic = cfg.solver;
        const auto t1 = std::chrono::steady_clock::now();
        const BnbResult bnb = solve_micp_bnb(spec, a.tf, cfg.N, bo);
        const double t_bnb = seconds_since(t1);

        json rs = {{"status", rel.feasible ? "optimal" : "infeasible"}, {"wall_time", t_rel}};
        if (rel.feasible)
        {
            rs["solution"] = solution_summary(*rel.solution);
            const AdjointTrace trace = extract_primer(spec, rel.transcription, rel.conic);
            rs["verification"] = to_json(verify_lossless(*rel.solution, spec, cfg.verify, &trace));
        }
        json ms = {{"status", to_string(bnb.status)}, {"stats", to_json(bnb.stats)}};
        if (bnb.solution)
        {
            ms["solution"] = solution_summary(*bnb.solution);
        }
        write_json(dir / "relaxed_summary.json", rs);
        write_json(dir / "micp_summary.json", ms);
        json cmp = {{"tf", a.tf}, {"relaxed_wall_time", t_rel}, {"micp_wall_time", t_bnb}};
        if (rel.feasible && bnb.solution)
        {
            const double jr = rel.solution->cost;
            const double jm = bnb.solution->cost;
            cmp["relaxed_cost"] = jr;
            cmp["micp_cost"] = jm;
            cmp["relative_difference"] = std::abs(jr - jm) / std::max(1.0, std::abs(jm));
        }
        cmp["speedup"] = t_rel > 0.0 ? t_bnb / t_rel : 0.0;
        write_json(dir / "comparison.json", cmp);
        out << cmp.dump(2) << "\n";
        return rel.feasible && bnb.solution ? kExitOk : kExitFail;
    }
    catch (const SolverFailure& e)
    {
        write_file(dir / "diagnostics.txt", std::string(e.what()) + "\n");
        err << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}

int cmd_preset(const std::string& name, const std::string& out_path, std::ostream& out)
{
    if (name != "docking")
    {
        throw ConfigError("preset", "unknown preset \"" + name + "\" (available: docking)");
    }
    const std::string text = dump_config(docking_preset());
    if (out_path.empty())
    {
        out << text;
    }
    else
    {
        write_file(out_path, text);
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Lossless convexification toolkit for semi-continuous cone-constrained inputs", "lcvx"};
    app.require_subcommand(1);

    std::string check_config;
    std::string check_out;
    auto* check = app.add_subcommand("check", "Evaluate the a-priori conditions");
    check->add_option("config", check_config, "Problem JSON")->required();
    check->add_option("--out", check_out, "Write the report here instead of stdout");

    SolveArgs sa;
    auto* solve_cmd = app.add_subcommand("solve", "Solve the relaxed problem and verify it");
    solve_cmd->add_option("config", sa.config, "Problem JSON")->required();
    auto* tf_opt = solve_cmd->add_option("--tf", sa.tf, "Fixed final time (s)");
    auto* mt_opt = solve_cmd->add_flag("--min-time", sa.min_time, "Bisection on the final time");
    tf_opt->excludes(mt_opt);
    solve_cmd->add_option("--out", sa.out_dir, "Output directory");

    CompareArgs ca;
    auto* cmp = app.add_subcommand("compare", "Relaxed solve versus branch-and-bound at fixed tf");
    cmp->add_option("config", ca.config, "Problem JSON")->required();
    cmp->add_option("--tf", ca.tf, "Final time (s)")->required();
    cmp->add_option("--out", ca.out_dir, "Output directory");
    cmp->add_option("--gap", ca.gap, "Relative optimality gap");
    cmp->add_option("--node-limit", ca.node_limit, "Node relaxation limit");

    std::string preset_name;
    std::string preset_out;
    auto* preset = app.add_subcommand("preset", "Print a built-in problem");
    preset->add_option("name", preset_name, "Preset name (docking)")->required();
    preset->add_option("--out", preset_out, "Write to this file");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try
    {
        app.parse(reversed);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitBadConfig;
    }

    try
    {
        if (*check)
        {
            return cmd_check(check_config, check_out, out);
        }
        if (*solve_cmd)
        {
            return cmd_solve(sa, out, err);
        }
        if (*cmp)
        {
            return cmd_compare(ca, out, err);
        }
        if (*preset)
        {
            return cmd_preset(preset_name, preset_out, out);
        }
    }
    catch (const ConfigError& e)
    {
        err << "config error at " << e.what() << "\n";
        return kExitBadConfig;
    }
    catch (const InvalidInput& e)
    {
        err << "invalid input: " << e.what() << "\n";
        return kExitBadConfig;
    }
    catch (const SolverFailure& e)
    {
        err << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitSolverFailure;
    }
    return kExitBadConfig;
}

}  // namespace lcvx
