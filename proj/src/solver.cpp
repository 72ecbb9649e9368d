#include "lcvx/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lcvx/error.hpp"

namespace lcvx
{

Eigen::MatrixXd Solution::input_norms() const
{
    Eigen::MatrixXd out(N, inputs());
    for (int k = 0; k < N; ++k)
    {
        for (int i = 0; i < inputs(); ++i)
        {
            out(k, i) = u[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].norm();
        }
    }
    return out;
}

Solution assemble_solution(const ProblemSpec& spec, const Transcription& tr, const ConicSolution& sol)
{
    PrimalTrajectory traj = extract_primal(tr, sol.z);
    Solution out;
    out.tf = tr.tf;
    out.dt = tr.dynamics.dt;
    out.N = tr.index.N;
    out.x = std::move(traj.x);
    out.u = std::move(traj.u);
    out.sigma = std::move(traj.sigma);
    out.gamma = std::move(traj.gamma);
    out.status = sol.status;
    out.primal_residual = sol.primal_residual;
    out.dual_residual = sol.dual_residual;
    out.gap = sol.gap;
    out.iterations = sol.iterations;
    out.reduced_accuracy = sol.reduced_accuracy;
    const auto& term = spec.terminal;
    const Eigen::VectorXd& xN = out.x.back();
    switch (term.cost)
    {
    case TerminalSpec::Cost::MinimumTime:
        out.cost = out.tf;
        break;
    case TerminalSpec::Cost::Affine:
        out.cost = term.q.dot(xN) + term.c * out.tf;
        break;
    case TerminalSpec::Cost::Quadratic:
        out.cost = (term.W * (xN - term.x_ref)).squaredNorm();
        break;
    }
    return out;
}

FixedTfResult solve_fixed_tf(const ProblemSpec& spec, double tf, int N, const SolveOptions& opts)
{
    FixedTfResult res;
    res.transcription = transcribe(spec, tf, N, opts.transcription);
    res.conic = solve(res.transcription.program, opts.conic);
    switch (res.conic.status)
    {
    case ConicStatus::Optimal:
        res.feasible = true;
        res.solution = assemble_solution(spec, res.transcription, res.conic);
        break;
    case ConicStatus::PrimalInfeasible:
        res.feasible = false;
        break;
    case ConicStatus::DualInfeasible:
    {
        std::ostringstream os;
        os << "relaxed problem reported unbounded at tf = " << tf << ": " << res.conic.diagnostics;
        throw SolverFailure(os.str());
    }
    case ConicStatus::NumericalFailure:
    {
        std::ostringstream os;
        os << "conic solve failed at tf = " << tf << " after " << res.conic.iterations
           << " iterations: " << res.conic.diagnostics;
        throw SolverFailure(os.str());
    }
    }
    return res;
}

MinTimeResult min_time(const ProblemSpec& spec, int N, double t_lo, double t_hi, const MinTimeOptions& opts)
{
    if (spec.terminal.cost != TerminalSpec::Cost::MinimumTime)
    {
        throw InvalidInput("min_time: the terminal cost must be minimum time");
    }
    if (spec.terminal.fixes_final_time())
    {
        throw InvalidInput("min_time: the boundary map fixes the final time");
    }
    if (!(t_lo > 0.0) || !(t_lo < t_hi) || !std::isfinite(t_hi))
    {
        throw InvalidInput("min_time: need 0 < t_lo < t_hi");
    }
    if (!(opts.tol_t > 0.0))
    {
        throw InvalidInput("min_time: tol_t must be positive");
    }
    MinTimeResult out;
    SolveOptions feas = opts.solve;
    feas.transcription.on_time_objective = false;

    auto probe = [&](double tf) -> std::optional<FixedTfResult> {
        try
        {
            FixedTfResult r = solve_fixed_tf(spec, tf, N, feas);
            out.probes.push_back({tf, r.feasible, to_string(r.conic.status)});
            return r;
        }
        catch (const SolverFailure& e)
        {
            out.probes.push_back({tf, false, "numerical-failure"});
            std::ostringstream os;
            os << "solve at tf = " << tf << " failed numerically and was treated as infeasible: " << e.what();
            out.warnings.push_back(os.str());
            return std::nullopt;
        }
    };

    std::optional<FixedTfResult> hi_res = probe(t_hi);
    if (!hi_res || !hi_res->feasible)
    {
        std::ostringstream os;
        os << "min_time: no feasible solution at the upper bracket t_hi = " << t_hi << "; widen the bracket";
        throw InvalidInput(os.str());
    }
    double hi = t_hi;
    double lo = t_lo;
    std::optional<FixedTfResult> lo_res = probe(t_lo);
    if (lo_res && lo_res->feasible)
    {
        hi = t_lo;
        hi_res = std::move(lo_res);
    }
    else
    {
        while (hi - lo > opts.tol_t)
        {
            const double mid = 0.5 * (lo + hi);
            std::optional<FixedTfResult> r = probe(mid);
            if (r && r->feasible)
            {
                hi = mid;
                hi_res = std::move(r);
            }
            else
            {
                lo = mid;
            }
        }
    }
    out.t_infeasible = lo;

    double min_feasible = std::numeric_limits<double>::infinity();
    double max_infeasible = -std::numeric_limits<double>::infinity();
    for (const auto& p : out.probes)
    {
        if (p.feasible)
        {
            min_feasible = std::min(min_feasible, p.tf);
        }
        else if (p.status != "numerical-failure")
        {
            max_infeasible = std::max(max_infeasible, p.tf);
        }
    }
    if (max_infeasible > min_feasible)
    {
        std::ostringstream os;
        os << "non-monotone feasibility: infeasible at tf = " << max_infeasible << " but feasible at tf = "
           << min_feasible;
        out.warnings.push_back(os.str());
    }

    out.best = std::move(*hi_res);
    if (opts.polish)
    {
        SolveOptions pol = opts.solve;
        pol.transcription.on_time_objective = true;
        try
        {
            FixedTfResult r = solve_fixed_tf(spec, hi, N, pol);
            if (r.feasible)
            {
                out.best = std::move(r);
            }
            else
            {
                out.warnings.push_back("polish solve reported infeasible; keeping the feasibility solution");
            }
        }
        catch (const SolverFailure& e)
        {
            out.warnings.push_back(std::string("polish solve failed; keeping the feasibility solution: ") + e.what());
        }
    }
    return out;
}

AdjointTrace extract_primer(const ProblemSpec& spec, const Transcription& tr, const ConicSolution& sol)
{
    AdjointTrace t;
    const IndexMap& ix = tr.index;
    const int M = spec.inputs();
    if (!sol.optimal() || sol.nu.size() != tr.program.equalities())
    {
        t.note = "duals unavailable";
        return t;
    }
    t.lambda.resize(static_cast<std::size_t>(ix.N));
    t.primer.resize(static_cast<std::size_t>(ix.N));
    double peak = 0.0;
    for (int k = 0; k < ix.N; ++k)
    {
        const Eigen::VectorXd nu = sol.nu.segment(tr.dynamics_row(k), ix.n);
        t.lambda[static_cast<std::size_t>(k)] = nu.cwiseQuotient(tr.state_scale);
        t.primer[static_cast<std::size_t>(k)] = tr.dynamics.Bd.transpose() * t.lambda[static_cast<std::size_t>(k)];
        peak = std::max(peak, t.primer[static_cast<std::size_t>(k)].norm());
    }
    t.gains = Eigen::MatrixXd::Zero(ix.N, M);
    if (!(peak > 0.0) || !std::isfinite(peak))
    {
        t.note = "primer vanishes identically";
        return t;
    }
    t.available = true;
    t.normalization = peak;
    for (int k = 0; k < ix.N; ++k)
    {
        auto& y = t.primer[static_cast<std::size_t>(k)];
        y /= peak;
        for (int i = 0; i < M; ++i)
        {
            t.gains(k, i) = project_gain(spec.cones[static_cast<std::size_t>(i)], y);
        }
    }
    return t;
}

double adjoint_recursion_residual(const AdjointTrace& trace, const Eigen::MatrixXd& Ad)
{
    double peak = 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.lambda.size(); ++k)
    {
        peak = std::max(peak, trace.lambda[k].norm());
        if (k > 0)
        {
            worst = std::max(worst, (trace.lambda[k - 1] - Ad.transpose() * trace.lambda[k]).norm());
        }
    }
    return peak > 0.0 ? worst / peak : 0.0;
}

VerifyTolerances VerifyTolerances::resolved(double rho1, double rho2) const
{
    VerifyTolerances t = *this;
    if (t.tol_off < 0.0)
    {
        t.tol_off = 1e-6 * rho2;
    }
    if (t.tol_u < 0.0)
    {
        t.tol_u = 1e-6 * rho2 + 1e-4 * rho1;
    }
    if (t.tol_pointing < 0.0)
    {
        t.tol_pointing = 1e-6 * rho2;
    }
    return t;
}

VerificationReport verify_lossless(const Solution& sol, const ProblemSpec& spec, const VerifyTolerances& tols_in,
                                   const AdjointTrace* trace)
{
    const VerifyTolerances tol = tols_in.resolved(spec.rho1, spec.rho2);
    const int N = sol.N;
    const int M = spec.inputs();
    VerificationReport rep;
    rep.nodes = N;
    rep.classes.resize(N, M);
    rep.edge.setConstant(N, M, false);
    const Eigen::MatrixXd norms = sol.input_norms();

    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> on(N, M);
    for (int k = 0; k < N; ++k)
    {
        for (int i = 0; i < M; ++i)
        {
            const double un = norms(k, i);
            const double g = sol.gamma(k, i);
            on(k, i) = un > tol.tol_off;
            if (!on(k, i))
            {
                rep.classes(k, i) = InputClass::Off;
            }
            else if (g >= 1.0 - tol.tol_bin && g <= 1.0 + tol.tol_bin && un >= g * spec.rho1 - tol.tol_u &&
                     un <= g * spec.rho2 + tol.tol_u)
            {
                rep.classes(k, i) = InputClass::On;
            }
            else
            {
                rep.classes(k, i) = InputClass::Nonconforming;
            }
        }
    }
    for (int i = 0; i < M; ++i)
    {
        for (int k = 0; k < N; ++k)
        {
            const int a = std::max(k - 1, 0);
            const int b = std::min(k + 1, N - 1);
            rep.edge(k, i) = on(a, i) != on(b, i);
        }
    }

    for (int k = 0; k < N; ++k)
    {
        const bool edge_node = rep.edge.row(k).any();
        if (edge_node)
        {
            rep.edge_nodes.push_back(k);
        }
        double gsum = 0.0;
        int active = 0;
        bool conforming = true;
        for (int i = 0; i < M; ++i)
        {
            const double g = sol.gamma(k, i);
            gsum += g;
            active += on(k, i) ? 1 : 0;
            if (rep.classes(k, i) == InputClass::Nonconforming)
            {
                conforming = false;
                if (!edge_node)
                {
                    const double un = norms(k, i);
                    const double dev = std::max({1.0 - g, un - g * spec.rho2, g * spec.rho1 - un, 0.0});
                    rep.violations.push_back({k, i, "semi-continuity", dev});
                }
            }
            if (!edge_node && on(k, i))
            {
                rep.max_binary_distance = std::max(rep.max_binary_distance, std::min(std::abs(g), std::abs(1.0 - g)));
            }
            const auto& u = sol.u[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
            if (!contains(spec.cones[static_cast<std::size_t>(i)], u, tol.tol_pointing))
            {
                rep.pointing_ok = false;
                rep.violations.push_back({k, i, "pointing", 0.0});
            }
        }
        if (gsum > spec.K + tol.tol_bin)
        {
            rep.cardinality_ok = false;
            rep.violations.push_back({k, -1, "cardinality", gsum - spec.K});
        }
        if (active > spec.K)
        {
            rep.overfull_nodes.push_back(k);
        }
        if (!edge_node)
        {
            ++rep.interior_nodes;
            rep.conforming_nodes += conforming ? 1 : 0;
        }
    }
    rep.conformance = rep.interior_nodes > 0 ? double(rep.conforming_nodes) / rep.interior_nodes : 1.0;

    if (trace != nullptr && trace->available && trace->gains.rows() == N)
    {
        int agree = 0;
        int count = 0;
        for (int k = 0; k < N; ++k)
        {
            if (rep.edge.row(k).any())
            {
                continue;
            }
            const auto g = trace->gains.row(k);
            const double scale = std::max(g.maxCoeff(), std::numeric_limits<double>::min());
            double min_active = std::numeric_limits<double>::infinity();
            double max_inactive = -std::numeric_limits<double>::infinity();
            int active = 0;
            for (int i = 0; i < M; ++i)
            {
                if (on(k, i))
                {
                    ++active;
                    min_active = std::min(min_active, g(i));
                }
                else
                {
                    max_inactive = std::max(max_inactive, g(i));
                }
            }
            ++count;
            const bool ordered = active == 0 || active == M || min_active >= max_inactive - tol.tol_gain * scale;
            agree += ordered && active <= spec.K ? 1 : 0;
        }
        rep.gain_nodes = count;
        rep.gain_agreement = count > 0 ? double(agree) / count : 1.0;
    }
    return rep;
}

}  // namespace lcvx
