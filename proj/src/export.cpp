#include "lcvx/export.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace lcvx
{

using nlohmann::json;

std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace
{

json vec_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index j = 0; j < v.size(); ++j)
    {
        a.push_back(v(j));
    }
    return a;
}

/// NaN and infinities are not valid JSON numbers.
json real_json(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Solution& sol, const AdjointTrace* trace)
{
    const int n = static_cast<int>(sol.x.front().size());
    const int M = sol.inputs();
    const int m = sol.N > 0 && M > 0 ? static_cast<int>(sol.u[0][0].size()) : 0;
    const bool gains = trace != nullptr && trace->available;
    out << "t";
    for (int j = 0; j < n; ++j)
    {
        out << ",x" << j;
    }
    for (int i = 0; i < M; ++i)
    {
        for (int j = 0; j < m; ++j)
        {
            out << ",u" << i << "_" << j;
        }
        out << ",unorm" << i << ",sigma" << i << ",gamma" << i << ",gain" << i;
    }
    out << "\n";
    for (int k = 0; k <= sol.N; ++k)
    {
        out << format_real(k * sol.dt);
        const auto& x = sol.x[static_cast<std::size_t>(k)];
        for (int j = 0; j < n; ++j)
        {
            out << "," << format_real(x(j));
        }
        for (int i = 0; i < M; ++i)
        {
            if (k == sol.N)
            {
                out << std::string(static_cast<std::size_t>(m + 4), ',');
                continue;
            }
            const auto& u = sol.u[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
            for (int j = 0; j < m; ++j)
            {
                out << "," << format_real(u(j));
            }
            out << "," << format_real(u.norm()) << "," << format_real(sol.sigma(k, i)) << ","
                << format_real(sol.gamma(k, i)) << ",";
            if (gains)
            {
                out << format_real(trace->gains(k, i));
            }
        }
        out << "\n";
    }
}

void write_states_csv(std::ostream& out, const Solution& sol)
{
    const auto n = sol.x.front().size();
    out << "t";
    for (Eigen::Index j = 0; j < n; ++j)
    {
        out << ",x" << j;
    }
    out << "\n";
    for (int k = 0; k <= sol.N; ++k)
    {
        out << format_real(k * sol.dt);
        for (Eigen::Index j = 0; j < n; ++j)
        {
            out << "," << format_real(sol.x[static_cast<std::size_t>(k)](j));
        }
        out << "\n";
    }
}

void write_input_norms_csv(std::ostream& out, const Solution& sol)
{
    const Eigen::MatrixXd norms = sol.input_norms();
    out << "t";
    for (int i = 0; i < sol.inputs(); ++i)
    {
        out << ",unorm" << i;
    }
    out << "\n";
    for (int k = 0; k < sol.N; ++k)
    {
        out << format_real(k * sol.dt);
        for (int i = 0; i < sol.inputs(); ++i)
        {
            out << "," << format_real(norms(k, i));
        }
        out << "\n";
    }
}

void write_gains_csv(std::ostream& out, const Solution& sol, const AdjointTrace& trace)
{
    out << "t";
    for (int i = 0; i < sol.inputs(); ++i)
    {
        out << ",gain" << i;
    }
    out << "\n";
    if (!trace.available)
    {
        return;
    }
    for (int k = 0; k < sol.N; ++k)
    {
        out << format_real(k * sol.dt);
        for (int i = 0; i < sol.inputs(); ++i)
        {
            out << "," << format_real(trace.gains(k, i));
        }
        out << "\n";
    }
}

json to_json(const ConditionReport& rep)
{
    json results = json::array();
    for (const auto& r : rep.results)
    {
        json e = {{"condition", r.condition},
                  {"verdict", to_string(r.verdict)},
                  {"detail", r.detail},
                  {"rank", r.rank}};
        if (r.condition == 4)
        {
            e["residual"] = real_json(r.residual);
        }
        json ev = json::array();
        for (const auto& x : r.evidence)
        {
            json j = {{"inputs", x.inputs}, {"rank", x.rank}, {"resolved_by", x.resolved_by}};
            if (x.witness.size() > 0)
            {
                j["witness"] = vec_json(x.witness);
                j["count_above"] = x.count_above;
                j["count_below"] = x.count_below;
            }
            if (!x.note.empty())
            {
                j["note"] = x.note;
            }
            ev.push_back(j);
        }
        e["evidence"] = ev;
        results.push_back(e);
    }
    return {{"overall", to_string(rep.overall())}, {"conditions", results}};
}

json to_json(const VerificationReport& rep)
{
    json viol = json::array();
    for (const auto& v : rep.violations)
    {
        viol.push_back({{"node", v.node}, {"input", v.input}, {"kind", v.kind}, {"value", real_json(v.value)}});
    }
    json j = {{"nodes", rep.nodes},
              {"interior_nodes", rep.interior_nodes},
              {"conforming_nodes", rep.conforming_nodes},
              {"conformance", rep.conformance},
              {"edge_nodes", rep.edge_nodes},
              {"overfull_nodes", rep.overfull_nodes},
              {"max_binary_distance", rep.max_binary_distance},
              {"cardinality_ok", rep.cardinality_ok},
              {"pointing_ok", rep.pointing_ok},
              {"violations", viol}};
    if (rep.gain_agreement >= 0.0)
    {
        j["gain_agreement"] = rep.gain_agreement;
        j["gain_nodes"] = rep.gain_nodes;
    }
    return j;
}

json to_json(const BnbStats& s)
{
    return {{"nodes_explored", s.nodes_explored},
            {"nodes_pruned", s.nodes_pruned},
            {"incumbent_solves", s.incumbent_solves},
            {"max_depth", s.max_depth},
            {"best_bound", real_json(s.best_bound)},
            {"incumbent", real_json(s.incumbent)},
            {"gap", real_json(s.gap)},
            {"wall_time", s.wall_time},
            {"certified", s.certified}};
}

json solution_summary(const Solution& sol)
{
    return {{"tf", sol.tf},
            {"dt", sol.dt},
            {"N", sol.N},
            {"cost", sol.cost},
            {"status", to_string(sol.status)},
            {"primal_residual", sol.primal_residual},
            {"dual_residual", sol.dual_residual},
            {"gap", sol.gap},
            {"iterations", sol.iterations},
            {"reduced_accuracy", sol.reduced_accuracy},
            {"final_state", vec_json(sol.x.back())}};
}

}  // namespace lcvx
