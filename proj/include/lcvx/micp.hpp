#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lcvx/solver.hpp"

namespace lcvx
{

struct BnbNode
{
    std::vector<GammaPin> pins;
    double bound{0.0};
    int depth{0};
    long id{0};
};

struct BnbOptions
{
    /// Stop once (incumbent - bound) <= gap_tol * max(1, |incumbent|).
    double gap_tol{1e-4};
    /// Maximum number of node relaxations.
    int node_limit{20000};
    /// gamma within this distance of {0, 1} counts as binary.
    double tol_bin{1e-6};
    SolverOptions conic{};
    /// Worker threads for child evaluation; 0 reads LCVX_THREADS (default 1).
    int threads{0};
};

enum class BnbStatus
{
    Optimal,
    NodeLimit,
    Infeasible,
};

std::string to_string(BnbStatus s);

struct BnbStats
{
    int nodes_explored{0};
    int nodes_pruned{0};
    int incumbent_solves{0};
    int max_depth{0};
    double best_bound{0.0};
    double incumbent{0.0};
    double gap{0.0};
    double wall_time{0.0};
    bool certified{false};
    /// (parent bound, child bound) for every evaluated child.
    std::vector<std::pair<double, double>> bound_pairs;
};

struct BnbResult
{
    BnbStatus status{BnbStatus::Infeasible};
    std::optional<Solution> solution;
    BnbStats stats;
};

/// Best-first branch-and-bound over binary gamma at fixed tf. Node relaxations are the
/// relaxed transcription with pinned gamma entries and, for ray cones, the exact lower
/// norm bound rho1 gamma <= n'u, so binary leaves are feasible for the mixed-integer problem.
BnbResult solve_micp_bnb(const ProblemSpec& spec, double tf, int N, const BnbOptions& opts = {});

/// Threads requested through LCVX_THREADS, at least 1.
int env_threads();

}  // namespace lcvx
