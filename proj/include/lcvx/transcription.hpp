#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcvx/conditions.hpp"
#include "lcvx/conic.hpp"
#include "lcvx/dynamics.hpp"
#include "lcvx/geometry.hpp"

namespace lcvx
{

/// Instance of the mixed-integer problem: M semi-continuous cone-constrained inputs,
/// at most K active, each active input with norm in [rho1, rho2].
struct ProblemSpec
{
    LtiSystem sys;
    std::vector<PointingCone> cones;
    double rho1{0.0};
    double rho2{0.0};
    int K{1};
    Eigen::VectorXd x0;
    TerminalSpec terminal;

    int inputs() const { return static_cast<int>(cones.size()); }

    /// Throws InvalidInput on malformed data and AssumptionViolation when one of the
    /// structural assumptions (disjoint interiors, full-rank facets, nonzero cost
    /// gradient, distinct norm bounds) fails.
    void validate() const;
};

/// Variable layout: x[0..N] first, then per node k and input i the block (u_i[k], sigma_i[k], gamma_i[k]),
/// then one epigraph variable when the cost is quadratic.
struct IndexMap
{
    int n{0};
    int m{0};
    int M{0};
    int N{0};
    bool epigraph{false};

    int x(int k, int j = 0) const { return k * n + j; }
    int input_block(int k, int i) const { return n * (N + 1) + (k * M + i) * (m + 2); }
    int u(int k, int i, int j = 0) const { return input_block(k, i) + j; }
    int sigma(int k, int i) const { return input_block(k, i) + m; }
    int gamma(int k, int i) const { return input_block(k, i) + m + 1; }
    int cost_variable() const { return n * (N + 1) + N * M * (m + 2); }
    int size() const { return cost_variable() + (epigraph ? 1 : 0); }
};

/// One contiguous block of rows, either in Aeq or in G.
struct RowBlock
{
    enum class Family
    {
        Initial,       ///< x[0] = x0
        Dynamics,      ///< x[k+1] = Ad x[k] + Bd sum u_i[k] + wd
        Terminal,      ///< Hx x[N] = -h0 - ht tf
        RaySpan,       ///< P_i u_i[k] = 0 for ray cones
        Pin,           ///< gamma_i[k] fixed
        SigmaLower,    ///< gamma rho1 - sigma <= 0
        SigmaUpper,    ///< sigma - gamma rho2 <= 0
        GammaLower,    ///< -gamma <= 0
        GammaUpper,    ///< gamma <= 1
        Cardinality,   ///< sum_i gamma_i[k] <= K
        Pointing,      ///< C_i u_i[k] <= 0
        RayLower,      ///< rho1 gamma - n'u <= 0 (optional tightening for ray cones)
        Norm,          ///< ||u_i[k]|| <= sigma_i[k]
        CostEpigraph,  ///< ||W (x[N] - x_ref)|| <= r
    };
    Family family;
    bool equality{false};
    int first{0};
    int count{0};
    int node{-1};
    int input{-1};
};

std::string to_string(RowBlock::Family f);

/// gamma_i[k] pinned to value in {0, 1}.
struct GammaPin
{
    int node{0};
    int input{0};
    double value{0.0};
};

struct TranscriptionOptions
{
    /// Scale states componentwise and inputs by rho2 before emission.
    bool scale{true};
    /// Minimum-time objective at fixed tf: false gives a pure feasibility problem,
    /// true minimizes total on-time sum gamma_i[k] / N as a tie-break.
    bool on_time_objective{false};
    /// Adds rho1 gamma - n'u <= 0 for ray cones (exact for binary gamma; used by branch-and-bound).
    bool ray_lower_bound{false};
    std::vector<GammaPin> pins;
};

struct Transcription
{
    IndexMap index;
    std::vector<RowBlock> rows;
    ConicProgram program;
    DiscreteDynamics dynamics;
    /// Per-state scale: x = state_scale .* x_scaled.
    Eigen::VectorXd state_scale;
    /// Input and sigma scale: u = input_scale * u_scaled.
    double input_scale{1.0};
    double tf{0.0};
    /// Objective offset so that program objective + offset matches the reported cost convention.
    double objective_offset{0.0};

    /// First row of the dynamics block for node k (in Aeq).
    int dynamics_row(int k) const;
    const RowBlock* find(RowBlock::Family f, int node = -1, int input = -1) const;
};

/// Builds the relaxed problem at fixed tf on an N-step zero-order-hold grid.
Transcription transcribe(const ProblemSpec& spec, double tf, int N, const TranscriptionOptions& opts = {});

/// Unscaled trajectory pieces read out of a primal vector.
struct PrimalTrajectory
{
    std::vector<Eigen::VectorXd> x;               ///< N + 1 states
    std::vector<std::vector<Eigen::VectorXd>> u;  ///< [k][i]
    Eigen::MatrixXd sigma;                        ///< N x M
    Eigen::MatrixXd gamma;                        ///< N x M
};

PrimalTrajectory extract_primal(const Transcription& tr, const Eigen::VectorXd& z);

/// Largest violation of the discrete relaxed constraints by an unscaled trajectory.
struct ConstraintResiduals
{
    double initial{0.0};
    double dynamics{0.0};
    double terminal{0.0};
    double sigma_bounds{0.0};
    double norm{0.0};
    double gamma_bounds{0.0};
    double cardinality{0.0};
    double pointing{0.0};

    double max() const;
};

ConstraintResiduals relaxed_residuals(const ProblemSpec& spec, const DiscreteDynamics& dyn, double tf,
                                      const PrimalTrajectory& traj);

}  // namespace lcvx
