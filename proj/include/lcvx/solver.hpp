#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcvx/conic.hpp"
#include "lcvx/transcription.hpp"

namespace lcvx
{

struct Solution
{
    double tf{0.0};
    double dt{0.0};
    int N{0};
    std::vector<Eigen::VectorXd> x;               ///< N + 1 states
    std::vector<std::vector<Eigen::VectorXd>> u;  ///< [k][i], piecewise constant on [k dt, (k+1) dt)
    Eigen::MatrixXd sigma;                        ///< N x M
    Eigen::MatrixXd gamma;                        ///< N x M
    /// Terminal cost: tf for minimum time, q'x + c tf for affine, ||W(x - x_ref)||^2 for quadratic.
    double cost{0.0};
    ConicStatus status{ConicStatus::NumericalFailure};
    double primal_residual{0.0};
    double dual_residual{0.0};
    double gap{0.0};
    int iterations{0};
    bool reduced_accuracy{false};

    int inputs() const { return static_cast<int>(sigma.cols()); }
    Eigen::MatrixXd input_norms() const;  ///< N x M
};

/// Outcome of one fixed-tf relaxed solve. `solution` is set only when feasible.
struct FixedTfResult
{
    bool feasible{false};
    Transcription transcription;
    ConicSolution conic;
    std::optional<Solution> solution;
};

struct SolveOptions
{
    SolverOptions conic{};
    TranscriptionOptions transcription{};
};

/// Transcribes and solves the relaxed problem at fixed tf. Throws SolverFailure on
/// numerical breakdown; a certified infeasible problem yields feasible = false.
FixedTfResult solve_fixed_tf(const ProblemSpec& spec, double tf, int N, const SolveOptions& opts = {});

/// Assembles a Solution from an optimal conic solve.
Solution assemble_solution(const ProblemSpec& spec, const Transcription& tr, const ConicSolution& sol);

struct MinTimeOptions
{
    SolveOptions solve{};
    /// Stop when the bracket is at most this wide (s).
    double tol_t{1e-2};
    /// Re-solve the final feasible point with the on-time tie-break objective.
    bool polish{true};
};

struct MinTimeProbe
{
    double tf{0.0};
    bool feasible{false};
    std::string status;
};

struct MinTimeResult
{
    FixedTfResult best;
    double t_infeasible{0.0};  ///< largest probed infeasible time (or t_lo)
    std::vector<MinTimeProbe> probes;
    std::vector<std::string> warnings;
};

/// Bisection on feasibility over [t_lo, t_hi]. Throws InvalidInput when t_hi is infeasible
/// or the cost is not minimum time.
MinTimeResult min_time(const ProblemSpec& spec, int N, double t_lo, double t_hi, const MinTimeOptions& opts = {});

/// Discrete adjoint read from the dynamics-row duals.
struct AdjointTrace
{
    bool available{false};
    std::vector<Eigen::VectorXd> lambda;  ///< N samples
    std::vector<Eigen::VectorXd> primer;  ///< y[k] = Bd' lambda[k], scaled to unit peak norm
    Eigen::MatrixXd gains;                ///< N x M, from the scaled primer
    double normalization{1.0};            ///< peak ||Bd' lambda[k]|| before scaling
    std::string note;
};

AdjointTrace extract_primer(const ProblemSpec& spec, const Transcription& tr, const ConicSolution& sol);

/// max_k ||lambda[k-1] - Ad' lambda[k]|| / max_k ||lambda[k]||.
double adjoint_recursion_residual(const AdjointTrace& trace, const Eigen::MatrixXd& Ad);

struct VerifyTolerances
{
    /// Absolute tolerances; negative values select defaults from rho1 and rho2.
    double tol_off{-1.0};
    double tol_bin{1e-5};
    double tol_u{-1.0};
    double tol_pointing{-1.0};
    /// Relative tolerance used when comparing gains for the ordering check.
    double tol_gain{1e-6};

    VerifyTolerances resolved(double rho1, double rho2) const;
};

enum class InputClass
{
    Off,
    On,
    Nonconforming,
};

struct NodeViolation
{
    int node{0};
    int input{-1};
    std::string kind;
    double value{0.0};
};

struct VerificationReport
{
    Eigen::Matrix<InputClass, Eigen::Dynamic, Eigen::Dynamic> classes;  ///< N x M
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> edge;           ///< N x M edge-artifact flags
    std::vector<NodeViolation> violations;
    std::vector<int> edge_nodes;
    int nodes{0};
    int interior_nodes{0};
    int conforming_nodes{0};
    double conformance{1.0};
    double max_binary_distance{0.0};
    /// Sum of gamma within K at every node.
    bool cardinality_ok{true};
    bool pointing_ok{true};
    /// Nodes where more than K inputs have a nonzero norm (fractional gamma at a switch).
    std::vector<int> overfull_nodes;
    /// Gain ordering over interior nodes; negative when no adjoint was supplied.
    double gain_agreement{-1.0};
    int gain_nodes{0};
};

/// A-posteriori check of the mixed-integer structure of a relaxed solution.
VerificationReport verify_lossless(const Solution& sol, const ProblemSpec& spec, const VerifyTolerances& tols = {},
                                   const AdjointTrace* trace = nullptr);

}  // namespace lcvx
