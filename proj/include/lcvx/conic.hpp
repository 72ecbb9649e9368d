#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace lcvx
{

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Cone blocks of the inequality rows  G z + s = h,  s in K.
struct Cone
{
    enum class Kind
    {
        Zero,         ///< s = 0
        Nonnegative,  ///< s >= 0 elementwise
        SecondOrder,  ///< s0 >= ||s[1:]||_2
    };
    Kind kind{Kind::Nonnegative};
    int size{0};
};

/// Standard-form conic program
///
///     minimize    c' z
///     subject to  Aeq z = beq
///                 G z + s = h,   s in K = K_1 x ... x K_p
///
/// Duals follow the Lagrangian  c'z + nu'(Aeq z - beq) + mu'(G z - h)  with mu in K*.
struct ConicProgram
{
    Eigen::VectorXd c;
    SparseMatrix Aeq;
    Eigen::VectorXd beq;
    SparseMatrix G;
    Eigen::VectorXd h;
    std::vector<Cone> cones;
    /// Optional, one per variable; used in dumps and diagnostics only.
    std::vector<std::string> variable_names;

    int variables() const { return static_cast<int>(c.size()); }
    int equalities() const { return static_cast<int>(Aeq.rows()); }
    int cone_rows() const { return static_cast<int>(G.rows()); }

    /// Throws InvalidInput when dimensions disagree or data is non-finite.
    void validate() const;
};

struct SolverOptions
{
    double tol_feas{1e-8};
    double tol_gap{1e-8};
    /// Looser tolerances accepted when the iteration stalls or breaks down late.
    double tol_reduced{1e-5};
    int max_iters{200};
    /// Ruiz equilibration passes applied before the interior-point loop.
    int equilibration_passes{10};
    bool verbose{false};
};

enum class ConicStatus
{
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
};

std::string to_string(ConicStatus status);

struct ConicSolution
{
    ConicStatus status{ConicStatus::NumericalFailure};
    Eigen::VectorXd z;    ///< primal variables
    Eigen::VectorXd s;    ///< cone slacks  h - G z
    Eigen::VectorXd nu;   ///< equality duals
    Eigen::VectorXd mu;   ///< cone duals, stacked in cone order
    double objective{0.0};
    double dual_objective{0.0};
    double primal_residual{0.0};
    double dual_residual{0.0};
    double gap{0.0};
    int iterations{0};
    /// Optimal only to SolverOptions::tol_reduced after a late breakdown.
    bool reduced_accuracy{false};
    /// Human-readable reason when status is not Optimal.
    std::string diagnostics;

    bool optimal() const { return status == ConicStatus::Optimal; }
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra predictor-corrector steps. For infeasible problems the returned duals
/// (PrimalInfeasible) or primal (DualInfeasible) are the normalized certificate:
/// beq'nu + h'mu = -1 with Aeq'nu + G'mu ~ 0, respectively c'z = -1 with Aeq z ~ 0, G z + s ~ 0.
ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts = {});

/// Sparse triplet dump, 0-based:
///
///     conic-program v1
///     variables <n> equalities <p> cone_rows <q>
///     cones <count> <kind>:<size> ...        (kind in zero|nonneg|soc)
///     c <nnz>        followed by  <index> <value>  lines
///     Aeq <nnz>      followed by  <row> <col> <value>
///     beq <nnz>      followed by  <index> <value>
///     G <nnz>        followed by  <row> <col> <value>
///     h <nnz>        followed by  <index> <value>
///
/// Values use 17 significant digits.
void write_triplets(const ConicProgram& prog, std::ostream& out);

}  // namespace lcvx
