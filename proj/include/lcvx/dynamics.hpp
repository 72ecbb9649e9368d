#pragma once

#include <Eigen/Dense>

namespace lcvx
{

/// Continuous-time LTI system  xdot = A x + B u + w.
struct LtiSystem
{
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::VectorXd w;

    int states() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(B.cols()); }

    /// Throws InvalidInput on inconsistent dimensions or non-finite entries.
    void validate() const;
};

/// Zero-order-hold discretization  x[k+1] = Ad x[k] + Bd u[k] + wd  over N uniform steps.
struct DiscreteDynamics
{
    Eigen::MatrixXd Ad;
    Eigen::MatrixXd Bd;
    Eigen::VectorXd wd;
    double dt{0.0};
    int steps{0};

    double horizon() const { return dt * steps; }
};

/// Cross-product matrix: skew(a) * b == a x b.
Eigen::Matrix3d skew(const Eigen::Vector3d& a);

/// Relative translational dynamics in a frame rotating at constant rate omega (rad/s).
/// State is (position, velocity) in the rotating frame, input is acceleration.
LtiSystem station_dynamics(const Eigen::Vector3d& omega);

/// Exact ZOH via the exponential of the augmented matrix [[A, B, w], [0, 0, 0]].
DiscreteDynamics zoh_discretize(const LtiSystem& sys, double dt, int steps);

/// Singular values at or below `relative * sigma_max` count as zero. When `relative`
/// is not positive the default max(rows, cols) * machine epsilon is used.
struct RankTolerance
{
    double relative{0.0};
};

/// Kalman observability matrix [H; HF; ...; HF^(n-1)].
Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H);

/// Numerical rank of a matrix under the given tolerance policy.
int numerical_rank(const Eigen::MatrixXd& M, RankTolerance tol = {});

int observability_rank(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H, RankTolerance tol = {});

/// Orthonormal basis (n x d) of the unobservable subspace of the pair (F, H).
Eigen::MatrixXd unobservable_subspace(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                      RankTolerance tol = {});

}  // namespace lcvx
