#include "lcvx/dynamics.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "lcvx/error.hpp"

namespace lcvx
{

void LtiSystem::validate() const
{
    const auto n = A.rows();
    if (n == 0 || A.cols() != n)
    {
        throw InvalidInput("LtiSystem: A must be square and non-empty, got " + std::to_string(A.rows()) +
                           "x" + std::to_string(A.cols()));
    }
    if (B.rows() != n)
    {
        throw InvalidInput("LtiSystem: B must have " + std::to_string(n) + " rows, got " +
                           std::to_string(B.rows()));
    }
    if (w.size() != n)
    {
        throw InvalidInput("LtiSystem: w must have " + std::to_string(n) + " entries, got " +
                           std::to_string(w.size()));
    }
    if (!A.allFinite() || !B.allFinite() || !w.allFinite())
    {
        throw InvalidInput("LtiSystem: non-finite entries");
    }
}

Eigen::Matrix3d skew(const Eigen::Vector3d& a)
{
    Eigen::Matrix3d S;
    S << 0.0, -a.z(), a.y(),
         a.z(), 0.0, -a.x(),
         -a.y(), a.x(), 0.0;
    return S;
}

LtiSystem station_dynamics(const Eigen::Vector3d& omega)
{
    const Eigen::Matrix3d S = skew(omega);
    LtiSystem sys;
    sys.A = Eigen::MatrixXd::Zero(6, 6);
    sys.A.topRightCorner<3, 3>().setIdentity();
    sys.A.bottomLeftCorner<3, 3>() = -S * S;
    sys.A.bottomRightCorner<3, 3>() = -2.0 * S;
    sys.B = Eigen::MatrixXd::Zero(6, 3);
    sys.B.bottomRows<3>().setIdentity();
    sys.w = Eigen::VectorXd::Zero(6);
    return sys;
}

DiscreteDynamics zoh_discretize(const LtiSystem& sys, double dt, int steps)
{
    sys.validate();
    if (!(dt > 0.0) || !std::isfinite(dt))
    {
        throw InvalidInput("zoh_discretize: dt must be positive and finite");
    }
    if (steps < 1)
    {
        throw InvalidInput("zoh_discretize: need at least one step");
    }
    const int n = sys.states();
    const int m = sys.inputs();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m + 1, n + m + 1);
    aug.topLeftCorner(n, n) = sys.A * dt;
    aug.block(0, n, n, m) = sys.B * dt;
    aug.block(0, n + m, n, 1) = sys.w * dt;
    const Eigen::MatrixXd E = aug.exp();

    DiscreteDynamics d;
    d.Ad = E.topLeftCorner(n, n);
    d.Bd = E.block(0, n, n, m);
    d.wd = E.block(0, n + m, n, 1);
    d.dt = dt;
    d.steps = steps;
    return d;
}

Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H)
{
    if (F.rows() != F.cols() || H.cols() != F.rows())
    {
        throw InvalidInput("observability_matrix: F must be n x n and H must have n columns");
    }
    const auto n = F.rows();
    const auto q = H.rows();
    Eigen::MatrixXd O(q * n, n);
    Eigen::MatrixXd block = H;
    for (Eigen::Index k = 0; k < n; ++k)
    {
        O.middleRows(k * q, q) = block;
        block = block * F;
    }
    return O;
}

namespace
{

double rank_threshold(const Eigen::VectorXd& sv, Eigen::Index rows, Eigen::Index cols, RankTolerance tol)
{
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double rel = tol.relative > 0.0
                           ? tol.relative
                           : static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
    return rel * smax;
}

}  // namespace

int numerical_rank(const Eigen::MatrixXd& M, RankTolerance tol)
{
    if (M.size() == 0)
    {
        return 0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0)
    {
        return 0;
    }
    const double thresh = rank_threshold(sv, M.rows(), M.cols(), tol);
    return static_cast<int>((sv.array() > thresh).count());
}

int observability_rank(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H, RankTolerance tol)
{
    return numerical_rank(observability_matrix(F, H), tol);
}

Eigen::MatrixXd unobservable_subspace(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H, RankTolerance tol)
{
    const Eigen::MatrixXd O = observability_matrix(F, H);
    const auto n = F.rows();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    int rank = 0;
    if (sv.size() > 0 && sv(0) > 0.0)
    {
        const double thresh = rank_threshold(sv, O.rows(), O.cols(), tol);
        rank = static_cast<int>((sv.array() > thresh).count());
    }
    return svd.matrixV().rightCols(n - rank);
}

}  // namespace lcvx
