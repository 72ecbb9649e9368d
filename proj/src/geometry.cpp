#include "lcvx/geometry.hpp"

#include <cmath>
#include <limits>

#include "lcvx/conic.hpp"
#include "lcvx/dynamics.hpp"
#include "lcvx/error.hpp"

namespace lcvx
{

PointingCone PointingCone::from_facets(Eigen::MatrixXd C)
{
    if (C.rows() == 0 || C.cols() == 0)
    {
        throw InvalidInput("PointingCone: facet matrix must be non-empty");
    }
    if (!C.allFinite())
    {
        throw InvalidInput("PointingCone: non-finite facet matrix");
    }
    if (numerical_rank(C) != C.rows())
    {
        throw InvalidInput("PointingCone: facet matrix must have full row rank");
    }
    PointingCone cone;
    cone.C_ = std::move(C);
    return cone;
}

PointingCone PointingCone::ray(const Eigen::VectorXd& direction)
{
    const double nrm = direction.norm();
    if (!direction.allFinite() || !(nrm > 0.0))
    {
        throw InvalidInput("PointingCone: ray direction must be finite and nonzero");
    }
    PointingCone cone;
    const Eigen::VectorXd n = direction / nrm;
    cone.ray_ = n;
    const Eigen::MatrixXd P = cone.ray_complement();
    cone.C_.resize(2 * P.rows() + 1, n.size());
    cone.C_ << P, -P, -n.transpose();
    return cone;
}

PointingCone PointingCone::unrestricted(int m)
{
    if (m < 1)
    {
        throw InvalidInput("PointingCone: dimension must be positive");
    }
    PointingCone cone;
    cone.C_.resize(0, m);
    return cone;
}

Eigen::MatrixXd PointingCone::ray_complement() const
{
    if (!ray_)
    {
        return Eigen::MatrixXd(0, dimension());
    }
    const Eigen::VectorXd& n = *ray_;
    const auto m = n.size();
    // Householder reflector mapping n to e1; remaining columns span the complement.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(n);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
    return Q.rightCols(m - 1).transpose();
}

bool contains(const PointingCone& cone, const Eigen::VectorXd& u, double tol)
{
    if (u.size() != cone.dimension())
    {
        throw InvalidInput("contains: vector has dimension " + std::to_string(u.size()) + ", cone has " +
                           std::to_string(cone.dimension()));
    }
    if (tol < 0.0)
    {
        throw InvalidInput("contains: tolerance must be non-negative");
    }
    if (const auto& n = cone.ray_direction())
    {
        const double along = n->dot(u);
        return along >= -tol && (u - along * *n).norm() <= tol;
    }
    return ((cone.facets() * u).array() <= tol).all();
}

namespace
{

Eigen::VectorXd project_by_conic(const Eigen::MatrixXd& C, const Eigen::VectorXd& y)
{
    // minimize t  s.t.  ||y - z|| <= t,  C z <= 0;  variables (z, t).
    const auto m = y.size();
    const auto p = C.rows();
    ConicProgram prog;
    prog.c = Eigen::VectorXd::Zero(m + 1);
    prog.c(m) = 1.0;
    prog.Aeq.resize(0, m + 1);
    prog.beq.resize(0);
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index i = 0; i < p; ++i)
    {
        for (Eigen::Index j = 0; j < m; ++j)
        {
            if (C(i, j) != 0.0)
            {
                t.emplace_back(static_cast<int>(i), static_cast<int>(j), C(i, j));
            }
        }
    }
    t.emplace_back(static_cast<int>(p), static_cast<int>(m), -1.0);
    for (Eigen::Index j = 0; j < m; ++j)
    {
        t.emplace_back(static_cast<int>(p + 1 + j), static_cast<int>(j), 1.0);
    }
    prog.G.resize(p + 1 + m, m + 1);
    prog.G.setFromTriplets(t.begin(), t.end());
    prog.h = Eigen::VectorXd::Zero(p + 1 + m);
    prog.h.tail(m) = y;
    prog.cones = {{Cone::Kind::Nonnegative, static_cast<int>(p)}, {Cone::Kind::SecondOrder, static_cast<int>(m + 1)}};
    const ConicSolution sol = solve(prog);
    if (!sol.optimal())
    {
        throw SolverFailure("project: conic fallback failed: " + sol.diagnostics);
    }
    return sol.z.head(m);
}

}  // namespace

Eigen::VectorXd project(const PointingCone& cone, const Eigen::VectorXd& y)
{
    if (y.size() != cone.dimension())
    {
        throw InvalidInput("project: dimension mismatch");
    }
    if (const auto& n = cone.ray_direction())
    {
        return std::max(n->dot(y), 0.0) * *n;
    }
    const Eigen::MatrixXd& C = cone.facets();
    const auto p = C.rows();
    if (p == 0)
    {
        return y;
    }
    if (p > 12)
    {
        return project_by_conic(C, y);
    }
    // Active-set enumeration: the projection is the unique z = y - C_S' mu with
    // mu >= 0, C_S z = 0 and C z <= 0 for some linearly independent active set S.
    const double scale = std::max(1.0, y.norm());
    const double feas_tol = 1e-12 * scale * std::max(1.0, C.cwiseAbs().maxCoeff());
    Eigen::VectorXd best = Eigen::VectorXd::Zero(y.size());
    double best_violation = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << p); ++mask)
    {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < p; ++i)
        {
            if (mask & (1u << i))
            {
                rows.push_back(i);
            }
        }
        Eigen::VectorXd z = y;
        Eigen::VectorXd mu;
        if (!rows.empty())
        {
            Eigen::MatrixXd CS(static_cast<Eigen::Index>(rows.size()), C.cols());
            for (std::size_t r = 0; r < rows.size(); ++r)
            {
                CS.row(static_cast<Eigen::Index>(r)) = C.row(rows[r]);
            }
            if (numerical_rank(CS) != CS.rows())
            {
                continue;
            }
            mu = (CS * CS.transpose()).ldlt().solve(CS * y);
            z = y - CS.transpose() * mu;
        }
        const double mu_violation = rows.empty() ? 0.0 : std::max(0.0, -mu.minCoeff());
        const double cone_violation = std::max(0.0, (C * z).maxCoeff());
        const double violation = std::max(mu_violation, cone_violation);
        if (violation <= feas_tol)
        {
            return z;
        }
        if (violation < best_violation)
        {
            best_violation = violation;
            best = z;
        }
    }
    // Degenerate round-off case: fall back to the conic route for an exact answer.
    (void)best;
    return project_by_conic(C, y);
}

double project_gain(const PointingCone& cone, const Eigen::VectorXd& y)
{
    if (!y.allFinite())
    {
        throw InvalidInput("project_gain: non-finite vector");
    }
    if (const auto& n = cone.ray_direction())
    {
        if (y.size() != n->size())
        {
            throw InvalidInput("project_gain: dimension mismatch");
        }
        return std::max(n->dot(y), 0.0);
    }
    return project(cone, y).norm();
}

namespace
{

/// Largest t with C_a u <= -t, C_b u <= -t, ||u||_inf <= 1 (rows normalized).
double interior_overlap_depth(const Eigen::MatrixXd& Ca, const Eigen::MatrixXd& Cb)
{
    const auto m = Ca.cols();
    Eigen::MatrixXd C(Ca.rows() + Cb.rows(), m);
    C << Ca, Cb;
    for (Eigen::Index i = 0; i < C.rows(); ++i)
    {
        const double nrm = C.row(i).norm();
        if (nrm > 0.0)
        {
            C.row(i) /= nrm;
        }
    }
    const auto p = C.rows();
    // variables (u, t); minimize -t
    ConicProgram prog;
    prog.c = Eigen::VectorXd::Zero(m + 1);
    prog.c(m) = -1.0;
    prog.Aeq.resize(0, m + 1);
    prog.beq.resize(0);
    std::vector<Eigen::Triplet<double>> t;
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < p; ++i, ++row)
    {
        for (Eigen::Index j = 0; j < m; ++j)
        {
            if (C(i, j) != 0.0)
            {
                t.emplace_back(static_cast<int>(row), static_cast<int>(j), C(i, j));
            }
        }
        t.emplace_back(static_cast<int>(row), static_cast<int>(m), 1.0);
    }
    for (Eigen::Index j = 0; j < m; ++j)
    {
        t.emplace_back(static_cast<int>(row++), static_cast<int>(j), 1.0);
        t.emplace_back(static_cast<int>(row++), static_cast<int>(j), -1.0);
    }
    t.emplace_back(static_cast<int>(row++), static_cast<int>(m), 1.0);
    t.emplace_back(static_cast<int>(row++), static_cast<int>(m), -1.0);
    prog.G.resize(row, m + 1);
    prog.G.setFromTriplets(t.begin(), t.end());
    prog.h = Eigen::VectorXd::Ones(row);
    prog.h.head(p).setZero();
    prog.cones = {{Cone::Kind::Nonnegative, static_cast<int>(row)}};
    const ConicSolution sol = solve(prog);
    if (!sol.optimal())
    {
        throw SolverFailure("interiors_disjoint: overlap LP failed: " + sol.diagnostics);
    }
    return sol.z(m);
}

}  // namespace

bool interiors_disjoint(const std::vector<PointingCone>& cones, double margin)
{
    if (cones.empty())
    {
        return true;
    }
    const int m = cones.front().dimension();
    for (const auto& k : cones)
    {
        if (k.dimension() != m)
        {
            throw InvalidInput("interiors_disjoint: cones of different dimension");
        }
    }
    auto has_interior = [m](const PointingCone& k) { return !k.is_ray() || m == 1; };
    auto interior_facets = [m](const PointingCone& k) -> Eigen::MatrixXd {
        if (k.is_ray() && m == 1)
        {
            return -k.ray_direction()->transpose();
        }
        return k.facets();
    };
    for (std::size_t i = 0; i < cones.size(); ++i)
    {
        if (!has_interior(cones[i]))
        {
            continue;
        }
        for (std::size_t j = i + 1; j < cones.size(); ++j)
        {
            if (!has_interior(cones[j]))
            {
                continue;
            }
            if (interior_overlap_depth(interior_facets(cones[i]), interior_facets(cones[j])) > margin)
            {
                return false;
            }
        }
    }
    return true;
}

}  // namespace lcvx
