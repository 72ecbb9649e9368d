#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace lcvx
{

/// Input pointing set  {u : C u <= 0}.
///
/// Rows of C are outward facet normals. A ray cone (the conical hull of a single
/// direction n) has no full-row-rank facet description when m > 1, so it is
/// stored by its unit direction and C holds the non-minimal description
/// [P; -P; -n'] with P an orthonormal basis of the complement of n.
class PointingCone
{
public:
    /// Polytopic cone from facet normals. Throws InvalidInput when C is not full row rank.
    static PointingCone from_facets(Eigen::MatrixXd C);

    /// Ray cone conehull{direction}; the direction is normalized.
    static PointingCone ray(const Eigen::VectorXd& direction);
    /// The whole input space R^m (no facets).
    static PointingCone unrestricted(int m);

    const Eigen::MatrixXd& facets() const { return C_; }
    const std::optional<Eigen::VectorXd>& ray_direction() const { return ray_; }
    bool is_ray() const { return ray_.has_value(); }
    bool is_unrestricted() const { return !ray_ && C_.rows() == 0; }
    int dimension() const { return static_cast<int>(C_.cols()); }

    /// Orthonormal basis (rows) of the complement of the ray direction; empty for facet cones.
    Eigen::MatrixXd ray_complement() const;

private:
    Eigen::MatrixXd C_;
    std::optional<Eigen::VectorXd> ray_;
};

/// True iff every facet inequality holds to within tol. For ray cones membership
/// means u = a n with a >= 0, tested as ||u - (n'u) n|| <= tol and n'u >= -tol.
bool contains(const PointingCone& cone, const Eigen::VectorXd& u, double tol = 0.0);

/// Norm of the Euclidean projection of y onto the cone (the input gain measure).
double project_gain(const PointingCone& cone, const Eigen::VectorXd& y);

/// Euclidean projection of y onto the cone.
Eigen::VectorXd project(const PointingCone& cone, const Eigen::VectorXd& y);

/// True iff no two cones share interior points. Ray cones have empty interior for m > 1.
bool interiors_disjoint(const std::vector<PointingCone>& cones, double margin = 1e-9);

}  // namespace lcvx
