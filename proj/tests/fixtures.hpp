#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcvx/transcription.hpp"

namespace lcvx::testing
{

inline Eigen::MatrixXd random_matrix(std::mt19937& rng, int rows, int cols)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i)
    {
        for (int j = 0; j < cols; ++j)
        {
            M(i, j) = g(rng);
        }
    }
    return M;
}

inline Eigen::VectorXd random_vector(std::mt19937& rng, int n)
{
    return random_matrix(rng, n, 1);
}

inline Eigen::MatrixXd random_orthogonal(std::mt19937& rng, int n)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

/// Random pair with a prescribed number of unobservable modes, hidden by an orthogonal change of basis.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> random_pair(std::mt19937& rng, int n, int q, int hidden)
{
    const int seen = n - hidden;
    Eigen::MatrixXd F = random_matrix(rng, n, n) / std::sqrt(double(n));
    Eigen::MatrixXd H = random_matrix(rng, q, n);
    if (hidden > 0)
    {
        F.topRightCorner(seen, hidden).setZero();
        H.rightCols(hidden).setZero();
    }
    const Eigen::MatrixXd T = random_orthogonal(rng, n);
    return {T * F * T.transpose(), H * T.transpose()};
}

/// PBH: (F, H) observable iff [F - s I; H] has full column rank at every eigenvalue s of F.
inline bool pbh_observable(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H)
{
    const auto n = F.rows();
    const Eigen::VectorXcd eig = F.eigenvalues();
    const double scale = std::max(F.norm(), H.norm());
    for (Eigen::Index e = 0; e < eig.size(); ++e)
    {
        Eigen::MatrixXcd M(n + H.rows(), n);
        M.topRows(n) = F.cast<std::complex<double>>() - eig(e) * Eigen::MatrixXcd::Identity(n, n);
        M.bottomRows(H.rows()) = H.cast<std::complex<double>>();
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(M).singularValues();
        if (sv(n - 1) <= 1e-8 * scale)
        {
            return false;
        }
    }
    return true;
}

/// Position/velocity double integrator driven by a scalar acceleration.
inline LtiSystem double_integrator()
{
    LtiSystem sys;
    sys.A = Eigen::Matrix2d{{0.0, 1.0}, {0.0, 0.0}};
    sys.B = Eigen::Vector2d(0.0, 1.0);
    sys.w = Eigen::Vector2d::Zero();
    return sys;
}

/// Thrust forward (+1) or backward (-1), one at a time; the final velocity is fixed and
/// the final position is maximized at the given final time.
struct PushCase
{
    double p0{0.0};
    double v0{0.5};
    double vf{0.0};
    double tf{6.0};
    int N{20};
    double rho1{0.3};
    double rho2{1.0};
};

inline ProblemSpec push_spec(const PushCase& pc)
{
    ProblemSpec spec;
    spec.sys = double_integrator();
    spec.cones = {PointingCone::ray(Eigen::VectorXd::Constant(1, 1.0)),
                  PointingCone::ray(Eigen::VectorXd::Constant(1, -1.0))};
    spec.rho1 = pc.rho1;
    spec.rho2 = pc.rho2;
    spec.K = 1;
    spec.x0 = Eigen::Vector2d(pc.p0, pc.v0);
    spec.terminal = TerminalSpec::fixed_state(2, {1}, Eigen::VectorXd::Constant(1, pc.vf));
    spec.terminal.fix_final_time(pc.tf);
    spec.terminal.cost = TerminalSpec::Cost::Affine;
    spec.terminal.q = Eigen::Vector2d(-1.0, 0.0);
    spec.terminal.c = 0.0;
    return spec;
}

/// min sum c_k u_k  s.t.  sum a_k u_k = b,  lo_k <= u_k <= hi_k, through its scalar dual:
/// max over lambda of  lambda b + sum_k min over the box of (c_k - lambda a_k) u_k, attained at a
/// breakpoint c_k / a_k. Returns +inf when infeasible.
inline double interval_lp(const std::vector<double>& c, const std::vector<double>& a, double b,
                          const std::vector<double>& lo, const std::vector<double>& hi)
{
    const std::size_t n = c.size();
    double smin = 0.0;
    double smax = 0.0;
    for (std::size_t k = 0; k < n; ++k)
    {
        smin += std::min(a[k] * lo[k], a[k] * hi[k]);
        smax += std::max(a[k] * lo[k], a[k] * hi[k]);
    }
    const double slack = 1e-12 * (1.0 + std::abs(smin) + std::abs(smax));
    if (b < smin - slack || b > smax + slack)
    {
        return std::numeric_limits<double>::infinity();
    }
    auto dual = [&](double lambda) {
        double g = lambda * b;
        for (std::size_t k = 0; k < n; ++k)
        {
            const double r = c[k] - lambda * a[k];
            g += std::min(r * lo[k], r * hi[k]);
        }
        return g;
    };
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t k = 0; k < n; ++k)
    {
        if (a[k] != 0.0)
        {
            best = std::max(best, dual(c[k] / a[k]));
            any = true;
        }
    }
    return any ? best : dual(0.0);
}

/// Exact mixed-integer optimum of a PushCase over all admissible activation patterns
/// (per node: off, forward in [rho1, rho2], or backward in [-rho2, -rho1]) by depth-first
/// enumeration pruned with the interval relaxation of the unassigned nodes.
struct EnumerationResult
{
    double cost{std::numeric_limits<double>::infinity()};
    std::vector<int> pattern;  ///< per node: 0 off, +1 forward, -1 backward
    long leaves{0};
    long visited{0};
};

inline EnumerationResult enumerate_push(const PushCase& pc, bool prune = true)
{
    const int N = pc.N;
    const double dt = pc.tf / N;
    // Final position = p0 + v0 tf + sum_k dt^2 (N - k - 1/2) u_k; final velocity = v0 + dt sum_k u_k.
    std::vector<double> c(static_cast<std::size_t>(N));
    std::vector<double> a(static_cast<std::size_t>(N), dt);
    for (int k = 0; k < N; ++k)
    {
        c[static_cast<std::size_t>(k)] = -dt * dt * (N - k - 0.5);
    }
    const double b = pc.vf - pc.v0;
    const double offset = -(pc.p0 + pc.v0 * pc.tf);

    std::vector<double> lo(static_cast<std::size_t>(N), -pc.rho2);
    std::vector<double> hi(static_cast<std::size_t>(N), pc.rho2);
    std::vector<int> pattern(static_cast<std::size_t>(N), 0);
    EnumerationResult res;

    auto set_node = [&](int k, int mode) {
        const auto s = static_cast<std::size_t>(k);
        pattern[s] = mode;
        lo[s] = mode == 0 ? 0.0 : mode > 0 ? pc.rho1 : -pc.rho2;
        hi[s] = mode == 0 ? 0.0 : mode > 0 ? pc.rho2 : -pc.rho1;
    };
    auto recurse = [&](auto&& self, int k) -> void {
        ++res.visited;
        const double bound = interval_lp(c, a, b, lo, hi);
        if (!std::isfinite(bound))
        {
            return;
        }
        if (prune && bound + offset >= res.cost - 1e-12 * std::max(1.0, std::abs(res.cost)))
        {
            return;
        }
        if (k == N)
        {
            ++res.leaves;
            if (bound + offset < res.cost)
            {
                res.cost = bound + offset;
                res.pattern = pattern;
            }
            return;
        }
        for (const int mode : {1, -1, 0})
        {
            set_node(k, mode);
            self(self, k + 1);
        }
        const auto s = static_cast<std::size_t>(k);
        lo[s] = -pc.rho2;
        hi[s] = pc.rho2;
        pattern[s] = 0;
    };
    recurse(recurse, 0);
    return res;
}

}  // namespace lcvx::testing
