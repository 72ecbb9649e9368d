#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lcvx/micp.hpp"

using namespace lcvx;
using lcvx::testing::PushCase;

namespace
{

bool binary(const Solution& s, double tol)
{
    return (s.gamma.array().min(1.0 - s.gamma.array()) <= tol).all();
}

/// Planar double integrator with three thrusters 120 degrees apart; the final velocity
/// is fixed and the displacement along (1, 0.4) is maximized.
ProblemSpec planar_three_rays(double tf)
{
    ProblemSpec spec;
    spec.sys.A = Eigen::MatrixXd::Zero(4, 4);
    spec.sys.A.topRightCorner(2, 2).setIdentity();
    spec.sys.B = Eigen::MatrixXd::Zero(4, 2);
    spec.sys.B.bottomRows(2).setIdentity();
    spec.sys.w = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < 3; ++i)
    {
        const double a = 2.0 * 3.14159265358979323846 * i / 3.0 + 0.3;
        spec.cones.push_back(PointingCone::ray(Eigen::Vector2d(std::cos(a), std::sin(a))));
    }
    spec.rho1 = 0.3;
    spec.rho2 = 1.0;
    spec.K = 1;
    spec.x0 = Eigen::Vector4d(0.0, 0.0, 0.2, -0.1);
    spec.terminal = TerminalSpec::fixed_state(4, {2, 3}, Eigen::Vector2d::Zero());
    spec.terminal.fix_final_time(tf);
    spec.terminal.cost = TerminalSpec::Cost::Affine;
    spec.terminal.q = Eigen::Vector4d(-1.0, -0.4, 0.0, 0.0);
    spec.terminal.c = 0.0;
    return spec;
}

}  // namespace

TEST(Enumeration, PruningKeepsTheOptimum)
{
    PushCase pc;
    pc.N = 8;
    const auto full = lcvx::testing::enumerate_push(pc, false);
    const auto pruned = lcvx::testing::enumerate_push(pc, true);
    EXPECT_NEAR(full.cost, pruned.cost, 1e-12);
    EXPECT_LT(pruned.visited, full.visited);

    // Flat loop over all 3^N patterns.
    const double dt = pc.tf / pc.N;
    std::vector<double> c(8), a(8, dt), lo(8), hi(8);
    for (int k = 0; k < 8; ++k)
    {
        c[static_cast<std::size_t>(k)] = -dt * dt * (8 - k - 0.5);
    }
    double best = std::numeric_limits<double>::infinity();
    long feasible = 0;
    for (int code = 0; code < 6561; ++code)
    {
        int rest = code;
        for (std::size_t k = 0; k < 8; ++k, rest /= 3)
        {
            const int mode = rest % 3;
            lo[k] = mode == 0 ? 0.0 : mode == 1 ? pc.rho1 : -pc.rho2;
            hi[k] = mode == 0 ? 0.0 : mode == 1 ? pc.rho2 : -pc.rho1;
        }
        const double v = lcvx::testing::interval_lp(c, a, pc.vf - pc.v0, lo, hi);
        feasible += std::isfinite(v) ? 1 : 0;
        best = std::min(best, v - pc.p0 - pc.v0 * pc.tf);
    }
    EXPECT_EQ(full.leaves, feasible);
    EXPECT_NEAR(full.cost, best, 1e-12);
}

TEST(Enumeration, IntervalLpExamples)
{
    // min u1 + 2 u2  s.t. u1 + u2 = 1, 0 <= u <= 1  ->  u = (1, 0).
    EXPECT_NEAR(lcvx::testing::interval_lp({1, 2}, {1, 1}, 1.0, {0, 0}, {1, 1}), 1.0, 1e-15);
    // min -u1  s.t. u1 - u2 = 0, 0 <= u <= 2  ->  -2.
    EXPECT_NEAR(lcvx::testing::interval_lp({-1, 0}, {1, -1}, 0.0, {0, 0}, {2, 2}), -2.0, 1e-15);
    EXPECT_TRUE(std::isinf(lcvx::testing::interval_lp({1}, {1}, 3.0, {0}, {1})));
}

TEST(BranchAndBound, MatchesExhaustiveEnumeration)
{
    for (const PushCase& pc : {PushCase{0.0, 0.5, 0.0, 6.0, 8, 0.3, 1.0}, PushCase{0.0, 1.0, -0.5, 7.0, 10, 0.2, 0.8},
                               PushCase{0.2, -0.4, 0.3, 5.0, 9, 0.4, 1.0}})
    {
        const auto e = lcvx::testing::enumerate_push(pc, false);
        const BnbResult r = solve_micp_bnb(lcvx::testing::push_spec(pc), pc.tf, pc.N);
        ASSERT_EQ(r.status, BnbStatus::Optimal);
        ASSERT_TRUE(r.solution.has_value());
        EXPECT_NEAR(r.solution->cost, e.cost, 1e-4 * std::max(1.0, std::abs(e.cost))) << "tf " << pc.tf;
        EXPECT_TRUE(r.stats.certified);
        EXPECT_LE(r.stats.gap, 1e-4);
        EXPECT_LE(r.stats.best_bound, r.stats.incumbent + 1e-9);
    }
}

TEST(BranchAndBound, CertifiedSolutionsAreMixedIntegerFeasible)
{
    const ProblemSpec spec = lcvx::testing::push_spec({});
    const BnbResult r = solve_micp_bnb(spec, 6.0, 20);
    ASSERT_EQ(r.status, BnbStatus::Optimal);
    const Solution& s = *r.solution;
    EXPECT_TRUE(binary(s, 1e-6));
    const VerificationReport rep = verify_lossless(s, spec);
    EXPECT_DOUBLE_EQ(rep.conformance, 1.0);
    EXPECT_TRUE(rep.cardinality_ok);
    EXPECT_TRUE(rep.pointing_ok);
    EXPECT_TRUE(rep.overfull_nodes.empty());
    for (int k = 0; k < s.N; ++k)
    {
        for (int i = 0; i < 2; ++i)
        {
            const double un = s.u[k][i].norm();
            EXPECT_TRUE(un <= 1e-6 || (un >= spec.rho1 - 1e-6 && un <= spec.rho2 + 1e-6)) << k << " " << un;
        }
    }
}

TEST(BranchAndBound, LosslessRelaxationClosesAtTheRoot)
{
    const ProblemSpec spec = lcvx::testing::push_spec({});
    const FixedTfResult rel = solve_fixed_tf(spec, 6.0, 20);
    const BnbResult r = solve_micp_bnb(spec, 6.0, 20);
    ASSERT_EQ(r.status, BnbStatus::Optimal);
    EXPECT_EQ(r.stats.nodes_explored, 1);
    EXPECT_NEAR(r.solution->cost, rel.solution->cost, 1e-4 * std::abs(rel.solution->cost));
}

TEST(BranchAndBound, ChildBoundsNeverDecrease)
{
    BnbOptions opts;
    opts.node_limit = 200;
    const BnbResult r = solve_micp_bnb(planar_three_rays(8.0), 8.0, 12, opts);
    ASSERT_FALSE(r.stats.bound_pairs.empty());
    for (const auto& [parent, child] : r.stats.bound_pairs)
    {
        EXPECT_GE(child, parent - 1e-6 * std::max(1.0, std::abs(parent)));
    }
    ASSERT_TRUE(r.solution.has_value());
    EXPECT_LE(r.stats.best_bound, r.solution->cost + 1e-9);
    const FixedTfResult rel = solve_fixed_tf(planar_three_rays(8.0), 8.0, 12);
    EXPECT_LE(rel.solution->cost, r.solution->cost + 1e-6);
}

TEST(BranchAndBound, NodeLimitIsReported)
{
    BnbOptions opts;
    opts.node_limit = 3;
    const BnbResult r = solve_micp_bnb(planar_three_rays(8.0), 8.0, 30, opts);
    EXPECT_EQ(r.status, BnbStatus::NodeLimit);
    EXPECT_FALSE(r.stats.certified);
    EXPECT_LE(r.stats.nodes_explored, 3);
}

TEST(BranchAndBound, InfeasibleHorizon)
{
    PushCase pc;
    pc.tf = 0.3;
    const BnbResult r = solve_micp_bnb(lcvx::testing::push_spec(pc), pc.tf, 10);
    EXPECT_EQ(r.status, BnbStatus::Infeasible);
    EXPECT_FALSE(r.solution.has_value());
}

TEST(BranchAndBound, ThreadCountDoesNotChangeTheAnswer)
{
    BnbOptions one;
    one.threads = 1;
    BnbOptions two;
    two.threads = 2;
    const ProblemSpec spec = planar_three_rays(8.0);
    const BnbResult a = solve_micp_bnb(spec, 8.0, 10, one);
    const BnbResult b = solve_micp_bnb(spec, 8.0, 10, two);
    ASSERT_TRUE(a.solution && b.solution);
    EXPECT_EQ(a.stats.nodes_explored, b.stats.nodes_explored);
    EXPECT_EQ(a.solution->cost, b.solution->cost);
}
