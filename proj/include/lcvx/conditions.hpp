#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcvx/dynamics.hpp"
#include "lcvx/geometry.hpp"

namespace lcvx
{

/// Terminal boundary map  Hx x(tf) + ht tf + h0 = 0  and terminal cost m(tf, x(tf)).
///
/// Rows whose Hx part is zero constrain only the final time (fixed-tf problems).
struct TerminalSpec
{
    enum class Cost
    {
        MinimumTime,  ///< m = tf
        Affine,       ///< m = q'x(tf) + c tf
        Quadratic,    ///< m = ||W (x(tf) - x_ref)||^2
    };

    Eigen::MatrixXd Hx;
    Eigen::VectorXd ht;
    Eigen::VectorXd h0;

    Cost cost{Cost::MinimumTime};
    Eigen::VectorXd q;
    double c{0.0};
    Eigen::MatrixXd W;
    Eigen::VectorXd x_ref;

    /// Fixes the listed state components to the given values; time free.
    static TerminalSpec fixed_state(int n, const std::vector<int>& indices, const Eigen::VectorXd& values);

    /// Appends the row  tf - value = 0.
    void fix_final_time(double value);

    int rows() const { return static_cast<int>(Hx.rows()); }

    /// True when some row constrains tf alone.
    bool fixes_final_time() const;

    /// Value pinned by the time-only rows; NaN when time is free.
    double fixed_final_time() const;

    /// Gradient (d m/dx; d m/dtf) at the terminal point, length n + 1.
    Eigen::VectorXd cost_gradient(double tf, const Eigen::VectorXd& x) const;

    /// Throws InvalidInput on inconsistent dimensions.
    void validate(int n) const;
};

enum class Verdict
{
    Holds,
    Fails,
    Inconclusive,
};

std::string to_string(Verdict v);

/// Evidence for one input (Condition 2) or one input pair (Condition 3).
struct ConditionEvidence
{
    std::vector<int> inputs;
    int rank{0};
    /// "a" (observable projected pair), "b" (witness-line gain test) or empty.
    std::string resolved_by;
    Eigen::VectorXd witness;
    /// Condition 2: inputs with positive gain on +z and on -z.
    /// Condition 3: worst-sign counts of inputs strictly above and below the reference gain.
    int count_above{0};
    int count_below{0};
    std::string note;
};

struct ConditionResult
{
    int condition{0};
    Verdict verdict{Verdict::Inconclusive};
    std::string detail;
    int rank{0};
    double residual{0.0};
    std::vector<ConditionEvidence> evidence;
};

struct ConditionReport
{
    std::vector<ConditionResult> results;

    /// Fails if any fails, else inconclusive if any inconclusive, else holds.
    Verdict overall() const;
};

struct ConditionOptions
{
    RankTolerance rank{};
    /// "> 0" means "> strict * scale".
    double strict{1e-7};
    /// Maximal normalized deviation from a common line for the witness vectors.
    double collinear{1e-8};
    /// Condition 4 holds when the residual exceeds range_tol * ||v||.
    double range_tol{1e-8};
};

ConditionResult check_condition1(const LtiSystem& sys, const ConditionOptions& opts = {});

ConditionResult check_condition2(const LtiSystem& sys, const std::vector<PointingCone>& cones, int K,
                                 const ConditionOptions& opts = {});

ConditionResult check_condition3(const LtiSystem& sys, const std::vector<PointingCone>& cones, int K,
                                 const ConditionOptions& opts = {});

/// Throws InvalidInput when the cost gradient vanishes.
ConditionResult check_condition4(const TerminalSpec& term, double tf, const Eigen::VectorXd& x_tf,
                                 const ConditionOptions& opts = {});

ConditionReport check_all(const LtiSystem& sys, const std::vector<PointingCone>& cones, int K,
                          const TerminalSpec& term, double tf, const Eigen::VectorXd& x_tf,
                          const ConditionOptions& opts = {});

}  // namespace lcvx
