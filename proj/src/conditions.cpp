#include "lcvx/conditions.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lcvx/error.hpp"

namespace lcvx
{

TerminalSpec TerminalSpec::fixed_state(int n, const std::vector<int>& indices, const Eigen::VectorXd& values)
{
    if (static_cast<Eigen::Index>(indices.size()) != values.size())
    {
        throw InvalidInput("TerminalSpec: indices and values differ in length");
    }
    TerminalSpec t;
    const auto r = static_cast<Eigen::Index>(indices.size());
    t.Hx = Eigen::MatrixXd::Zero(r, n);
    t.ht = Eigen::VectorXd::Zero(r);
    t.h0 = -values;
    for (Eigen::Index j = 0; j < r; ++j)
    {
        const int idx = indices[static_cast<std::size_t>(j)];
        if (idx < 0 || idx >= n)
        {
            throw InvalidInput("TerminalSpec: state index " + std::to_string(idx) + " out of range");
        }
        t.Hx(j, idx) = 1.0;
    }
    return t;
}

void TerminalSpec::fix_final_time(double value)
{
    const auto r = Hx.rows();
    const auto n = Hx.cols();
    Hx.conservativeResize(r + 1, n);
    Hx.row(r).setZero();
    ht.conservativeResize(r + 1);
    ht(r) = 1.0;
    h0.conservativeResize(r + 1);
    h0(r) = -value;
}

bool TerminalSpec::fixes_final_time() const
{
    for (Eigen::Index r = 0; r < Hx.rows(); ++r)
    {
        if (Hx.row(r).isZero(0.0) && ht(r) != 0.0)
        {
            return true;
        }
    }
    return false;
}

double TerminalSpec::fixed_final_time() const
{
    for (Eigen::Index r = 0; r < Hx.rows(); ++r)
    {
        if (Hx.row(r).isZero(0.0) && ht(r) != 0.0)
        {
            return -h0(r) / ht(r);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

Eigen::VectorXd TerminalSpec::cost_gradient(double /*tf*/, const Eigen::VectorXd& x) const
{
    const auto n = Hx.cols();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n + 1);
    switch (cost)
    {
    case Cost::MinimumTime:
        g(n) = 1.0;
        break;
    case Cost::Affine:
        g.head(n) = q;
        g(n) = c;
        break;
    case Cost::Quadratic:
        g.head(n) = 2.0 * W.transpose() * (W * (x - x_ref));
        break;
    }
    return g;
}

void TerminalSpec::validate(int n) const
{
    if (Hx.cols() != n)
    {
        throw InvalidInput("TerminalSpec: Hx must have " + std::to_string(n) + " columns");
    }
    if (ht.size() != Hx.rows() || h0.size() != Hx.rows())
    {
        throw InvalidInput("TerminalSpec: ht and h0 must have one entry per row of Hx");
    }
    if (!Hx.allFinite() || !ht.allFinite() || !h0.allFinite())
    {
        throw InvalidInput("TerminalSpec: non-finite boundary data");
    }
    if (cost == Cost::Affine && (q.size() != n || !q.allFinite() || !std::isfinite(c)))
    {
        throw InvalidInput("TerminalSpec: affine cost needs a finite q of length " + std::to_string(n));
    }
    if (cost == Cost::Quadratic)
    {
        if (W.cols() != n || W.rows() == 0 || x_ref.size() != n || !W.allFinite() || !x_ref.allFinite())
        {
            throw InvalidInput("TerminalSpec: quadratic cost needs W with " + std::to_string(n) +
                               " columns and x_ref of length " + std::to_string(n));
        }
    }
}

std::string to_string(Verdict v)
{
    switch (v)
    {
    case Verdict::Holds:
        return "holds";
    case Verdict::Fails:
        return "fails";
    case Verdict::Inconclusive:
        return "inconclusive";
    }
    return "unknown";
}

Verdict ConditionReport::overall() const
{
    bool inconclusive = false;
    for (const auto& r : results)
    {
        if (r.verdict == Verdict::Fails)
        {
            return Verdict::Fails;
        }
        inconclusive = inconclusive || r.verdict == Verdict::Inconclusive;
    }
    return inconclusive ? Verdict::Inconclusive : Verdict::Holds;
}

namespace
{

struct WitnessLine
{
    bool found{false};
    Eigen::VectorXd z;
    std::string note;
};

/// Single line containing every B'(-A')^k v for v in V, k < n.
WitnessLine witness_line(const LtiSystem& sys, const Eigen::MatrixXd& V, const ConditionOptions& opts)
{
    WitnessLine out;
    const auto n = sys.A.rows();
    const Eigen::MatrixXd F = -sys.A.transpose();
    const Eigen::MatrixXd Bt = sys.B.transpose();
    Eigen::MatrixXd W(Bt.rows(), n * V.cols());
    Eigen::MatrixXd FkV = V;
    double scale = 0.0;
    Eigen::MatrixXd Fk = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        W.middleCols(k * V.cols(), V.cols()) = Bt * FkV;
        scale = std::max(scale, Bt.norm() * Fk.norm());
        FkV = F * FkV;
        Fk = F * Fk;
    }
    if (W.size() == 0)
    {
        out.note = "empty unobservable subspace";
        return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(0) > opts.strict * scale))
    {
        out.note = "primer vanishes on the unobservable subspace";
        return out;
    }
    if (sv.size() > 1 && sv(1) > opts.collinear * sv(0))
    {
        std::ostringstream os;
        os << "unobservable outputs span more than a line (sigma2/sigma1 = " << sv(1) / sv(0) << ")";
        out.note = os.str();
        return out;
    }
    Eigen::VectorXd z = svd.matrixU().col(0);
    Eigen::Index lead = 0;
    z.cwiseAbs().maxCoeff(&lead);
    if (z(lead) < 0.0)
    {
        z = -z;
    }
    out.found = true;
    out.z = z;
    return out;
}

bool all_rays(const std::vector<PointingCone>& cones)
{
    for (const auto& c : cones)
    {
        if (!c.is_ray())
        {
            return false;
        }
    }
    return true;
}

void check_common(const LtiSystem& sys, const std::vector<PointingCone>& cones, int K)
{
    sys.validate();
    if (cones.empty())
    {
        throw InvalidInput("condition check: no input cones");
    }
    if (K < 1 || K > static_cast<int>(cones.size()))
    {
        throw InvalidInput("condition check: K must lie in [1, M]");
    }
    for (const auto& c : cones)
    {
        if (c.dimension() != sys.inputs())
        {
            throw InvalidInput("condition check: cone dimension differs from the input dimension");
        }
    }
}

}  // namespace

ConditionResult check_condition1(const LtiSystem& sys, const ConditionOptions& opts)
{
    sys.validate();
    ConditionResult r;
    r.condition = 1;
    const Eigen::MatrixXd F = -sys.A.transpose();
    r.rank = observability_rank(F, sys.B.transpose(), opts.rank);
    const int n = sys.states();
    r.verdict = r.rank == n ? Verdict::Holds : Verdict::Fails;
    r.detail = "observability rank of {-A', B'} is " + std::to_string(r.rank) + " of " + std::to_string(n);
    return r;
}

ConditionResult check_condition2(const LtiSystem& sys, const std::vector<PointingCone>& cones, int K,
                                 const ConditionOptions& opts)
{
    check_common(sys, cones, K);
    ConditionResult r;
    r.condition = 2;
    if (!all_rays(cones))
    {
        r.verdict = Verdict::Inconclusive;
        r.detail = "test available for ray cones only";
        return r;
    }
    const int n = sys.states();
    const int M = static_cast<int>(cones.size());
    const Eigen::MatrixXd F = -sys.A.transpose();
    bool all_resolved = true;
    for (int i = 0; i < M; ++i)
    {
        ConditionEvidence ev;
        ev.inputs = {i};
        const Eigen::VectorXd& ni = *cones[static_cast<std::size_t>(i)].ray_direction();
        const Eigen::MatrixXd H = (sys.B * ni).transpose();
        ev.rank = observability_rank(F, H, opts.rank);
        if (ev.rank == n)
        {
            ev.resolved_by = "a";
            r.evidence.push_back(std::move(ev));
            continue;
        }
        const WitnessLine line = witness_line(sys, unobservable_subspace(F, H, opts.rank), opts);
        if (!line.found)
        {
            ev.note = line.note;
            all_resolved = false;
            r.evidence.push_back(std::move(ev));
            continue;
        }
        ev.witness = line.z;
        int pos = 0;
        int neg = 0;
        for (int k = 0; k < M; ++k)
        {
            if (k == i)
            {
                continue;
            }
            const auto& cone = cones[static_cast<std::size_t>(k)];
            pos += project_gain(cone, line.z) > opts.strict ? 1 : 0;
            neg += project_gain(cone, -line.z) > opts.strict ? 1 : 0;
        }
        ev.count_above = pos;
        ev.count_below = neg;
        if (pos >= K && neg >= K)
        {
            ev.resolved_by = "b";
        }
        else
        {
            ev.note = "fewer than K other inputs with positive gain on both signs of the witness";
            all_resolved = false;
        }
        r.evidence.push_back(std::move(ev));
    }
    r.verdict = all_resolved ? Verdict::Holds : Verdict::Inconclusive;
    r.detail = all_resolved ? "every input resolved by case (a) or (b)" : "some inputs unresolved";
    return r;
}

ConditionResult check_condition3(const LtiSystem& sys, const std::vector<PointingCone>& cones, int K,
                                 const ConditionOptions& opts)
{
    check_common(sys, cones, K);
    ConditionResult r;
    r.condition = 3;
    if (!all_rays(cones))
    {
        r.verdict = Verdict::Inconclusive;
        r.detail = "test available for ray cones only";
        return r;
    }
    const int n = sys.states();
    const int M = static_cast<int>(cones.size());
    const Eigen::MatrixXd F = -sys.A.transpose();
    bool any_fail = false;
    bool all_resolved = true;
    for (int i = 0; i < M; ++i)
    {
        for (int j = i + 1; j < M; ++j)
        {
            ConditionEvidence ev;
            ev.inputs = {i, j};
            const Eigen::VectorXd& ni = *cones[static_cast<std::size_t>(i)].ray_direction();
            const Eigen::VectorXd& nj = *cones[static_cast<std::size_t>(j)].ray_direction();
            const Eigen::VectorXd d = ni - nj;
            if (d.norm() <= opts.strict)
            {
                ev.note = "identical directions";
                any_fail = true;
                r.evidence.push_back(std::move(ev));
                continue;
            }
            const Eigen::MatrixXd H = (sys.B * d).transpose();
            ev.rank = observability_rank(F, H, opts.rank);
            if (ev.rank == n)
            {
                ev.resolved_by = "a";
                r.evidence.push_back(std::move(ev));
                continue;
            }
            const WitnessLine line = witness_line(sys, unobservable_subspace(F, H, opts.rank), opts);
            if (!line.found)
            {
                ev.note = line.note;
                all_resolved = false;
                r.evidence.push_back(std::move(ev));
                continue;
            }
            ev.witness = line.z;
            bool resolved = true;
            ev.count_above = M;
            ev.count_below = M;
            for (const double sign : {1.0, -1.0})
            {
                const Eigen::VectorXd z = sign * line.z;
                const double gi = project_gain(cones[static_cast<std::size_t>(i)], z);
                int above = 0;
                int below = 0;
                for (int k = 0; k < M; ++k)
                {
                    if (k == i || k == j)
                    {
                        continue;
                    }
                    const double gk = project_gain(cones[static_cast<std::size_t>(k)], z);
                    above += gk > gi + opts.strict ? 1 : 0;
                    below += gk < gi - opts.strict ? 1 : 0;
                }
                ev.count_above = std::min(ev.count_above, above);
                ev.count_below = std::min(ev.count_below, below);
                resolved = resolved && (above >= K || below >= M - K);
            }
            if (resolved)
            {
                ev.resolved_by = "b";
            }
            else
            {
                ev.note = "gain ordering on the witness line does not separate the pair";
                all_resolved = false;
            }
            r.evidence.push_back(std::move(ev));
        }
    }
    if (any_fail)
    {
        r.verdict = Verdict::Fails;
        r.detail = "duplicate input directions";
    }
    else
    {
        r.verdict = all_resolved ? Verdict::Holds : Verdict::Inconclusive;
        r.detail = all_resolved ? "every pair resolved by case (a) or (b)" : "some pairs unresolved";
    }
    return r;
}

ConditionResult check_condition4(const TerminalSpec& term, double tf, const Eigen::VectorXd& x_tf,
                                 const ConditionOptions& opts)
{
    const auto n = term.Hx.cols();
    term.validate(static_cast<int>(n));
    if (x_tf.size() != n)
    {
        throw InvalidInput("check_condition4: terminal state has wrong dimension");
    }
    ConditionResult r;
    r.condition = 4;
    const Eigen::VectorXd v = term.cost_gradient(tf, x_tf);
    const double vn = v.norm();
    if (!(vn > 0.0))
    {
        throw InvalidInput("check_condition4: terminal cost gradient vanishes");
    }
    Eigen::MatrixXd Mb(n + 1, term.rows());
    Mb.topRows(n) = term.Hx.transpose();
    Mb.row(n) = term.ht.transpose();
    double residual = vn;
    if (Mb.cols() > 0)
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Mb, Eigen::ComputeThinU);
        const Eigen::VectorXd& sv = svd.singularValues();
        const double thresh = sv.size() > 0 ? static_cast<double>(std::max(Mb.rows(), Mb.cols())) *
                                                  std::numeric_limits<double>::epsilon() * sv(0)
                                            : 0.0;
        const int rank = static_cast<int>((sv.array() > thresh).count());
        r.rank = rank;
        const Eigen::MatrixXd U = svd.matrixU().leftCols(rank);
        residual = (v - U * (U.transpose() * v)).norm();
    }
    r.residual = residual;
    r.verdict = residual > opts.range_tol * vn ? Verdict::Holds : Verdict::Fails;
    std::ostringstream os;
    os << "cost gradient residual outside the boundary-gradient range: " << residual / vn << " (relative)";
    r.detail = os.str();
    return r;
}

ConditionReport check_all(const LtiSystem& sys, const std::vector<PointingCone>& cones, int K,
                          const TerminalSpec& term, double tf, const Eigen::VectorXd& x_tf,
                          const ConditionOptions& opts)
{
    ConditionReport rep;
    rep.results.push_back(check_condition1(sys, opts));
    rep.results.push_back(check_condition2(sys, cones, K, opts));
    rep.results.push_back(check_condition3(sys, cones, K, opts));
    rep.results.push_back(check_condition4(term, tf, x_tf, opts));
    return rep;
}

}  // namespace lcvx
