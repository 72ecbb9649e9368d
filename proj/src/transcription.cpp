#include "lcvx/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lcvx/error.hpp"

namespace lcvx
{

void ProblemSpec::validate() const
{
    sys.validate();
    const int n = sys.states();
    const int m = sys.inputs();
    if (cones.empty())
    {
        throw InvalidInput("ProblemSpec: at least one input cone is required");
    }
    for (std::size_t i = 0; i < cones.size(); ++i)
    {
        if (cones[i].dimension() != m)
        {
            throw InvalidInput("ProblemSpec: cone " + std::to_string(i) + " has dimension " +
                               std::to_string(cones[i].dimension()) + ", inputs have " + std::to_string(m));
        }
    }
    if (!std::isfinite(rho1) || !std::isfinite(rho2))
    {
        throw InvalidInput("ProblemSpec: non-finite norm bounds");
    }
    if (!(rho1 > 0.0) || !(rho1 < rho2))
    {
        std::ostringstream os;
        os << "need 0 < rho1 < rho2, got rho1 = " << rho1 << ", rho2 = " << rho2;
        throw AssumptionViolation("distinct-norm-bounds", os.str());
    }
    if (K < 1 || K > inputs())
    {
        throw InvalidInput("ProblemSpec: K must lie in [1, " + std::to_string(inputs()) + "], got " +
                           std::to_string(K));
    }
    if (x0.size() != n || !x0.allFinite())
    {
        throw InvalidInput("ProblemSpec: x0 must be finite with " + std::to_string(n) + " entries");
    }
    terminal.validate(n);
    bool trivial_cost = false;
    switch (terminal.cost)
    {
    case TerminalSpec::Cost::MinimumTime:
        break;
    case TerminalSpec::Cost::Affine:
        trivial_cost = terminal.q.isZero(0.0) && terminal.c == 0.0;
        break;
    case TerminalSpec::Cost::Quadratic:
        trivial_cost = terminal.W.isZero(0.0);
        break;
    }
    if (trivial_cost)
    {
        throw AssumptionViolation("nonzero-cost-gradient", "terminal cost gradient is identically zero");
    }
    if (!interiors_disjoint(cones))
    {
        throw AssumptionViolation("disjoint-interiors", "two input pointing sets share interior points");
    }
}

std::string to_string(RowBlock::Family f)
{
    switch (f)
    {
    case RowBlock::Family::Initial:
        return "initial";
    case RowBlock::Family::Dynamics:
        return "dynamics";
    case RowBlock::Family::Terminal:
        return "terminal";
    case RowBlock::Family::RaySpan:
        return "ray_span";
    case RowBlock::Family::Pin:
        return "pin";
    case RowBlock::Family::SigmaLower:
        return "sigma_lower";
    case RowBlock::Family::SigmaUpper:
        return "sigma_upper";
    case RowBlock::Family::GammaLower:
        return "gamma_lower";
    case RowBlock::Family::GammaUpper:
        return "gamma_upper";
    case RowBlock::Family::Cardinality:
        return "cardinality";
    case RowBlock::Family::Pointing:
        return "pointing";
    case RowBlock::Family::RayLower:
        return "ray_lower";
    case RowBlock::Family::Norm:
        return "norm";
    case RowBlock::Family::CostEpigraph:
        return "cost_epigraph";
    }
    return "unknown";
}

int Transcription::dynamics_row(int k) const
{
    return index.n + k * index.n;
}

const RowBlock* Transcription::find(RowBlock::Family f, int node, int input) const
{
    for (const auto& b : rows)
    {
        if (b.family == f && b.node == node && b.input == input)
        {
            return &b;
        }
    }
    return nullptr;
}

namespace
{

using Triplets = std::vector<Eigen::Triplet<double>>;

class Builder
{
public:
    Builder(std::vector<RowBlock>& blocks) : blocks_(blocks) {}

    int begin(RowBlock::Family f, bool equality, int node = -1, int input = -1)
    {
        RowBlock b{f, equality, equality ? eq_rows_ : cone_rows_, 0, node, input};
        blocks_.push_back(b);
        return b.first;
    }

    /// Appends one row; returns its index.
    int row(bool equality, double rhs)
    {
        auto& blk = blocks_.back();
        ++blk.count;
        if (equality)
        {
            beq_.push_back(rhs);
            return eq_rows_++;
        }
        h_.push_back(rhs);
        return cone_rows_++;
    }

    void eq(int r, int col, double v)
    {
        if (v != 0.0)
        {
            Aeq_.emplace_back(r, col, v);
        }
    }
    void ineq(int r, int col, double v)
    {
        if (v != 0.0)
        {
            G_.emplace_back(r, col, v);
        }
    }

    void finish(ConicProgram& prog, int vars) const
    {
        prog.Aeq.resize(eq_rows_, vars);
        prog.Aeq.setFromTriplets(Aeq_.begin(), Aeq_.end());
        prog.beq = Eigen::Map<const Eigen::VectorXd>(beq_.data(), static_cast<Eigen::Index>(beq_.size()));
        prog.G.resize(cone_rows_, vars);
        prog.G.setFromTriplets(G_.begin(), G_.end());
        prog.h = Eigen::Map<const Eigen::VectorXd>(h_.data(), static_cast<Eigen::Index>(h_.size()));
    }

    int cone_rows() const { return cone_rows_; }

private:
    std::vector<RowBlock>& blocks_;
    Triplets Aeq_;
    Triplets G_;
    std::vector<double> beq_;
    std::vector<double> h_;
    int eq_rows_{0};
    int cone_rows_{0};
};

/// Componentwise magnitude of the terminal target implied by the state rows of the boundary map.
Eigen::VectorXd terminal_magnitude(const TerminalSpec& term, double tf, int n)
{
    std::vector<Eigen::Index> state_rows;
    for (Eigen::Index r = 0; r < term.Hx.rows(); ++r)
    {
        if (!term.Hx.row(r).isZero(0.0))
        {
            state_rows.push_back(r);
        }
    }
    Eigen::VectorXd mag = Eigen::VectorXd::Zero(n);
    if (!state_rows.empty())
    {
        Eigen::MatrixXd H(static_cast<Eigen::Index>(state_rows.size()), n);
        Eigen::VectorXd rhs(H.rows());
        for (std::size_t j = 0; j < state_rows.size(); ++j)
        {
            const auto r = state_rows[j];
            H.row(static_cast<Eigen::Index>(j)) = term.Hx.row(r);
            rhs(static_cast<Eigen::Index>(j)) = -term.h0(r) - term.ht(r) * tf;
        }
        mag = H.completeOrthogonalDecomposition().solve(rhs).cwiseAbs();
    }
    if (term.cost == TerminalSpec::Cost::Quadratic)
    {
        mag = mag.cwiseMax(term.x_ref.cwiseAbs());
    }
    return mag;
}

Eigen::VectorXd state_scaling(const ProblemSpec& spec, const DiscreteDynamics& dyn, double tf)
{
    const int n = spec.sys.states();
    Eigen::VectorXd reach = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd P = dyn.Bd;
    Eigen::VectorXd drift = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd wk = dyn.wd;
    for (int k = 0; k < dyn.steps; ++k)
    {
        reach += P.cwiseAbs().rowwise().sum();
        drift += wk;
        P = dyn.Ad * P;
        wk = dyn.Ad * wk;
    }
    Eigen::VectorXd s = (reach * spec.rho2 + drift.cwiseAbs())
                            .cwiseMax(spec.x0.cwiseAbs())
                            .cwiseMax(terminal_magnitude(spec.terminal, tf, n));
    const double floor = std::max(1e-12, 1e-9 * s.maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j)
    {
        if (!(s(j) > floor))
        {
            s(j) = s.maxCoeff() > 0.0 ? floor : 1.0;
        }
    }
    return s;
}

}  // namespace

Transcription transcribe(const ProblemSpec& spec, double tf, int N, const TranscriptionOptions& opts)
{
    spec.validate();
    if (!(tf > 0.0) || !std::isfinite(tf))
    {
        throw InvalidInput("transcribe: tf must be positive and finite");
    }
    if (N < 2)
    {
        throw InvalidInput("transcribe: need N >= 2 nodes");
    }
    const auto& term = spec.terminal;
    for (Eigen::Index r = 0; r < term.Hx.rows(); ++r)
    {
        if (term.Hx.row(r).isZero(0.0))
        {
            const double res = term.ht(r) * tf + term.h0(r);
            if (std::abs(res) > 1e-9 * std::max(1.0, std::abs(term.h0(r))))
            {
                std::ostringstream os;
                os << "transcribe: final time is fixed at " << -term.h0(r) / term.ht(r) << ", requested " << tf;
                throw InvalidInput(os.str());
            }
        }
    }

    Transcription tr;
    tr.tf = tf;
    const int n = spec.sys.states();
    const int m = spec.sys.inputs();
    const int M = spec.inputs();
    tr.dynamics = zoh_discretize(spec.sys, tf / N, N);
    const auto& dyn = tr.dynamics;
    tr.index = IndexMap{n, m, M, N, term.cost == TerminalSpec::Cost::Quadratic};
    const IndexMap& ix = tr.index;

    tr.state_scale = opts.scale ? state_scaling(spec, dyn, tf) : Eigen::VectorXd::Ones(n);
    tr.input_scale = opts.scale ? spec.rho2 : 1.0;
    const Eigen::VectorXd& Sx = tr.state_scale;
    const double su = tr.input_scale;

    for (const auto& p : opts.pins)
    {
        if (p.node < 0 || p.node >= N || p.input < 0 || p.input >= M || (p.value != 0.0 && p.value != 1.0))
        {
            throw InvalidInput("transcribe: invalid gamma pin");
        }
    }

    Builder b(tr.rows);
    using F = RowBlock::Family;

    b.begin(F::Initial, true);
    for (int j = 0; j < n; ++j)
    {
        const int r = b.row(true, spec.x0(j) / Sx(j));
        b.eq(r, ix.x(0, j), 1.0);
    }

    const Eigen::MatrixXd Bsum = dyn.Bd * su;
    for (int k = 0; k < N; ++k)
    {
        b.begin(F::Dynamics, true, k);
        for (int rr = 0; rr < n; ++rr)
        {
            const double inv = 1.0 / Sx(rr);
            const int r = b.row(true, dyn.wd(rr) * inv);
            b.eq(r, ix.x(k + 1, rr), 1.0);
            for (int c = 0; c < n; ++c)
            {
                b.eq(r, ix.x(k, c), -dyn.Ad(rr, c) * Sx(c) * inv);
            }
            for (int i = 0; i < M; ++i)
            {
                for (int j = 0; j < m; ++j)
                {
                    b.eq(r, ix.u(k, i, j), -Bsum(rr, j) * inv);
                }
            }
        }
    }

    b.begin(F::Terminal, true);
    for (Eigen::Index r0 = 0; r0 < term.Hx.rows(); ++r0)
    {
        if (term.Hx.row(r0).isZero(0.0))
        {
            continue;
        }
        const int r = b.row(true, -term.h0(r0) - term.ht(r0) * tf);
        for (int c = 0; c < n; ++c)
        {
            b.eq(r, ix.x(N, c), term.Hx(r0, c) * Sx(c));
        }
    }

    for (int k = 0; k < N; ++k)
    {
        for (int i = 0; i < M; ++i)
        {
            const auto& cone = spec.cones[static_cast<std::size_t>(i)];
            if (!cone.is_ray() || m == 1)
            {
                continue;
            }
            const Eigen::MatrixXd P = cone.ray_complement();
            b.begin(F::RaySpan, true, k, i);
            for (Eigen::Index rr = 0; rr < P.rows(); ++rr)
            {
                const int r = b.row(true, 0.0);
                for (int j = 0; j < m; ++j)
                {
                    b.eq(r, ix.u(k, i, j), P(rr, j));
                }
            }
        }
    }

    for (const auto& p : opts.pins)
    {
        b.begin(F::Pin, true, p.node, p.input);
        const int r = b.row(true, p.value);
        b.eq(r, ix.gamma(p.node, p.input), 1.0);
    }

    // Nonnegative-orthant rows, family by family.
    auto per_node_input = [&](F family, auto&& emit) {
        for (int k = 0; k < N; ++k)
        {
            for (int i = 0; i < M; ++i)
            {
                b.begin(family, false, k, i);
                emit(k, i);
            }
        }
    };
    per_node_input(F::SigmaLower, [&](int k, int i) {
        const int r = b.row(false, 0.0);
        b.ineq(r, ix.gamma(k, i), spec.rho1 / su);
        b.ineq(r, ix.sigma(k, i), -1.0);
    });
    per_node_input(F::SigmaUpper, [&](int k, int i) {
        const int r = b.row(false, 0.0);
        b.ineq(r, ix.sigma(k, i), 1.0);
        b.ineq(r, ix.gamma(k, i), -spec.rho2 / su);
    });
    per_node_input(F::GammaLower, [&](int k, int i) {
        const int r = b.row(false, 0.0);
        b.ineq(r, ix.gamma(k, i), -1.0);
    });
    per_node_input(F::GammaUpper, [&](int k, int i) {
        const int r = b.row(false, 1.0);
        b.ineq(r, ix.gamma(k, i), 1.0);
    });
    for (int k = 0; k < N; ++k)
    {
        b.begin(F::Cardinality, false, k);
        const int r = b.row(false, static_cast<double>(spec.K));
        for (int i = 0; i < M; ++i)
        {
            b.ineq(r, ix.gamma(k, i), 1.0);
        }
    }
    per_node_input(F::Pointing, [&](int k, int i) {
        const auto& cone = spec.cones[static_cast<std::size_t>(i)];
        if (const auto& dir = cone.ray_direction())
        {
            const int r = b.row(false, 0.0);
            for (int j = 0; j < m; ++j)
            {
                b.ineq(r, ix.u(k, i, j), -(*dir)(j));
            }
            return;
        }
        const Eigen::MatrixXd& C = cone.facets();
        for (Eigen::Index rr = 0; rr < C.rows(); ++rr)
        {
            const int r = b.row(false, 0.0);
            for (int j = 0; j < m; ++j)
            {
                b.ineq(r, ix.u(k, i, j), C(rr, j));
            }
        }
    });
    if (opts.ray_lower_bound)
    {
        for (int k = 0; k < N; ++k)
        {
            for (int i = 0; i < M; ++i)
            {
                const auto& dir = spec.cones[static_cast<std::size_t>(i)].ray_direction();
                if (!dir)
                {
                    continue;
                }
                b.begin(F::RayLower, false, k, i);
                const int r = b.row(false, 0.0);
                b.ineq(r, ix.gamma(k, i), spec.rho1 / su);
                for (int j = 0; j < m; ++j)
                {
                    b.ineq(r, ix.u(k, i, j), -(*dir)(j));
                }
            }
        }
    }
    const int nonneg_rows = b.cone_rows();

    std::vector<Cone> cones;
    if (nonneg_rows > 0)
    {
        cones.push_back({Cone::Kind::Nonnegative, nonneg_rows});
    }
    per_node_input(F::Norm, [&](int k, int i) {
        int r = b.row(false, 0.0);
        b.ineq(r, ix.sigma(k, i), -1.0);
        for (int j = 0; j < m; ++j)
        {
            r = b.row(false, 0.0);
            b.ineq(r, ix.u(k, i, j), -1.0);
        }
        cones.push_back({Cone::Kind::SecondOrder, m + 1});
    });

    ConicProgram& prog = tr.program;
    prog.c = Eigen::VectorXd::Zero(ix.size());
    switch (term.cost)
    {
    case TerminalSpec::Cost::MinimumTime:
        if (opts.on_time_objective)
        {
            for (int k = 0; k < N; ++k)
            {
                for (int i = 0; i < M; ++i)
                {
                    prog.c(ix.gamma(k, i)) = 1.0 / N;
                }
            }
        }
        break;
    case TerminalSpec::Cost::Affine:
        for (int j = 0; j < n; ++j)
        {
            prog.c(ix.x(N, j)) = term.q(j) * Sx(j);
        }
        tr.objective_offset = term.c * tf;
        break;
    case TerminalSpec::Cost::Quadratic:
    {
        // ||W (Sx .* xs - x_ref)|| <= r
        b.begin(F::CostEpigraph, false);
        int r = b.row(false, 0.0);
        b.ineq(r, ix.cost_variable(), -1.0);
        const Eigen::VectorXd Wref = term.W * term.x_ref;
        for (Eigen::Index rr = 0; rr < term.W.rows(); ++rr)
        {
            r = b.row(false, -Wref(rr));
            for (int c = 0; c < n; ++c)
            {
                b.ineq(r, ix.x(N, c), -term.W(rr, c) * Sx(c));
            }
        }
        cones.push_back({Cone::Kind::SecondOrder, static_cast<int>(term.W.rows()) + 1});
        prog.c(ix.cost_variable()) = 1.0;
        break;
    }
    }
    b.finish(prog, ix.size());
    prog.cones = std::move(cones);
    prog.validate();
    return tr;
}

PrimalTrajectory extract_primal(const Transcription& tr, const Eigen::VectorXd& z)
{
    const IndexMap& ix = tr.index;
    if (z.size() != ix.size())
    {
        throw InvalidInput("extract_primal: primal vector has the wrong length");
    }
    PrimalTrajectory out;
    out.x.resize(static_cast<std::size_t>(ix.N + 1));
    for (int k = 0; k <= ix.N; ++k)
    {
        out.x[static_cast<std::size_t>(k)] = z.segment(ix.x(k), ix.n).cwiseProduct(tr.state_scale);
    }
    out.u.assign(static_cast<std::size_t>(ix.N), std::vector<Eigen::VectorXd>(static_cast<std::size_t>(ix.M)));
    out.sigma.resize(ix.N, ix.M);
    out.gamma.resize(ix.N, ix.M);
    for (int k = 0; k < ix.N; ++k)
    {
        for (int i = 0; i < ix.M; ++i)
        {
            out.u[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
                z.segment(ix.u(k, i), ix.m) * tr.input_scale;
            out.sigma(k, i) = z(ix.sigma(k, i)) * tr.input_scale;
            out.gamma(k, i) = z(ix.gamma(k, i));
        }
    }
    return out;
}

double ConstraintResiduals::max() const
{
    return std::max({initial, dynamics, terminal, sigma_bounds, norm, gamma_bounds, cardinality, pointing});
}

ConstraintResiduals relaxed_residuals(const ProblemSpec& spec, const DiscreteDynamics& dyn, double tf,
                                      const PrimalTrajectory& traj)
{
    ConstraintResiduals r;
    const int N = static_cast<int>(traj.u.size());
    const int M = spec.inputs();
    r.initial = (traj.x.front() - spec.x0).cwiseAbs().maxCoeff();
    for (int k = 0; k < N; ++k)
    {
        Eigen::VectorXd usum = Eigen::VectorXd::Zero(spec.sys.inputs());
        double gsum = 0.0;
        for (int i = 0; i < M; ++i)
        {
            const Eigen::VectorXd& u = traj.u[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
            const double s = traj.sigma(k, i);
            const double g = traj.gamma(k, i);
            usum += u;
            gsum += g;
            r.sigma_bounds = std::max({r.sigma_bounds, g * spec.rho1 - s, s - g * spec.rho2});
            r.norm = std::max(r.norm, u.norm() - s);
            r.gamma_bounds = std::max({r.gamma_bounds, -g, g - 1.0});
            const auto& cone = spec.cones[static_cast<std::size_t>(i)];
            if (const auto& dir = cone.ray_direction())
            {
                const double along = dir->dot(u);
                r.pointing = std::max({r.pointing, -along, (u - along * *dir).norm()});
            }
            else
            {
                r.pointing = std::max(r.pointing, (cone.facets() * u).maxCoeff());
            }
        }
        r.cardinality = std::max(r.cardinality, gsum - spec.K);
        const Eigen::VectorXd pred = dyn.Ad * traj.x[static_cast<std::size_t>(k)] + dyn.Bd * usum + dyn.wd;
        r.dynamics = std::max(r.dynamics, (traj.x[static_cast<std::size_t>(k + 1)] - pred).cwiseAbs().maxCoeff());
    }
    const auto& term = spec.terminal;
    if (term.rows() > 0)
    {
        r.terminal = (term.Hx * traj.x.back() + term.ht * tf + term.h0).cwiseAbs().maxCoeff();
    }
    return r;
}

}  // namespace lcvx
