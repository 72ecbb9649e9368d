#include "lcvx/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "lcvx/error.hpp"

namespace lcvx
{

std::string to_string(ConicStatus status)
{
    switch (status)
    {
    case ConicStatus::Optimal:
        return "optimal";
    case ConicStatus::PrimalInfeasible:
        return "primal-infeasible";
    case ConicStatus::DualInfeasible:
        return "dual-infeasible";
    case ConicStatus::NumericalFailure:
        return "numerical-failure";
    }
    return "unknown";
}

void ConicProgram::validate() const
{
    const auto n = c.size();
    if (Aeq.cols() != n && !(Aeq.rows() == 0))
    {
        throw InvalidInput("ConicProgram: Aeq has " + std::to_string(Aeq.cols()) + " columns, expected " +
                           std::to_string(n));
    }
    if (Aeq.rows() != beq.size())
    {
        throw InvalidInput("ConicProgram: Aeq rows and beq size differ");
    }
    if (G.cols() != n && !(G.rows() == 0))
    {
        throw InvalidInput("ConicProgram: G has " + std::to_string(G.cols()) + " columns, expected " +
                           std::to_string(n));
    }
    if (G.rows() != h.size())
    {
        throw InvalidInput("ConicProgram: G rows and h size differ");
    }
    long total = 0;
    for (const Cone& k : cones)
    {
        if (k.size < 1 || (k.kind == Cone::Kind::SecondOrder && k.size < 2))
        {
            throw InvalidInput("ConicProgram: invalid cone size " + std::to_string(k.size));
        }
        total += k.size;
    }
    if (total != G.rows())
    {
        throw InvalidInput("ConicProgram: cone sizes sum to " + std::to_string(total) + " but G has " +
                           std::to_string(G.rows()) + " rows");
    }
    if (!variable_names.empty() && static_cast<Eigen::Index>(variable_names.size()) != n)
    {
        throw InvalidInput("ConicProgram: variable_names size mismatch");
    }
    auto finite_sparse = [](const SparseMatrix& M) {
        for (int k = 0; k < M.outerSize(); ++k)
        {
            for (SparseMatrix::InnerIterator it(M, k); it; ++it)
            {
                if (!std::isfinite(it.value()))
                {
                    return false;
                }
            }
        }
        return true;
    };
    if (!c.allFinite() || !beq.allFinite() || !h.allFinite() || !finite_sparse(Aeq) || !finite_sparse(G))
    {
        throw InvalidInput("ConicProgram: non-finite data");
    }
}

namespace
{

using Eigen::Index;
using Eigen::VectorXd;

struct Block
{
    bool soc{false};
    Index offset{0};
    Index size{0};
};

/// Nesterov-Todd scaling for one block.
struct Scaling
{
    // LP: per-row w, W = diag(w)
    VectorXd w;
    // SOC: W = eta * [wbar0, wbar1'; wbar1, I + wbar1 wbar1'/(1 + wbar0)]
    double eta{1.0};
    VectorXd wbar;
};

double soc_jnorm2(const Eigen::Ref<const VectorXd>& v)
{
    return v(0) * v(0) - v.tail(v.size() - 1).squaredNorm();
}

class InteriorPoint
{
public:
    InteriorPoint(const ConicProgram& prog, const SolverOptions& opts) : prog_(prog), opts_(opts) { setup(); }

    ConicSolution run();

private:
    void setup();
    void equilibrate();
    void build_kkt();
    void update_kkt_cone_block(bool identity);
    void set_regularization(double delta);
    bool factor();
    bool inertia_ok() const;
    void solve_kkt(const VectorXd& rhs, VectorXd& dx, VectorXd& dy, VectorXd& dz);
    void kkt_multiply(const VectorXd& dx, const VectorXd& dy, const VectorXd& dz, VectorXd& out) const;

    bool update_scalings();
    void scale_W(const VectorXd& v, VectorXd& out) const;      // W v
    void scale_W2(const VectorXd& v, VectorXd& out) const;     // W^2 v
    void jordan_product(const VectorXd& u, const VectorXd& v, VectorXd& out) const;
    void jordan_divide(const VectorXd& lam, const VectorXd& w, VectorXd& out) const;
    double max_step(const VectorXd& dsW, const VectorXd& dzW, double dtau, double dkap) const;
    void bring_to_cone(VectorXd& v) const;

    struct Metrics
    {
        double pres{0}, dres{0}, gap{0}, pcost{0}, dcost{0};
        bool pinf{false}, dinf{false};
    };
    Metrics evaluate() const;
    void unscale_into(ConicSolution& sol, double scale_x, double scale_yz) const;

    const ConicProgram& prog_;
    SolverOptions opts_;

    // Working (equilibrated) data. Zero cones are folded into the equality block.
    SparseMatrix A_, G_, At_, Gt_;
    VectorXd c_, b_, h_;
    VectorXd Dx_, Ey_, Fz_;  // equilibration: x = Dx xs, nu = Ey nus, mu = Fz mus
    std::vector<Block> blocks_;
    std::vector<Index> eq_from_zero_cone_;  // original G row for each appended equality
    std::vector<Index> g_row_of_work_row_;  // original G row for each working cone row
    Index n_{0}, p_{0}, m_{0}, p_orig_{0};
    int degree_{0};

    // Iterates
    VectorXd x_, y_, z_, s_, lambda_;
    double tau_{1.0}, kappa_{1.0};
    std::vector<Scaling> scal_;

    // KKT system
    SparseMatrix K_;
    std::vector<Index> diag_x_, diag_y_;  // value indices of the regularization entries
    std::vector<std::vector<Index>> cone_entries_;  // per block: value indices of the -W^2 block
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Upper, Eigen::AMDOrdering<int>> ldlt_;
    double delta_{1e-7};
    bool kkt_identity_{true};
};

constexpr double kBaseDelta = 1e-7;
constexpr double kMaxDelta = 1e-3;

void InteriorPoint::setup()
{
    prog_.validate();
    n_ = prog_.c.size();
    p_orig_ = prog_.Aeq.rows();

    // Partition G rows into zero-cone rows (become equalities) and proper cone rows.
    std::vector<Index> zero_rows;
    std::vector<Index> keep_rows;
    Index off = 0;
    for (const Cone& k : prog_.cones)
    {
        for (Index r = 0; r < k.size; ++r)
        {
            (k.kind == Cone::Kind::Zero ? zero_rows : keep_rows).push_back(off + r);
        }
        off += k.size;
    }
    Index woff = 0;
    for (const Cone& k : prog_.cones)
    {
        if (k.kind == Cone::Kind::Zero)
        {
            continue;
        }
        blocks_.push_back(Block{k.kind == Cone::Kind::SecondOrder, woff, k.size});
        degree_ += k.kind == Cone::Kind::SecondOrder ? 1 : static_cast<int>(k.size);
        woff += k.size;
    }
    eq_from_zero_cone_ = zero_rows;
    g_row_of_work_row_ = keep_rows;
    p_ = p_orig_ + static_cast<Index>(zero_rows.size());
    m_ = static_cast<Index>(keep_rows.size());

    // Row-select via a permutation-like selector matrix.
    const SparseMatrix Grow = prog_.G.rows() > 0 ? SparseMatrix(prog_.G) : SparseMatrix(0, n_);
    auto select = [&](const std::vector<Index>& rows) {
        SparseMatrix S(static_cast<Index>(rows.size()), Grow.rows());
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            t.emplace_back(static_cast<int>(i), static_cast<int>(rows[i]), 1.0);
        }
        S.setFromTriplets(t.begin(), t.end());
        return SparseMatrix(S * Grow);
    };
    const SparseMatrix Gz = select(zero_rows);
    const SparseMatrix Gk = select(keep_rows);

    A_.resize(p_, n_);
    {
        std::vector<Eigen::Triplet<double>> t;
        const SparseMatrix Aeq = p_orig_ > 0 ? SparseMatrix(prog_.Aeq) : SparseMatrix(0, n_);
        for (int k = 0; k < Aeq.outerSize(); ++k)
        {
            for (SparseMatrix::InnerIterator it(Aeq, k); it; ++it)
            {
                t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
            }
        }
        for (int k = 0; k < Gz.outerSize(); ++k)
        {
            for (SparseMatrix::InnerIterator it(Gz, k); it; ++it)
            {
                t.emplace_back(static_cast<int>(p_orig_ + it.row()), static_cast<int>(it.col()), it.value());
            }
        }
        A_.setFromTriplets(t.begin(), t.end());
    }
    b_.resize(p_);
    if (p_orig_ > 0)
    {
        b_.head(p_orig_) = prog_.beq;
    }
    for (std::size_t i = 0; i < zero_rows.size(); ++i)
    {
        b_(p_orig_ + static_cast<Index>(i)) = prog_.h(zero_rows[i]);
    }
    G_ = Gk;
    h_.resize(m_);
    for (std::size_t i = 0; i < keep_rows.size(); ++i)
    {
        h_(static_cast<Index>(i)) = prog_.h(keep_rows[i]);
    }
    c_ = prog_.c;

    A_.makeCompressed();
    G_.makeCompressed();
    equilibrate();
    At_ = A_.transpose();
    Gt_ = G_.transpose();
    scal_.resize(blocks_.size());
}

void InteriorPoint::equilibrate()
{
    Dx_ = VectorXd::Ones(n_);
    Ey_ = VectorXd::Ones(p_);
    Fz_ = VectorXd::Ones(m_);
    constexpr double lo = 1e-4;
    constexpr double hi = 1e4;
    for (int pass = 0; pass < opts_.equilibration_passes; ++pass)
    {
        VectorXd colmax = VectorXd::Zero(n_);
        VectorXd arow = VectorXd::Zero(p_);
        VectorXd grow = VectorXd::Zero(m_);
        for (int k = 0; k < A_.outerSize(); ++k)
        {
            for (SparseMatrix::InnerIterator it(A_, k); it; ++it)
            {
                const double v = std::abs(it.value());
                colmax(it.col()) = std::max(colmax(it.col()), v);
                arow(it.row()) = std::max(arow(it.row()), v);
            }
        }
        for (int k = 0; k < G_.outerSize(); ++k)
        {
            for (SparseMatrix::InnerIterator it(G_, k); it; ++it)
            {
                const double v = std::abs(it.value());
                colmax(it.col()) = std::max(colmax(it.col()), v);
                grow(it.row()) = std::max(grow(it.row()), v);
            }
        }
        for (const Block& blk : blocks_)
        {
            if (blk.soc)
            {
                const double mx = grow.segment(blk.offset, blk.size).maxCoeff();
                grow.segment(blk.offset, blk.size).setConstant(mx);
            }
        }
        auto factor = [&](double v) { return v > 0.0 ? std::clamp(1.0 / std::sqrt(v), lo, hi) : 1.0; };
        VectorXd dcol = colmax.unaryExpr(factor);
        VectorXd drowA = arow.unaryExpr(factor);
        VectorXd drowG = grow.unaryExpr(factor);
        // Keep cumulative factors bounded.
        for (Index j = 0; j < n_; ++j)
        {
            dcol(j) = std::clamp(Dx_(j) * dcol(j), lo, hi) / Dx_(j);
            Dx_(j) *= dcol(j);
        }
        for (Index i = 0; i < p_; ++i)
        {
            drowA(i) = std::clamp(Ey_(i) * drowA(i), lo, hi) / Ey_(i);
            Ey_(i) *= drowA(i);
        }
        for (Index i = 0; i < m_; ++i)
        {
            drowG(i) = std::clamp(Fz_(i) * drowG(i), lo, hi) / Fz_(i);
            Fz_(i) *= drowG(i);
        }
        A_ = drowA.asDiagonal() * A_ * dcol.asDiagonal();
        G_ = drowG.asDiagonal() * G_ * dcol.asDiagonal();
    }
    c_ = Dx_.cwiseProduct(c_);
    b_ = Ey_.cwiseProduct(b_);
    h_ = Fz_.cwiseProduct(h_);
    A_.makeCompressed();
    G_.makeCompressed();
}

void InteriorPoint::build_kkt()
{
    const Index dim = n_ + p_ + m_;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n_ + p_ + A_.nonZeros() + G_.nonZeros() + 4 * m_));
    for (Index j = 0; j < n_; ++j)
    {
        t.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);
    }
    for (int k = 0; k < A_.outerSize(); ++k)
    {
        for (SparseMatrix::InnerIterator it(A_, k); it; ++it)
        {
            t.emplace_back(static_cast<int>(it.col()), static_cast<int>(n_ + it.row()), it.value());
        }
    }
    for (int k = 0; k < G_.outerSize(); ++k)
    {
        for (SparseMatrix::InnerIterator it(G_, k); it; ++it)
        {
            t.emplace_back(static_cast<int>(it.col()), static_cast<int>(n_ + p_ + it.row()), it.value());
        }
    }
    for (Index i = 0; i < p_; ++i)
    {
        t.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), 1.0);
    }
    for (const Block& blk : blocks_)
    {
        const Index base = n_ + p_ + blk.offset;
        if (blk.soc)
        {
            for (Index a = 0; a < blk.size; ++a)
            {
                for (Index b = a; b < blk.size; ++b)
                {
                    t.emplace_back(static_cast<int>(base + a), static_cast<int>(base + b), 1.0);
                }
            }
        }
        else
        {
            for (Index a = 0; a < blk.size; ++a)
            {
                t.emplace_back(static_cast<int>(base + a), static_cast<int>(base + a), 1.0);
            }
        }
    }
    K_.resize(dim, dim);
    // Duplicates are summed; only structural positions matter here, values are reset below.
    K_.setFromTriplets(t.begin(), t.end(), [](double, double b) { return b; });
    K_.makeCompressed();

    auto value_index = [&](Index row, Index col) {
        const int* outer = K_.outerIndexPtr();
        const int* inner = K_.innerIndexPtr();
        const int* first = inner + outer[col];
        const int* last = inner + outer[col + 1];
        const int* pos = std::lower_bound(first, last, static_cast<int>(row));
        return static_cast<Index>(pos - inner);
    };
    // Reset the A/G values (setFromTriplets may have merged nothing, but be exact).
    for (int k = 0; k < A_.outerSize(); ++k)
    {
        for (SparseMatrix::InnerIterator it(A_, k); it; ++it)
        {
            K_.valuePtr()[value_index(it.col(), n_ + it.row())] = it.value();
        }
    }
    for (int k = 0; k < G_.outerSize(); ++k)
    {
        for (SparseMatrix::InnerIterator it(G_, k); it; ++it)
        {
            K_.valuePtr()[value_index(it.col(), n_ + p_ + it.row())] = it.value();
        }
    }
    diag_x_.resize(static_cast<std::size_t>(n_));
    for (Index j = 0; j < n_; ++j)
    {
        diag_x_[static_cast<std::size_t>(j)] = value_index(j, j);
        K_.valuePtr()[diag_x_[static_cast<std::size_t>(j)]] = delta_;
    }
    diag_y_.resize(static_cast<std::size_t>(p_));
    for (Index i = 0; i < p_; ++i)
    {
        diag_y_[static_cast<std::size_t>(i)] = value_index(n_ + i, n_ + i);
        K_.valuePtr()[diag_y_[static_cast<std::size_t>(i)]] = -delta_;
    }
    cone_entries_.assign(blocks_.size(), {});
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
    {
        const Block& blk = blocks_[bi];
        const Index base = n_ + p_ + blk.offset;
        auto& idx = cone_entries_[bi];
        if (blk.soc)
        {
            for (Index b = 0; b < blk.size; ++b)
            {
                for (Index a = 0; a <= b; ++a)
                {
                    idx.push_back(value_index(base + a, base + b));
                }
            }
        }
        else
        {
            for (Index a = 0; a < blk.size; ++a)
            {
                idx.push_back(value_index(base + a, base + a));
            }
        }
    }
    update_kkt_cone_block(true);
    ldlt_.analyzePattern(K_);
}

void InteriorPoint::update_kkt_cone_block(bool identity)
{
    kkt_identity_ = identity;
    double* val = K_.valuePtr();
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
    {
        const Block& blk = blocks_[bi];
        const auto& idx = cone_entries_[bi];
        if (!blk.soc)
        {
            for (Index a = 0; a < blk.size; ++a)
            {
                const double w2 = identity ? 1.0 : scal_[bi].w(a) * scal_[bi].w(a);
                val[idx[static_cast<std::size_t>(a)]] = -w2 - delta_;
            }
            continue;
        }
        // W^2 = eta^2 (2 wbar wbar' - J)
        std::size_t q = 0;
        for (Index b = 0; b < blk.size; ++b)
        {
            for (Index a = 0; a <= b; ++a)
            {
                double v;
                if (identity)
                {
                    v = a == b ? 1.0 : 0.0;
                }
                else
                {
                    const Scaling& sc = scal_[bi];
                    const double e2 = sc.eta * sc.eta;
                    double J = 0.0;
                    if (a == b)
                    {
                        J = a == 0 ? 1.0 : -1.0;
                    }
                    v = e2 * (2.0 * sc.wbar(a) * sc.wbar(b) - J);
                }
                val[idx[q++]] = -v - (a == b ? delta_ : 0.0);
            }
        }
    }
}

void InteriorPoint::set_regularization(double delta)
{
    delta_ = delta;
    double* val = K_.valuePtr();
    for (const Index i : diag_x_)
    {
        val[i] = delta_;
    }
    for (const Index i : diag_y_)
    {
        val[i] = -delta_;
    }
    update_kkt_cone_block(kkt_identity_);
}

/// The regularized KKT matrix is quasidefinite: n positive pivots, then p + m negative ones.
bool InteriorPoint::inertia_ok() const
{
    const VectorXd& D = ldlt_.vectorD();
    const auto& perm = ldlt_.permutationP().indices();
    for (Index j = 0; j < D.size(); ++j)
    {
        const double d = D(perm(j));
        if (!std::isfinite(d) || (j < n_ ? d <= 0.0 : d >= 0.0))
        {
            return false;
        }
    }
    return true;
}

/// Factors K, raising the static regularization until the pivots have the right signs.
bool InteriorPoint::factor()
{
    if (delta_ != kBaseDelta)
    {
        set_regularization(kBaseDelta);
    }
    for (;;)
    {
        ldlt_.factorize(K_);
        if (ldlt_.info() == Eigen::Success && inertia_ok())
        {
            return true;
        }
        if (delta_ * 100.0 > kMaxDelta)
        {
            return false;
        }
        if (opts_.verbose)
        {
            std::fprintf(stderr, "      raising regularization to %.1e\n", delta_ * 100.0);
        }
        set_regularization(delta_ * 100.0);
    }
}

void InteriorPoint::kkt_multiply(const VectorXd& dx, const VectorXd& dy, const VectorXd& dz, VectorXd& out) const
{
    out.resize(n_ + p_ + m_);
    out.head(n_) = Gt_ * dz;
    if (p_ > 0)
    {
        out.head(n_) += At_ * dy;
        out.segment(n_, p_) = A_ * dx;
    }
    VectorXd w2dz;
    scale_W2(dz, w2dz);
    out.tail(m_) = G_ * dx - w2dz;
}

void InteriorPoint::solve_kkt(const VectorXd& rhs, VectorXd& dx, VectorXd& dy, VectorXd& dz)
{
    VectorXd sol = ldlt_.solve(rhs);
    VectorXd res(rhs.size());
    const double rhs_norm = rhs.lpNorm<Eigen::Infinity>();
    VectorXd best = sol;
    double best_err = std::numeric_limits<double>::infinity();
    const int max_refine = delta_ > kBaseDelta ? 20 : 8;
    for (int it = 0; it <= max_refine; ++it)
    {
        dx = sol.head(n_);
        dy = sol.segment(n_, p_);
        dz = sol.tail(m_);
        kkt_multiply(dx, dy, dz, res);
        res = rhs - res;
        const double err = res.lpNorm<Eigen::Infinity>();
        if (err < best_err)
        {
            const bool stalled = err >= 0.5 * best_err;
            best_err = err;
            best = sol;
            if (stalled)
            {
                break;
            }
        }
        else
        {
            break;
        }
        if (err <= 1e-14 * (1.0 + rhs_norm) || it == max_refine)
        {
            break;
        }
        sol += ldlt_.solve(res);
    }
    sol = best;
    dx = sol.head(n_);
    dy = sol.segment(n_, p_);
    dz = sol.tail(m_);
    if (opts_.verbose)
    {
        kkt_multiply(dx, dy, dz, res);
        std::fprintf(stderr, "      kkt residual %.3e rhs %.3e\n", (rhs - res).lpNorm<Eigen::Infinity>(), rhs_norm);
    }
}

bool InteriorPoint::update_scalings()
{
    lambda_.resize(m_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
    {
        const Block& blk = blocks_[bi];
        Scaling& sc = scal_[bi];
        const auto s = s_.segment(blk.offset, blk.size);
        const auto z = z_.segment(blk.offset, blk.size);
        if (!blk.soc)
        {
            if ((s.array() <= 0.0).any() || (z.array() <= 0.0).any())
            {
                return false;
            }
            sc.w = (s.array() / z.array()).sqrt();
            lambda_.segment(blk.offset, blk.size) = (s.array() * z.array()).sqrt();
            continue;
        }
        const double js = soc_jnorm2(s);
        const double jz = soc_jnorm2(z);
        if (!(js > 0.0) || !(jz > 0.0) || s(0) <= 0.0 || z(0) <= 0.0)
        {
            return false;
        }
        const VectorXd sbar = s / std::sqrt(js);
        const VectorXd zbar = z / std::sqrt(jz);
        const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
        VectorXd wbar(blk.size);
        wbar(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
        wbar.tail(blk.size - 1) = (sbar.tail(blk.size - 1) - zbar.tail(blk.size - 1)) / (2.0 * gamma);
        sc.wbar = wbar;
        sc.eta = std::pow(js / jz, 0.25);
    }
    scale_W(z_, lambda_);
    // LP entries were overwritten by scale_W with w .* z = sqrt(s z); identical, fine.
    return lambda_.allFinite();
}

void InteriorPoint::scale_W(const VectorXd& v, VectorXd& out) const
{
    out.resize(m_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
    {
        const Block& blk = blocks_[bi];
        const Scaling& sc = scal_[bi];
        const auto in = v.segment(blk.offset, blk.size);
        auto o = out.segment(blk.offset, blk.size);
        if (!blk.soc)
        {
            o = sc.w.cwiseProduct(in);
            continue;
        }
        const Index d = blk.size - 1;
        const double w0 = sc.wbar(0);
        const auto w1 = sc.wbar.tail(d);
        const double w1v1 = w1.dot(in.tail(d));
        const double o0 = w0 * in(0) + w1v1;
        o.tail(d) = sc.eta * (in(0) * w1 + in.tail(d) + (w1v1 / (1.0 + w0)) * w1);
        o(0) = sc.eta * o0;
    }
}

void InteriorPoint::scale_W2(const VectorXd& v, VectorXd& out) const
{
    out.resize(m_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
    {
        const Block& blk = blocks_[bi];
        const Scaling& sc = scal_[bi];
        const auto in = v.segment(blk.offset, blk.size);
        auto o = out.segment(blk.offset, blk.size);
        if (!blk.soc)
        {
            o = sc.w.cwiseProduct(sc.w).cwiseProduct(in);
            continue;
        }
        const double e2 = sc.eta * sc.eta;
        const double wv = sc.wbar.dot(in);
        o = 2.0 * wv * sc.wbar;
        o(0) -= in(0);
        o.tail(blk.size - 1) += in.tail(blk.size - 1);
        o *= e2;
    }
}

void InteriorPoint::jordan_product(const VectorXd& u, const VectorXd& v, VectorXd& out) const
{
    out.resize(m_);
    for (const Block& blk : blocks_)
    {
        const auto a = u.segment(blk.offset, blk.size);
        const auto b = v.segment(blk.offset, blk.size);
        auto o = out.segment(blk.offset, blk.size);
        if (!blk.soc)
        {
            o = a.cwiseProduct(b);
            continue;
        }
        const Index d = blk.size - 1;
        o(0) = a.dot(b);
        o.tail(d) = a(0) * b.tail(d) + b(0) * a.tail(d);
    }
}

void InteriorPoint::jordan_divide(const VectorXd& lam, const VectorXd& w, VectorXd& out) const
{
    // Solves lam o out = w.
    out.resize(m_);
    for (const Block& blk : blocks_)
    {
        const auto l = lam.segment(blk.offset, blk.size);
        const auto r = w.segment(blk.offset, blk.size);
        auto o = out.segment(blk.offset, blk.size);
        if (!blk.soc)
        {
            o = r.cwiseQuotient(l);
            continue;
        }
        const Index d = blk.size - 1;
        const double det = soc_jnorm2(l);
        const double l1r1 = l.tail(d).dot(r.tail(d));
        const double o0 = (l(0) * r(0) - l1r1) / det;
        o.tail(d) = (r.tail(d) - o0 * l.tail(d)) / l(0);
        o(0) = o0;
    }
}

double InteriorPoint::max_step(const VectorXd& dsW, const VectorXd& dzW, double dtau, double dkap) const
{
    double alpha = 1e30;
    for (const Block& blk : blocks_)
    {
        const auto l = lambda_.segment(blk.offset, blk.size);
        if (!blk.soc)
        {
            for (Index i = 0; i < blk.size; ++i)
            {
                const double li = l(i);
                const double a = dsW(blk.offset + i);
                const double b = dzW(blk.offset + i);
                if (a < 0.0)
                {
                    alpha = std::min(alpha, -li / a);
                }
                if (b < 0.0)
                {
                    alpha = std::min(alpha, -li / b);
                }
            }
            continue;
        }
        const Index d = blk.size - 1;
        const double lnorm = std::sqrt(soc_jnorm2(l));
        const VectorXd lbar = l / lnorm;
        for (const VectorXd* dirp : {&dsW, &dzW})
        {
            const auto dir = dirp->segment(blk.offset, blk.size);
            const double ld = lbar(0) * dir(0) - lbar.tail(d).dot(dir.tail(d));
            const double rho0 = ld / lnorm;
            const double factor = (ld + dir(0)) / (lbar(0) + 1.0);
            const double rho1norm = ((dir.tail(d) - factor * lbar.tail(d)) / lnorm).norm();
            const double t = rho1norm - rho0;
            if (t > 0.0)
            {
                alpha = std::min(alpha, 1.0 / t);
            }
        }
    }
    if (dtau < 0.0)
    {
        alpha = std::min(alpha, -tau_ / dtau);
    }
    if (dkap < 0.0)
    {
        alpha = std::min(alpha, -kappa_ / dkap);
    }
    return alpha;
}

void InteriorPoint::bring_to_cone(VectorXd& v) const
{
    double worst = -std::numeric_limits<double>::infinity();
    for (const Block& blk : blocks_)
    {
        const auto seg = v.segment(blk.offset, blk.size);
        if (!blk.soc)
        {
            worst = std::max(worst, -seg.minCoeff());
        }
        else
        {
            worst = std::max(worst, seg.tail(blk.size - 1).norm() - seg(0));
        }
    }
    if (worst < 0.0)
    {
        return;
    }
    const double shift = 1.0 + worst;
    for (const Block& blk : blocks_)
    {
        if (!blk.soc)
        {
            v.segment(blk.offset, blk.size).array() += shift;
        }
        else
        {
            v(blk.offset) += shift;
        }
    }
}

InteriorPoint::Metrics InteriorPoint::evaluate() const
{
    Metrics mt;
    // Original-space quantities: x = Dx xs/tau, nu = Ey y/tau, mu = Fz z/tau, s = s/(Fz tau).
    const VectorXd Ax = p_ > 0 ? VectorXd(A_ * x_) : VectorXd(0);
    const VectorXd Gx = G_ * x_;
    const VectorXd Aty = p_ > 0 ? VectorXd(At_ * y_) : VectorXd::Zero(n_);
    const VectorXd Gtz = Gt_ * z_;

    const VectorXd rp_eq = (Ax - tau_ * b_).cwiseQuotient(Ey_) / tau_;
    const VectorXd rp_cone = (Gx + s_ - tau_ * h_).cwiseQuotient(Fz_) / tau_;
    const VectorXd rd = (Aty + Gtz + tau_ * c_).cwiseQuotient(Dx_) / tau_;
    const double bnorm = b_.cwiseQuotient(Ey_).norm();
    const double hnorm = h_.cwiseQuotient(Fz_).norm();
    const double cnorm = c_.cwiseQuotient(Dx_).norm();
    mt.pres = std::max(p_ > 0 ? rp_eq.norm() / (1.0 + bnorm) : 0.0, m_ > 0 ? rp_cone.norm() / (1.0 + hnorm) : 0.0);
    mt.dres = rd.norm() / (1.0 + cnorm);

    const double cx = c_.dot(x_);
    const double by = p_ > 0 ? b_.dot(y_) : 0.0;
    const double hz = h_.dot(z_);
    mt.pcost = cx / tau_;
    mt.dcost = -(by + hz) / tau_;
    mt.gap = s_.dot(z_) / (tau_ * tau_);

    // Certificates (scale invariant).
    const double bt = by + hz;
    if (bt < 0.0)
    {
        const double res = (Aty + Gtz).cwiseQuotient(Dx_).norm();
        const double yz = std::sqrt(y_.cwiseProduct(Ey_).squaredNorm() + z_.cwiseProduct(Fz_).squaredNorm());
        mt.pinf = -bt > opts_.tol_feas * std::max(1.0, yz) * 1e-3 && res < opts_.tol_feas * (-bt);
    }
    if (cx < 0.0)
    {
        const double r1 = p_ > 0 ? Ax.cwiseQuotient(Ey_).norm() : 0.0;
        const double r2 = (Gx + s_).cwiseQuotient(Fz_).norm();
        const double xn = x_.cwiseProduct(Dx_).norm();
        mt.dinf = -cx > opts_.tol_feas * std::max(1.0, xn) * 1e-3 && std::max(r1, r2) < opts_.tol_feas * (-cx);
    }
    return mt;
}

void InteriorPoint::unscale_into(ConicSolution& sol, double scale_x, double scale_yz) const
{
    sol.z = Dx_.cwiseProduct(x_) * scale_x;
    VectorXd s_work = s_.cwiseQuotient(Fz_) * scale_x;
    VectorXd mu_work = z_.cwiseProduct(Fz_) * scale_yz;
    VectorXd y_work = p_ > 0 ? VectorXd(y_.cwiseProduct(Ey_) * scale_yz) : VectorXd(0);

    sol.nu = y_work.head(p_orig_);
    const Index q = prog_.G.rows();
    sol.s = VectorXd::Zero(q);
    sol.mu = VectorXd::Zero(q);
    for (std::size_t i = 0; i < g_row_of_work_row_.size(); ++i)
    {
        sol.s(g_row_of_work_row_[i]) = s_work(static_cast<Index>(i));
        sol.mu(g_row_of_work_row_[i]) = mu_work(static_cast<Index>(i));
    }
    for (std::size_t i = 0; i < eq_from_zero_cone_.size(); ++i)
    {
        // Zero-cone row G z + s = h with s = 0 is the equality (-G) z = -h ... expressed here as G z = h,
        // whose Lagrangian term nu (G z - h) matches mu (G z - h).
        sol.mu(eq_from_zero_cone_[i]) = y_work(p_orig_ + static_cast<Index>(i));
    }
}

ConicSolution InteriorPoint::run()
{
    ConicSolution sol;
    if (n_ == 0)
    {
        throw InvalidInput("ConicProgram: no variables");
    }
    build_kkt();
    if (!factor())
    {
        sol.status = ConicStatus::NumericalFailure;
        sol.diagnostics = "initial KKT factorization failed";
        return sol;
    }

    // Primal start: min ||s|| s.t. Ax = b, Gx + s = h.
    VectorXd rhs = VectorXd::Zero(n_ + p_ + m_);
    rhs.segment(n_, p_) = b_;
    rhs.tail(m_) = h_;
    VectorXd dx, dy, dz;
    // Identity scaling for the initial solves.
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
    {
        const Block& blk = blocks_[bi];
        if (blk.soc)
        {
            scal_[bi].eta = 1.0;
            scal_[bi].wbar = VectorXd::Zero(blk.size);
            scal_[bi].wbar(0) = 1.0;
        }
        else
        {
            scal_[bi].w = VectorXd::Ones(blk.size);
        }
    }
    solve_kkt(rhs, dx, dy, dz);
    x_ = dx;
    s_ = -dz;
    bring_to_cone(s_);

    rhs.setZero();
    rhs.head(n_) = -c_;
    solve_kkt(rhs, dx, dy, dz);
    y_ = dy;
    z_ = dz;
    bring_to_cone(z_);
    tau_ = 1.0;
    kappa_ = 1.0;

    VectorXd rhs1(n_ + p_ + m_);
    rhs1.head(n_) = -c_;
    rhs1.segment(n_, p_) = b_;
    rhs1.tail(m_) = h_;

    VectorXd x1, y1, z1, x2, y2, z2;
    VectorXd rx, ry, rz, tmp, tmp2, dsW, dzW, ds_target, lam_div;

    struct Snapshot
    {
        VectorXd x, y, z, s;
        double tau, kappa;
        Metrics mt;
        int iter;
    };
    std::optional<Snapshot> best_iter;
    double best_score = std::numeric_limits<double>::infinity();
    int iter = 0;
    std::string failure;
    for (; iter <= opts_.max_iters; ++iter)
    {
        const Metrics mt = evaluate();
        sol.primal_residual = mt.pres;
        sol.dual_residual = mt.dres;
        sol.gap = mt.gap;
        sol.objective = mt.pcost;
        sol.dual_objective = mt.dcost;
        if (opts_.verbose)
        {
            std::fprintf(stderr, "%3d pcost % .6e dcost % .6e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                         iter, mt.pcost, mt.dcost, mt.gap, mt.pres, mt.dres, tau_, kappa_);
        }
        const double rel_gap = mt.gap / std::max(1e-300, std::min(std::abs(mt.pcost), std::abs(mt.dcost)));
        if (mt.pres <= opts_.tol_feas && mt.dres <= opts_.tol_feas &&
            (mt.gap <= opts_.tol_gap || rel_gap <= opts_.tol_gap))
        {
            sol.status = ConicStatus::Optimal;
            sol.iterations = iter;
            unscale_into(sol, 1.0 / tau_, 1.0 / tau_);
            return sol;
        }
        if (mt.pres <= opts_.tol_reduced && mt.dres <= opts_.tol_reduced &&
            (mt.gap <= opts_.tol_reduced || rel_gap <= opts_.tol_reduced))
        {
            const double score = std::max({mt.pres, mt.dres, std::min(mt.gap, rel_gap)});
            if (!best_iter.has_value() || score < best_score)
            {
                best_iter = Snapshot{x_, y_, z_, s_, tau_, kappa_, mt, iter};
                best_score = score;
            }
        }
        if (mt.pinf)
        {
            const double bt = -((p_ > 0 ? b_.dot(y_) : 0.0) + h_.dot(z_));
            sol.status = ConicStatus::PrimalInfeasible;
            sol.iterations = iter;
            unscale_into(sol, 0.0, 1.0 / bt);
            sol.z = VectorXd::Zero(n_);
            sol.diagnostics = "primal infeasibility certificate found";
            return sol;
        }
        if (mt.dinf)
        {
            const double cx = -c_.dot(x_);
            sol.status = ConicStatus::DualInfeasible;
            sol.iterations = iter;
            unscale_into(sol, 1.0 / cx, 0.0);
            sol.diagnostics = "dual infeasibility certificate found";
            return sol;
        }
        if (iter == opts_.max_iters)
        {
            failure = "iteration limit reached";
            break;
        }

        // Residuals (ECOS sign convention).
        rx = -Gt_ * z_ - tau_ * c_;
        if (p_ > 0)
        {
            rx -= At_ * y_;
            ry = A_ * x_ - tau_ * b_;
        }
        else
        {
            ry.resize(0);
        }
        rz = s_ + G_ * x_ - tau_ * h_;
        const double rt = kappa_ + c_.dot(x_) + (p_ > 0 ? b_.dot(y_) : 0.0) + h_.dot(z_);

        if (!update_scalings())
        {
            failure = "iterate left the cone interior";
            break;
        }
        update_kkt_cone_block(false);
        if (!factor())
        {
            failure = "KKT factorization failed";
            break;
        }
        solve_kkt(rhs1, x1, y1, z1);
        const double denom = kappa_ / tau_ - c_.dot(x1) - (p_ > 0 ? b_.dot(y1) : 0.0) - h_.dot(z1);

        const double mu = (s_.dot(z_) + tau_ * kappa_) / (degree_ + 1);

        // Affine (predictor) direction.
        VectorXd rhs2(n_ + p_ + m_);
        rhs2.head(n_) = rx;
        rhs2.segment(n_, p_) = -ry;
        rhs2.tail(m_) = -rz + s_;
        solve_kkt(rhs2, x2, y2, z2);
        const double dtau_aff =
            (rt - kappa_ + c_.dot(x2) + (p_ > 0 ? b_.dot(y2) : 0.0) + h_.dot(z2)) / denom;
        VectorXd dz_aff = z2 + dtau_aff * z1;
        scale_W(dz_aff, dzW);
        dsW = -dzW - lambda_;
        const double dkap_aff = -kappa_ - (kappa_ / tau_) * dtau_aff;
        const double alpha_aff = std::min(1.0, max_step(dsW, dzW, dtau_aff, dkap_aff));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 1e-4, 1.0);

        // Combined direction.
        jordan_product(lambda_, lambda_, ds_target);
        jordan_product(dsW, dzW, tmp);
        ds_target += tmp;
        for (const Block& blk : blocks_)
        {
            if (blk.soc)
            {
                ds_target(blk.offset) -= sigma * mu;
            }
            else
            {
                ds_target.segment(blk.offset, blk.size).array() -= sigma * mu;
            }
        }
        // ds_target now holds  lambda o lambda + (W^-1 ds_a) o (W dz_a) - sigma mu e  (negated target).
        jordan_divide(lambda_, ds_target, lam_div);
        scale_W(lam_div, tmp2);
        rhs2.head(n_) = (1.0 - sigma) * rx;
        rhs2.segment(n_, p_) = -(1.0 - sigma) * ry;
        rhs2.tail(m_) = -(1.0 - sigma) * rz + tmp2;
        solve_kkt(rhs2, x2, y2, z2);
        const double bkap = kappa_ * tau_ + dkap_aff * dtau_aff - sigma * mu;
        const double dtau =
            ((1.0 - sigma) * rt - bkap / tau_ + c_.dot(x2) + (p_ > 0 ? b_.dot(y2) : 0.0) + h_.dot(z2)) / denom;
        const VectorXd dxv = x2 + dtau * x1;
        const VectorXd dyv = y2 + dtau * y1;
        const VectorXd dzv = z2 + dtau * z1;
        scale_W(dzv, dzW);
        dsW = -(lam_div + dzW);
        const double dkap = -(bkap + kappa_ * dtau) / tau_;
        const double alpha = std::min(1.0, 0.99 * max_step(dsW, dzW, dtau, dkap));
        if (opts_.verbose)
        {
            std::fprintf(stderr, "    alpha %.3e aff %.3e sigma %.3e dtau %.3e finite %d %d %d\n", alpha, alpha_aff, sigma,
                         dtau, int(dxv.allFinite()), int(dzW.allFinite()), int(dsW.allFinite()));
        }
        if (!(alpha > 1e-10) || !dxv.allFinite() || !std::isfinite(dtau))
        {
            failure = "step length collapsed";
            break;
        }
        VectorXd dsv;
        scale_W(dsW, dsv);
        x_ += alpha * dxv;
        if (p_ > 0)
        {
            y_ += alpha * dyv;
        }
        z_ += alpha * dzv;
        s_ += alpha * dsv;
        tau_ += alpha * dtau;
        kappa_ += alpha * dkap;
        // Renormalize the homogeneous iterate to keep magnitudes bounded.
        const double scale = std::max(tau_, kappa_);
        if (scale > 1e6 || scale < 1e-6)
        {
            x_ /= scale;
            y_ /= scale;
            z_ /= scale;
            s_ /= scale;
            tau_ /= scale;
            kappa_ /= scale;
        }
    }
    if (best_iter.has_value())
    {
        x_ = best_iter->x;
        y_ = best_iter->y;
        z_ = best_iter->z;
        s_ = best_iter->s;
        tau_ = best_iter->tau;
        kappa_ = best_iter->kappa;
        sol.status = ConicStatus::Optimal;
        sol.reduced_accuracy = true;
        sol.iterations = iter;
        sol.primal_residual = best_iter->mt.pres;
        sol.dual_residual = best_iter->mt.dres;
        sol.gap = best_iter->mt.gap;
        sol.objective = best_iter->mt.pcost;
        sol.dual_objective = best_iter->mt.dcost;
        unscale_into(sol, 1.0 / tau_, 1.0 / tau_);
        sol.diagnostics = "reduced accuracy: " + failure + " at iteration " + std::to_string(iter) +
                          ", returning iterate " + std::to_string(best_iter->iter);
        return sol;
    }
    sol.status = ConicStatus::NumericalFailure;
    sol.iterations = iter;
    if (tau_ > 0.0)
    {
        unscale_into(sol, 1.0 / tau_, 1.0 / tau_);
    }
    std::ostringstream os;
    os << failure << " after " << iter << " iterations; pres=" << sol.primal_residual
       << " dres=" << sol.dual_residual << " gap=" << sol.gap << " tau=" << tau_ << " kappa=" << kappa_;
    sol.diagnostics = os.str();
    return sol;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts)
{
    InteriorPoint ipm(prog, opts);
    return ipm.run();
}

void write_triplets(const ConicProgram& prog, std::ostream& out)
{
    prog.validate();
    const auto old_precision = out.precision();
    out << std::setprecision(17);
    out << "conic-program v1\n";
    out << "variables " << prog.variables() << " equalities " << prog.equalities() << " cone_rows "
        << prog.cone_rows() << "\n";
    out << "cones " << prog.cones.size();
    for (const Cone& k : prog.cones)
    {
        const char* kind = k.kind == Cone::Kind::Zero ? "zero" : k.kind == Cone::Kind::Nonnegative ? "nonneg" : "soc";
        out << ' ' << kind << ':' << k.size;
    }
    out << "\n";
    auto dense = [&](const char* tag, const Eigen::VectorXd& v) {
        out << tag << ' ' << (v.array() != 0.0).count() << "\n";
        for (Eigen::Index i = 0; i < v.size(); ++i)
        {
            if (v(i) != 0.0)
            {
                out << i << ' ' << v(i) << "\n";
            }
        }
    };
    auto sparse = [&](const char* tag, const SparseMatrix& M) {
        // Row-major ordering for a stable, diff-friendly dump.
        Eigen::SparseMatrix<double, Eigen::RowMajor> R = M;
        out << tag << ' ' << R.nonZeros() << "\n";
        for (int r = 0; r < R.outerSize(); ++r)
        {
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(R, r); it; ++it)
            {
                out << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
            }
        }
    };
    dense("c", prog.c);
    sparse("Aeq", prog.Aeq);
    dense("beq", prog.beq);
    sparse("G", prog.G);
    dense("h", prog.h);
    out.precision(old_precision);
}

}  // namespace lcvx
