#include "lcvx/micp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <queue>
#include <set>

#include "lcvx/error.hpp"

namespace lcvx
{

std::string to_string(BnbStatus s)
{
    switch (s)
    {
    case BnbStatus::Optimal:
        return "optimal";
    case BnbStatus::NodeLimit:
        return "node-limit";
    case BnbStatus::Infeasible:
        return "infeasible";
    }
    return "unknown";
}

int env_threads()
{
    if (const char* v = std::getenv("LCVX_THREADS"))
    {
        const int t = std::atoi(v);
        if (t > 0)
        {
            return t;
        }
    }
    return 1;
}

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluated
{
    bool feasible{false};
    double objective{kInf};
    FixedTfResult result;
};

struct NodeOrder
{
    bool operator()(const BnbNode& a, const BnbNode& b) const
    {
        if (a.bound != b.bound)
        {
            return a.bound > b.bound;
        }
        if (a.depth != b.depth)
        {
            return a.depth < b.depth;
        }
        return a.id > b.id;
    }
};

class BranchAndBound
{
public:
    BranchAndBound(const ProblemSpec& spec, double tf, int N, const BnbOptions& opts)
        : spec_(spec), tf_(tf), N_(N), opts_(opts), threads_(opts.threads > 0 ? opts.threads : env_threads())
    {
    }

    BnbResult run();

private:
    Evaluated evaluate(const std::vector<GammaPin>& pins) const;
    std::vector<Evaluated> evaluate_all(const std::vector<std::vector<GammaPin>>& batch) const;
    bool problem1_feasible(const Solution& s) const;
    std::vector<GammaPin> rounded(const Solution& s) const;
    bool near_binary(const Solution& s) const;
    void offer_incumbent(Evaluated&& e);
    double cutoff() const
    {
        if (!std::isfinite(incumbent_))
        {
            return kInf;
        }
        return incumbent_ - opts_.gap_tol * std::max(1.0, std::abs(incumbent_));
    }

    const ProblemSpec& spec_;
    double tf_;
    int N_;
    BnbOptions opts_;
    int threads_;
    double incumbent_{kInf};
    double pruned_bound_{kInf};
    std::optional<Solution> best_;
    std::set<std::vector<char>> tried_;
    BnbStats stats_;
};

Evaluated BranchAndBound::evaluate(const std::vector<GammaPin>& pins) const
{
    SolveOptions so;
    so.conic = opts_.conic;
    so.transcription.ray_lower_bound = true;
    so.transcription.pins = pins;
    Evaluated e;
    try
    {
        e.result = solve_fixed_tf(spec_, tf_, N_, so);
    }
    catch (const SolverFailure&)
    {
        // Treated as an unresolved node: pruned without bound information.
        return e;
    }
    if (e.result.feasible)
    {
        e.feasible = true;
        e.objective = e.result.conic.objective;
    }
    return e;
}

std::vector<Evaluated> BranchAndBound::evaluate_all(const std::vector<std::vector<GammaPin>>& batch) const
{
    std::vector<Evaluated> out(batch.size());
    if (threads_ <= 1 || batch.size() <= 1)
    {
        for (std::size_t j = 0; j < batch.size(); ++j)
        {
            out[j] = evaluate(batch[j]);
        }
        return out;
    }
    std::vector<std::future<Evaluated>> futures;
    for (std::size_t j = 0; j < batch.size(); ++j)
    {
        futures.push_back(std::async(std::launch::async, [this, &batch, j] { return evaluate(batch[j]); }));
    }
    for (std::size_t j = 0; j < batch.size(); ++j)
    {
        out[j] = futures[j].get();
    }
    return out;
}

bool BranchAndBound::near_binary(const Solution& s) const
{
    const Eigen::ArrayXXd g = s.gamma.array();
    return (g.min((1.0 - g).abs()).abs() <= opts_.tol_bin).all();
}

bool BranchAndBound::problem1_feasible(const Solution& s) const
{
    const Eigen::MatrixXd norms = s.input_norms();
    const double tol = 1e-6 * spec_.rho2 + 1e-4 * spec_.rho1;
    for (int k = 0; k < s.N; ++k)
    {
        for (int i = 0; i < s.inputs(); ++i)
        {
            const double g = s.gamma(k, i);
            const double un = norms(k, i);
            const bool on = g > 0.5;
            if (on ? (un < spec_.rho1 - tol || un > spec_.rho2 + tol) : un > tol)
            {
                return false;
            }
        }
    }
    return true;
}

std::vector<GammaPin> BranchAndBound::rounded(const Solution& s) const
{
    std::vector<GammaPin> pins;
    const int M = s.inputs();
    for (int k = 0; k < s.N; ++k)
    {
        std::vector<int> order(static_cast<std::size_t>(M));
        for (int i = 0; i < M; ++i)
        {
            order[static_cast<std::size_t>(i)] = i;
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return s.gamma(k, a) > s.gamma(k, b); });
        int taken = 0;
        std::vector<double> value(static_cast<std::size_t>(M), 0.0);
        for (int i : order)
        {
            if (s.gamma(k, i) >= 0.5 && taken < spec_.K)
            {
                value[static_cast<std::size_t>(i)] = 1.0;
                ++taken;
            }
        }
        for (int i = 0; i < M; ++i)
        {
            pins.push_back({k, i, value[static_cast<std::size_t>(i)]});
        }
    }
    return pins;
}

void BranchAndBound::offer_incumbent(Evaluated&& e)
{
    if (!e.feasible || !(e.objective < incumbent_))
    {
        return;
    }
    if (!problem1_feasible(*e.result.solution))
    {
        return;
    }
    incumbent_ = e.objective;
    best_ = std::move(e.result.solution);
}

BnbResult BranchAndBound::run()
{
    const auto start = std::chrono::steady_clock::now();
    BnbResult res;
    std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;
    long next_id = 0;
    bool limit_hit = false;

    // Evaluates a relaxation, tries its rounding, and queues it when it may still improve.
    auto process = [&](BnbNode node, Evaluated&& e, double parent_bound) {
        ++stats_.nodes_explored;
        if (!e.feasible)
        {
            ++stats_.nodes_pruned;
            return;
        }
        node.bound = e.objective;
        if (std::isfinite(parent_bound))
        {
            stats_.bound_pairs.emplace_back(parent_bound, node.bound);
        }
        stats_.max_depth = std::max(stats_.max_depth, node.depth);
        const Solution& s = *e.result.solution;
        const bool binary = near_binary(s);
        std::vector<GammaPin> pins = rounded(s);
        std::vector<char> key;
        key.reserve(pins.size());
        for (const auto& p : pins)
        {
            key.push_back(p.value > 0.5 ? 1 : 0);
        }
        if (node.bound < cutoff() && tried_.insert(key).second)
        {
            ++stats_.incumbent_solves;
            offer_incumbent(evaluate(pins));
        }
        if (binary || node.bound >= cutoff())
        {
            ++stats_.nodes_pruned;
            pruned_bound_ = std::min(pruned_bound_, node.bound);
            return;
        }
        open.push(std::move(node));
    };

    BnbNode root;
    root.id = next_id++;
    Evaluated root_eval = evaluate({});
    if (!root_eval.feasible)
    {
        ++stats_.nodes_explored;
        stats_.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.status = BnbStatus::Infeasible;
        res.stats = stats_;
        return res;
    }
    double global_bound = root_eval.objective;
    // Keep the relaxed solution of each open node for branching decisions.
    std::vector<std::optional<Eigen::MatrixXd>> gammas;
    auto remember = [&](const BnbNode& node, const Evaluated& e) {
        if (static_cast<long>(gammas.size()) <= node.id)
        {
            gammas.resize(static_cast<std::size_t>(node.id) + 1);
        }
        if (e.feasible)
        {
            gammas[static_cast<std::size_t>(node.id)] = e.result.solution->gamma;
        }
    };
    remember(root, root_eval);
    process(root, std::move(root_eval), -kInf);

    while (!open.empty())
    {
        BnbNode node = open.top();
        open.pop();
        global_bound = node.bound;
        if (node.bound >= cutoff())
        {
            ++stats_.nodes_pruned;
            pruned_bound_ = std::min(pruned_bound_, node.bound);
            continue;
        }
        if (stats_.nodes_explored >= opts_.node_limit)
        {
            limit_hit = true;
            open.push(node);
            break;
        }
        const Eigen::MatrixXd& g = *gammas[static_cast<std::size_t>(node.id)];
        int bk = -1;
        int bi = -1;
        double best_frac = -1.0;
        for (int k = 0; k < g.rows(); ++k)
        {
            for (int i = 0; i < g.cols(); ++i)
            {
                const double f = std::min(g(k, i), 1.0 - g(k, i));
                if (f > best_frac)
                {
                    best_frac = f;
                    bk = k;
                    bi = i;
                }
            }
        }
        gammas[static_cast<std::size_t>(node.id)].reset();
        int ones_at_k = 0;
        for (const auto& p : node.pins)
        {
            ones_at_k += (p.node == bk && p.value > 0.5) ? 1 : 0;
        }
        std::vector<BnbNode> children;
        for (const double v : {1.0, 0.0})
        {
            if (v > 0.5 && ones_at_k >= spec_.K)
            {
                continue;
            }
            BnbNode child;
            child.pins = node.pins;
            child.pins.push_back({bk, bi, v});
            child.depth = node.depth + 1;
            child.id = next_id++;
            children.push_back(std::move(child));
        }
        std::vector<std::vector<GammaPin>> batch;
        for (const auto& c : children)
        {
            batch.push_back(c.pins);
        }
        std::vector<Evaluated> evals = evaluate_all(batch);
        for (std::size_t j = 0; j < children.size(); ++j)
        {
            remember(children[j], evals[j]);
            process(std::move(children[j]), std::move(evals[j]), node.bound);
        }
    }
    global_bound = open.empty() ? pruned_bound_ : std::min(open.top().bound, pruned_bound_);

    stats_.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    stats_.incumbent = incumbent_;
    stats_.best_bound = std::isfinite(incumbent_) ? std::min(global_bound, incumbent_) : global_bound;
    stats_.gap = std::isfinite(incumbent_) ? (incumbent_ - stats_.best_bound) / std::max(1.0, std::abs(incumbent_))
                                           : kInf;
    if (!best_)
    {
        res.status = limit_hit ? BnbStatus::NodeLimit : BnbStatus::Infeasible;
    }
    else
    {
        res.status = limit_hit ? BnbStatus::NodeLimit : BnbStatus::Optimal;
        res.solution = std::move(best_);
    }
    stats_.certified = res.status == BnbStatus::Optimal;
    res.stats = stats_;
    return res;
}

}  // namespace

BnbResult solve_micp_bnb(const ProblemSpec& spec, double tf, int N, const BnbOptions& opts)
{
    spec.validate();
    if (opts.gap_tol < 0.0 || opts.node_limit < 1)
    {
        throw InvalidInput("solve_micp_bnb: gap_tol must be non-negative and node_limit positive");
    }
    BranchAndBound bb(spec, tf, N, opts);
    return bb.run();
}

}  // namespace lcvx
