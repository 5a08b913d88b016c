#include "jumpstab/cost.hpp"

#include <cmath>
#include <limits>

#include "jumpstab/error.hpp"

namespace jumpstab {

double running_cost(const CostWeights& w, int i, int k, const Vector& x, const Vector& u) {
    return linalg::bilinear_form(w.M_at(i, k), x, x) + linalg::bilinear_form(w.D_at(i, k), u, u);
}

namespace {

struct PathCost {
    double total = 0.0;
    double prev_decade = 0.0;  // integral over [0.8T, 0.9T)
    double last_decade = 0.0;  // integral over [0.9T, T]
    bool diverged = false;
    double diverged_at = 0.0;
};

class CostObserver final : public PathObserver {
public:
    CostObserver(const CostWeights& w, const FeedbackLaw& law, double T, PathCost& out)
        : w_(w), law_(law), T_(T), out_(out) {}

    void on_start(double, const Vector&, const Vector&, int, int, int) override {}

    void on_step(const StepRecord& s) override {
        const double h = s.t1 - s.t0;
        const double left = running_cost(w_, s.regime, s.interval, s.x_start, s.u);
        u_pre_.resize(s.u.size());
        linalg::gemv_small(u_pre_, law_.at(s.regime, s.interval), s.x_end_pre, -1.0, false);
        const double right = running_cost(w_, s.regime, s.interval, s.x_end_pre, u_pre_);
        const double piece = 0.5 * h * (left + right);
        out_.total += piece;
        const double mid = 0.5 * (s.t0 + s.t1);
        if (mid >= 0.9 * T_)
            out_.last_decade += piece;
        else if (mid >= 0.8 * T_)
            out_.prev_decade += piece;
    }

private:
    const CostWeights& w_;
    const FeedbackLaw& law_;
    double T_;
    PathCost& out_;
    Vector u_pre_;
};

PathCost path_cost(const RegimeSystem& sys, const CostWeights& w, const FeedbackLaw& law,
                   const Vector& x0, int y0, double T, double dt, const SeededStream& stream,
                   const SimulationOptions& sim) {
    PathCost pc;
    CostObserver obs(w, law, T, pc);
    PathStart start;
    start.x0 = x0;
    start.regime = y0;
    start.eta = sys.det_switch.h0;
    start.interval = sys.det_switch.interval_at(0.0);
    try {
        integrate_path(sys, law, start, T, dt, stream, obs, sim);
    } catch (const DivergenceError& e) {
        pc.diverged = true;
        pc.diverged_at = e.time();
    }
    return pc;
}

void check_inputs(const RegimeSystem& sys, const Vector& x0, int y0, double T, double dt,
                  int n_paths) {
    if (!(T > 0.0) || !(dt > 0.0)) throw Error("estimate_cost: T and dt must be positive");
    if (n_paths < 2) throw Error("estimate_cost: need at least 2 paths");
    if (x0.size() != sys.m) throw DimensionError("x0", "expected length " + std::to_string(sys.m));
    if (y0 < 0 || y0 >= sys.regime_count()) throw DimensionError("y0", "regime out of range");
}

double tail_from_decades(double prev, double last) {
    if (last == 0.0) return 0.0;
    if (!(prev > last)) return std::numeric_limits<double>::infinity();
    // W ~ exp(-lambda t): int_T^inf = last / (exp(lambda T / 10) - 1).
    return last / (prev / last - 1.0);
}

// Refuses to aggregate when too many paths diverged.
std::vector<std::size_t> surviving(const std::vector<PathCost>& pcs, double max_fraction,
                                   int& n_diverged) {
    std::vector<std::size_t> keep;
    n_diverged = 0;
    long first = -1;
    for (std::size_t p = 0; p < pcs.size(); ++p) {
        if (pcs[p].diverged) {
            if (first < 0) first = static_cast<long>(p);
            ++n_diverged;
        } else {
            keep.push_back(p);
        }
    }
    if (n_diverged > max_fraction * static_cast<double>(pcs.size()))
        throw DivergenceError(pcs[static_cast<std::size_t>(first)].diverged_at, first);
    return keep;
}

CostEstimate aggregate(const std::vector<PathCost>& pcs, const std::vector<std::size_t>& keep,
                       double T, double dt, int n_diverged) {
    std::vector<double> tot, prev, last;
    for (auto p : keep) {
        tot.push_back(pcs[p].total);
        prev.push_back(pcs[p].prev_decade);
        last.push_back(pcs[p].last_decade);
    }
    CostEstimate est;
    const auto ms = linalg::mean_and_std_error(tot);
    est.mean = ms.mean;
    est.std_error = ms.std_error;
    est.n_paths = static_cast<int>(keep.size());
    est.n_diverged = n_diverged;
    est.T = T;
    est.dt = dt;
    const double n = static_cast<double>(keep.size());
    est.tail_estimate = tail_from_decades(linalg::pairwise_sum(prev) / n,
                                          linalg::pairwise_sum(last) / n);
    return est;
}

}  // namespace

CostEstimate estimate_cost(const RegimeSystem& sys, const CostWeights& w, const FeedbackLaw& law,
                           const Vector& x0, int y0, double T, double dt, int n_paths,
                           std::uint64_t root_seed, const CostOptions& opts) {
    check_inputs(sys, x0, y0, T, dt, n_paths);
    std::vector<PathCost> pcs(static_cast<std::size_t>(n_paths));
    parallel_for(n_paths, opts.threads, [&](int p) {
        pcs[static_cast<std::size_t>(p)] =
            path_cost(sys, w, law, x0, y0, T, dt,
                      SeededStream(root_seed, static_cast<std::uint64_t>(p)), opts.sim);
    });
    int n_div = 0;
    const auto keep = surviving(pcs, opts.max_divergent_fraction, n_div);
    if (keep.size() < 2) throw Error("estimate_cost: fewer than 2 paths survived");
    return aggregate(pcs, keep, T, dt, n_div);
}

CostComparison compare_costs(const RegimeSystem& sys, const CostWeights& w,
                             const FeedbackLaw& law_a, const FeedbackLaw& law_b, const Vector& x0,
                             int y0, double T, double dt, int n_paths, std::uint64_t root_seed,
                             const CostOptions& opts) {
    check_inputs(sys, x0, y0, T, dt, n_paths);
    const auto n = static_cast<std::size_t>(n_paths);
    std::vector<PathCost> pa(n), pb(n);
    parallel_for(n_paths, opts.threads, [&](int p) {
        const SeededStream stream(root_seed, static_cast<std::uint64_t>(p));
        pa[static_cast<std::size_t>(p)] = path_cost(sys, w, law_a, x0, y0, T, dt, stream, opts.sim);
        pb[static_cast<std::size_t>(p)] = path_cost(sys, w, law_b, x0, y0, T, dt, stream, opts.sim);
    });
    // A pair is dropped when either member diverged.
    std::vector<PathCost> joint(n);
    for (std::size_t p = 0; p < n; ++p) {
        joint[p].diverged = pa[p].diverged || pb[p].diverged;
        joint[p].diverged_at = pa[p].diverged ? pa[p].diverged_at : pb[p].diverged_at;
    }
    int n_div = 0;
    const auto keep = surviving(joint, opts.max_divergent_fraction, n_div);
    if (keep.size() < 2) throw Error("compare_costs: fewer than 2 path pairs survived");

    CostComparison cmp;
    cmp.a = aggregate(pa, keep, T, dt, n_div);
    cmp.b = aggregate(pb, keep, T, dt, n_div);
    std::vector<double> diff;
    diff.reserve(keep.size());
    for (auto p : keep) diff.push_back(pa[p].total - pb[p].total);
    const auto ms = linalg::mean_and_std_error(diff);
    cmp.diff_mean = ms.mean;
    cmp.diff_std_error = ms.std_error;
    cmp.ci_low = ms.mean - 1.96 * ms.std_error;
    cmp.ci_high = ms.mean + 1.96 * ms.std_error;
    return cmp;
}

}  // namespace jumpstab
