#include "jumpstab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "jumpstab/control.hpp"
#include "jumpstab/error.hpp"

namespace jumpstab {

namespace {

class FinalState final : public PathObserver {
public:
    void on_start(double, const Vector& x, const Vector&, int regime, int, int interval) override {
        x_ = x;
        regime_ = regime;
        interval_ = interval;
    }
    void on_step(const StepRecord& s) override {
        x_ = s.x_end;
        regime_ = s.regime_end;
        interval_ = s.interval_end;
    }

    Vector x_;
    int regime_ = 0;
    int interval_ = 0;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Index of the grid point at time t; switch times are grid points exactly.
std::ptrdiff_t grid_index(const TrajectoryPath& p, double t) {
    const double tol = 1e-12 * std::max(1.0, std::abs(t));
    const auto it = std::lower_bound(p.time.begin(), p.time.end(), t - tol);
    if (it == p.time.end() || std::abs(*it - t) > tol) return -1;
    return it - p.time.begin();
}

}  // namespace

OperatorEstimate estimate_discrete_operator(const RegimeSystem& sys, const FeedbackLaw& law,
                                            const GainSet& G, int y, int h, const Vector& x,
                                            int k, double dt, int n_samples,
                                            std::uint64_t root_seed, int threads) {
    const auto& times = sys.det_switch.times;
    if (k < 0 || k >= static_cast<int>(times.size()))
        throw Error("estimate_discrete_operator: t_{k+1} must be a switch time");
    if (n_samples < 2) throw Error("estimate_discrete_operator: need at least 2 samples");
    if (x.size() != sys.m) throw DimensionError("x", "expected length " + std::to_string(sys.m));

    PathStart start;
    start.t0 = sys.det_switch.interval_start(k);
    start.x0 = x;
    start.regime = y;
    start.eta = h;
    start.interval = k;
    const double t_next = times[static_cast<std::size_t>(k)];
    const double v_k = lyapunov_value(G, y, k, x);

    std::vector<double> diff(static_cast<std::size_t>(n_samples));
    parallel_for(n_samples, threads, [&](int s) {
        FinalState fin;
        try {
            integrate_path(sys, law, start, t_next, dt,
                           SeededStream(root_seed, static_cast<std::uint64_t>(s)), fin);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.time(), s);
        }
        diff[static_cast<std::size_t>(s)] = lyapunov_value(G, fin.regime_, k + 1, fin.x_) - v_k;
    });
    const auto ms = linalg::mean_and_std_error(diff);
    return {ms.mean, ms.std_error, n_samples};
}

SupermartingaleResult supermartingale_check(const std::vector<TrajectoryPath>& paths,
                                            const GainSet& G,
                                            const DeterministicSwitchSpec& det_switch) {
    SupermartingaleResult res;
    if (paths.empty()) return res;
    double end = paths.front().time.back();
    for (const auto& p : paths) end = std::min(end, p.time.back());

    for (int k = 0; k <= static_cast<int>(det_switch.times.size()); ++k) {
        const double t = det_switch.interval_start(k);
        if (t > end) break;
        std::vector<double> v;
        v.reserve(paths.size());
        for (const auto& p : paths) {
            const auto idx = grid_index(p, t);
            if (idx < 0) throw Error("supermartingale_check: switch time missing from path grid");
            const auto n = static_cast<std::size_t>(idx);
            v.push_back(p.x[n].dot(G.at(p.regime[n], p.interval[n]) * p.x[n]));
        }
        const auto ms = linalg::mean_and_std_error(v);
        res.rows.push_back({k, t, ms.mean, ms.std_error, static_cast<int>(v.size())});
    }
    for (std::size_t n = 1; n < res.rows.size(); ++n) {
        const auto& a = res.rows[n - 1];
        const auto& b = res.rows[n];
        const double pooled = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
        if (b.mean > a.mean + 2.0 * pooled) res.verdict = false;
    }
    return res;
}

double lemma1_bound(double Ex2, double L, double Delta, double C) {
    return 7.0 * (Ex2 + 3.0 * C * C * Delta) * std::exp(7.0 * L * L * (Delta + 8.0));
}

std::vector<Lemma1Row> lemma1_bound_check(const std::vector<TrajectoryPath>& paths,
                                          const DeterministicSwitchSpec& det_switch, double L,
                                          double Delta) {
    std::vector<Lemma1Row> rows;
    if (paths.empty()) return rows;
    double end = paths.front().time.back();
    for (const auto& p : paths) end = std::min(end, p.time.back());

    std::vector<double> cuts{0.0};
    for (double t : det_switch.times)
        if (t < end) cuts.push_back(t);
    cuts.push_back(end);

    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const bool last = k + 2 == cuts.size();
        std::vector<double> start_sq, sup_sq;
        for (const auto& p : paths) {
            const auto a = grid_index(p, cuts[k]);
            const auto b = grid_index(p, cuts[k + 1]);
            if (a < 0 || b < 0) throw Error("lemma1_bound_check: interval end missing from grid");
            const auto ia = static_cast<std::size_t>(a);
            const auto ib = static_cast<std::size_t>(b);
            double s = p.x[ia].squaredNorm();
            for (std::size_t n = ia + 1; n <= ib; ++n) {
                s = std::max(s, p.x_pre[n].squaredNorm());
                if (n < ib || last) s = std::max(s, p.x[n].squaredNorm());
            }
            start_sq.push_back(p.x[ia].squaredNorm());
            sup_sq.push_back(s);
        }
        Lemma1Row row;
        row.k = static_cast<int>(k);
        row.t_start = cuts[k];
        row.t_end = cuts[k + 1];
        row.start_second_moment = linalg::mean_and_std_error(start_sq).mean;
        row.empirical = linalg::mean_and_std_error(sup_sq).mean;
        row.bound = lemma1_bound(row.start_second_moment, L, Delta);
        row.satisfied = row.empirical <= row.bound;
        rows.push_back(row);
    }
    return rows;
}

double wilson_upper(int successes, int n) {
    if (n <= 0) return 1.0;
    constexpr double z = 1.96;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double centre = p + z2 / (2.0 * nn);
    const double spread = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return std::min(1.0, (centre + spread) / (1.0 + z2 / nn));
}

namespace {

struct Exceeded {};

class ExceedanceObserver final : public PathObserver {
public:
    explicit ExceedanceObserver(double eps1) : eps1_sq_(eps1 * eps1) {}
    void on_start(double, const Vector& x, const Vector&, int, int, int) override { check(x); }
    void on_step(const StepRecord& s) override {
        check(s.x_end_pre);
        check(s.x_end);
    }

private:
    void check(const Vector& x) const {
        if (x.squaredNorm() > eps1_sq_) throw Exceeded{};
    }
    double eps1_sq_;
};

}  // namespace

StabilityEstimate stability_probability_estimate(const RegimeSystem& sys, const FeedbackLaw& law,
                                                 double eps1, double delta, double T, double dt,
                                                 int n_paths, int n_x0, std::uint64_t root_seed,
                                                 int threads) {
    if (!(eps1 > 0.0) || !(delta > 0.0)) throw Error("stability estimate: eps1 and delta must be > 0");
    if (n_paths < 1 || n_x0 < 1) throw Error("stability estimate: need at least one path and x0");

    StabilityEstimate est;
    const int N = sys.regime_count();
    for (int j = 0; j < n_x0; ++j) {
        SeededStream init = split(SeededStream(root_seed, static_cast<std::uint64_t>(j)),
                                  Channel::initial_state);
        Vector x0(sys.m);
        do {
            for (Eigen::Index c = 0; c < x0.size(); ++c) x0(c) = init.normal();
        } while (x0.norm() == 0.0);
        x0 *= delta / x0.norm();
        ExceedanceRow row;
        row.x0 = x0;
        row.regime = std::min(N - 1, static_cast<int>(init.uniform() * N));
        row.n = n_paths;
        est.rows.push_back(row);
    }

    const int total = n_paths * n_x0;
    std::vector<char> hit(static_cast<std::size_t>(total), 0);
    parallel_for(total, threads, [&](int id) {
        const auto& row = est.rows[static_cast<std::size_t>(id / n_paths)];
        PathStart start;
        start.x0 = row.x0;
        start.regime = row.regime;
        start.eta = sys.det_switch.h0;
        start.interval = sys.det_switch.interval_at(0.0);
        ExceedanceObserver obs(eps1);
        try {
            integrate_path(sys, law, start, T, dt,
                           SeededStream(root_seed, static_cast<std::uint64_t>(id)), obs);
        } catch (const Exceeded&) {
            hit[static_cast<std::size_t>(id)] = 1;
        } catch (const DivergenceError&) {
            hit[static_cast<std::size_t>(id)] = 1;
        }
    });

    for (int j = 0; j < n_x0; ++j) {
        auto& row = est.rows[static_cast<std::size_t>(j)];
        for (int p = 0; p < n_paths; ++p) row.exceed += hit[static_cast<std::size_t>(j * n_paths + p)];
        row.probability = static_cast<double>(row.exceed) / n_paths;
        row.upper = wilson_upper(row.exceed, n_paths);
        est.max_probability = std::max(est.max_probability, row.probability);
        est.max_upper = std::max(est.max_upper, row.upper);
    }
    return est;
}

void write_supermartingale_csv(std::ostream& os, const SupermartingaleResult& res) {
    os << "k,time,mean_v,std_error,n\n";
    for (const auto& r : res.rows)
        os << r.k << ',' << fmt(r.time) << ',' << fmt(r.mean) << ',' << fmt(r.std_error) << ','
           << r.n << '\n';
}

void write_lemma1_csv(std::ostream& os, const std::vector<Lemma1Row>& rows) {
    os << "k,t_start,t_end,start_second_moment,empirical_sup_second_moment,bound,satisfied\n";
    for (const auto& r : rows)
        os << r.k << ',' << fmt(r.t_start) << ',' << fmt(r.t_end) << ','
           << fmt(r.start_second_moment) << ',' << fmt(r.empirical) << ',' << fmt(r.bound) << ','
           << (r.satisfied ? "true" : "false") << '\n';
}

void write_stability_csv(std::ostream& os, const StabilityEstimate& est) {
    const auto m = est.rows.empty() ? 0 : est.rows.front().x0.size();
    os << "index";
    for (Eigen::Index i = 0; i < m; ++i) os << ",x0_" << i;
    os << ",regime,exceed,n,probability,wilson_upper\n";
    for (std::size_t j = 0; j < est.rows.size(); ++j) {
        const auto& r = est.rows[j];
        os << j;
        for (Eigen::Index i = 0; i < m; ++i) os << ',' << fmt(r.x0(i));
        os << ',' << r.regime << ',' << r.exceed << ',' << r.n << ',' << fmt(r.probability) << ','
           << fmt(r.upper) << '\n';
    }
}

}  // namespace jumpstab
