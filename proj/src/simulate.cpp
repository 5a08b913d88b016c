#include "jumpstab/simulate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "jumpstab/error.hpp"

namespace jumpstab {

FeedbackLaw FeedbackLaw::zero(const RegimeSystem& system) {
    FeedbackLaw law;
    law.F.assign(system.regime_count(), std::vector<Matrix>{Matrix::Zero(system.r, system.m)});
    return law;
}

std::string event_mask_name(std::uint8_t mask) {
    if (mask == event_none) return "none";
    std::string out;
    auto add = [&](const char* name) {
        if (!out.empty()) out += '|';
        out += name;
    };
    if (mask & event_poisson) add("poisson");
    if (mask & event_regime_jump) add("regime_jump");
    if (mask & event_det_switch) add("det_switch");
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-regime drift with the Poisson compensator folded in:
// A_i - sum_j pi_j C_ij.
std::vector<Matrix> compensated_drift(const RegimeSystem& sys) {
    std::vector<Matrix> out;
    out.reserve(sys.regimes.size());
    for (const auto& reg : sys.regimes) {
        Matrix A = reg.A;
        for (const auto& mk : reg.marks) A -= mk.weight * mk.C;
        out.push_back(std::move(A));
    }
    return out;
}

}  // namespace

void integrate_path(const RegimeSystem& sys, const FeedbackLaw& law, const PathStart& start,
                    double horizon, double dt, const SeededStream& stream, PathObserver& obs,
                    const SimulationOptions& opts) {
    if (!(dt > 0.0)) throw Error("integrate_path: dt must be positive");
    if (!(horizon > start.t0)) throw Error("integrate_path: horizon must exceed the start time");

    SeededStream wiener = split(stream, Channel::wiener);
    SeededStream poisson = split(stream, Channel::poisson);
    SeededStream regime_stream = split(stream, Channel::regime);
    SeededStream eta_stream = split(stream, Channel::eta);
    SeededStream xi_stream = split(stream, Channel::xi);

    const double t0 = start.t0;
    const RegimePath rpath = sample_ctmc(sys.Q, start.regime, horizon - t0, regime_stream);
    const auto& switches = sys.det_switch.times;
    std::size_t next_switch = static_cast<std::size_t>(
        std::upper_bound(switches.begin(), switches.end(), t0) - switches.begin());
    std::size_t next_jump = 0;

    const std::vector<Matrix> drift = compensated_drift(sys);
    const auto& Qs = sys.regime_jump.Qs;

    const Eigen::Index m = sys.m;
    Vector x = start.x0;
    Vector x_pre(m), x_new(m), tmp(m), u(sys.r), u_next(sys.r);
    int regime = start.regime;
    int eta = start.eta;
    int interval = start.interval;

    linalg::gemv_small(u, law.at(regime, interval), x, -1.0, false);
    obs.on_start(t0, x, u, regime, eta, interval);

    double t = t0;
    long n = 0;
    const double snap = 1e-9 * dt;
    while (t < horizon) {
        double t_grid = t0 + static_cast<double>(n + 1) * dt;
        if (t_grid > horizon - snap) t_grid = horizon;
        const double t_jump =
            next_jump < rpath.jump_times.size() ? t0 + rpath.jump_times[next_jump] : kInf;
        const double t_switch =
            next_switch < switches.size() && switches[next_switch] <= horizon ? switches[next_switch]
                                                                              : kInf;
        const double t_event = std::min(t_jump, t_switch);

        double t_next;
        if (t_event <= t_grid + snap) {
            t_next = t_event;
            if (t_grid <= t_event + snap) ++n;
        } else {
            t_next = t_grid;
            ++n;
        }
        const bool do_jump = t_jump == t_next;
        const bool do_switch = t_switch == t_next;
        const double h = t_next - t;

        // Continuous part: drift, diffusion, compensator.
        const Regime& reg = sys.regimes[regime];
        x_new = x;
        if (h > 0.0) {
            linalg::gemv_small(x_new, drift[regime], x, h, true);
            linalg::gemv_small(x_new, reg.B, u, h, true);
            const double sq = std::sqrt(h);
            for (const auto& S : reg.sigma) {
                const double z = wiener.normal();
                linalg::gemv_small(x_new, S, x, sq * z, true);
            }
        }
        x_pre = x_new;

        std::uint8_t mask = event_none;
        for (std::size_t j = 0; j < reg.marks.size(); ++j) {
            const auto& mk = reg.marks[j];
            const auto count = poisson.poisson(mk.weight * h);
            for (std::uint64_t c = 0; c < count; ++c) {
                linalg::gemv_small(tmp, mk.C, x_new, 1.0, false);
                x_new += tmp;
            }
            if (count > 0) {
                mask |= event_poisson;
                obs.on_event({t_next, event_poisson, static_cast<int>(j), static_cast<int>(count)});
            }
        }

        const int regime_before = regime;
        const int eta_before = eta;
        const int interval_before = interval;
        if (do_jump) {
            const int to = rpath.states[next_jump++];
            linalg::gemv_small(tmp, sys.regime_jump.K[regime][to], x_new, 1.0, false);
            for (const auto& Qm : Qs) {
                const double xi = sys.regime_jump.xi_law == XiLaw::rademacher
                                      ? static_cast<double>(xi_stream.rademacher())
                                      : xi_stream.normal();
                linalg::gemv_small(tmp, Qm, x_new, xi, true);
            }
            x_new = tmp;
            regime = to;
            mask |= event_regime_jump;
            obs.on_event({t_next, event_regime_jump, to, 1});
        }
        if (do_switch) {
            ++next_switch;
            eta = step_eta(sys.det_switch.P_H, eta, eta_stream);
            linalg::gemv_small(tmp, sys.det_switch.J[eta], x_new, 1.0, false);
            x_new = tmp;
            ++interval;
            mask |= event_det_switch;
            obs.on_event({t_next, event_det_switch, eta, 1});
        }

        if (!x_new.allFinite() || x_new.norm() > opts.explosion_threshold)
            throw DivergenceError(t_next);

        linalg::gemv_small(u_next, law.at(regime, interval), x_new, -1.0, false);
        obs.on_step(StepRecord{t, t_next, x, u, x_pre, x_new, u_next, regime_before, eta_before,
                               interval_before, regime, eta, interval, mask});
        x.swap(x_new);
        u.swap(u_next);
        t = t_next;
    }
}

namespace {

class Recorder final : public PathObserver {
public:
    explicit Recorder(TrajectoryPath& path) : path_(path) {}

    void on_start(double t, const Vector& x, const Vector& u, int regime, int eta,
                  int interval) override {
        push(t, x, x, u, regime, eta, interval, event_none);
    }

    void on_step(const StepRecord& s) override {
        push(s.t1, s.x_end, s.x_end_pre, s.u_end, s.regime_end, s.eta_end, s.interval_end, s.events);
    }

    void on_event(const Event& e) override { path_.events.push_back(e); }

private:
    void push(double t, const Vector& x, const Vector& x_pre, const Vector& u, int regime, int eta,
              int interval, std::uint8_t mask) {
        path_.time.push_back(t);
        path_.x.push_back(x);
        path_.x_pre.push_back(x_pre);
        path_.u.push_back(u);
        path_.regime.push_back(regime);
        path_.eta.push_back(eta);
        path_.interval.push_back(interval);
        path_.event_mask.push_back(mask);
    }

    TrajectoryPath& path_;
};

}  // namespace

TrajectoryPath simulate_path(const RegimeSystem& sys, const FeedbackLaw& law, const Vector& x0,
                             int y0, double horizon, double dt, const SeededStream& stream,
                             const SimulationOptions& opts) {
    TrajectoryPath path;
    Recorder rec(path);
    PathStart start;
    start.x0 = x0;
    start.regime = y0;
    start.eta = sys.det_switch.h0;
    start.interval = sys.det_switch.interval_at(0.0);
    integrate_path(sys, law, start, horizon, dt, stream, rec, opts);
    return path;
}

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    const int workers = std::min(resolve_threads(threads), n);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<TrajectoryPath> simulate_batch(const RegimeSystem& sys, const FeedbackLaw& law,
                                           const Vector& x0, int y0, double horizon, double dt,
                                           int n_paths, std::uint64_t root_seed, int threads,
                                           const SimulationOptions& opts) {
    std::vector<TrajectoryPath> paths(static_cast<std::size_t>(std::max(n_paths, 0)));
    parallel_for(n_paths, threads, [&](int p) {
        try {
            paths[static_cast<std::size_t>(p)] =
                simulate_path(sys, law, x0, y0, horizon, dt,
                              SeededStream(root_seed, static_cast<std::uint64_t>(p)), opts);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.time(), p);
        }
    });
    return paths;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryPath& path) {
    const auto m = path.x.empty() ? 0 : path.x.front().size();
    const auto r = path.u.empty() ? 0 : path.u.front().size();
    os << "time";
    for (Eigen::Index i = 0; i < m; ++i) os << ",x_" << i;
    os << ",regime,eta";
    for (Eigen::Index i = 0; i < r; ++i) os << ",u_" << i;
    os << ",event_kind\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (std::size_t n = 0; n < path.size(); ++n) {
        num(path.time[n]);
        for (Eigen::Index i = 0; i < m; ++i) {
            os << ',';
            num(path.x[n](i));
        }
        os << ',' << path.regime[n] << ',' << path.eta[n];
        for (Eigen::Index i = 0; i < r; ++i) {
            os << ',';
            num(path.u[n](i));
        }
        os << ',' << event_mask_name(path.event_mask[n]) << '\n';
    }
}

}  // namespace jumpstab
