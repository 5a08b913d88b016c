#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "jumpstab/linalg.hpp"
#include "jumpstab/model.hpp"
#include "jumpstab/stochastic.hpp"

namespace jumpstab {

// u = -F[i][k] x while the regime is i and the interval index is k.
struct FeedbackLaw {
    std::vector<std::vector<Matrix>> F;  // r x m gains, [regime][interval]

    int intervals() const { return F.empty() ? 0 : static_cast<int>(F.front().size()); }
    const Matrix& at(int i, int k) const {
        return F[i][static_cast<std::size_t>(std::min(k, intervals() - 1))];
    }

    static FeedbackLaw zero(const RegimeSystem& system);
};

enum EventKind : std::uint8_t {
    event_none = 0,
    event_poisson = 1,
    event_regime_jump = 2,
    event_det_switch = 4,
};

std::string event_mask_name(std::uint8_t mask);

struct Event {
    double time = 0.0;
    EventKind kind = event_none;
    int detail = 0;  // mark index, regime entered, or eta state entered
    int count = 1;   // Poisson arrivals of that mark within the step
};

struct TrajectoryPath {
    std::vector<double> time;
    std::vector<Vector> x;      // after any jump at that time
    std::vector<Vector> x_pre;  // before jumps at that time
    std::vector<int> regime;
    std::vector<int> eta;
    std::vector<int> interval;
    std::vector<Vector> u;  // control applied from this point to the next
    std::vector<std::uint8_t> event_mask;
    std::vector<Event> events;

    std::size_t size() const { return time.size(); }
};

// Everything the integrator knows about one step [t0, t1].
struct StepRecord {
    double t0;
    double t1;
    const Vector& x_start;    // state at t0 (post-jump)
    const Vector& u;          // control held over the step
    const Vector& x_end_pre;  // state at t1 before the jumps located at t1
    const Vector& x_end;      // state at t1 after jumps
    const Vector& u_end;      // control held from t1 onward
    int regime;               // regime on [t0, t1)
    int eta;
    int interval;
    int regime_end;  // values at t1 after jumps
    int eta_end;
    int interval_end;
    std::uint8_t events;  // EventKind mask at t1
};

class PathObserver {
public:
    virtual ~PathObserver() = default;
    virtual void on_start(double t, const Vector& x, const Vector& u, int regime, int eta,
                          int interval) = 0;
    virtual void on_step(const StepRecord& step) = 0;
    virtual void on_event(const Event&) {}
};

struct PathStart {
    double t0 = 0.0;
    Vector x0;
    int regime = 0;
    int eta = 0;
    int interval = 0;
};

struct SimulationOptions {
    double explosion_threshold = 1e12;
};

// Euler-Maruyama between events; regime transitions and deterministic
// switches are inserted into the grid and applied exactly at their times.
// Throws DivergenceError when |x| exceeds the threshold or becomes non-finite.
void integrate_path(const RegimeSystem& system, const FeedbackLaw& law, const PathStart& start,
                    double horizon, double dt, const SeededStream& stream, PathObserver& observer,
                    const SimulationOptions& opts = {});

TrajectoryPath simulate_path(const RegimeSystem& system, const FeedbackLaw& law, const Vector& x0,
                             int y0, double horizon, double dt, const SeededStream& stream,
                             const SimulationOptions& opts = {});

// Path p uses SeededStream(root_seed, p). `threads` = 0 picks the hardware
// concurrency; the result does not depend on it.
std::vector<TrajectoryPath> simulate_batch(const RegimeSystem& system, const FeedbackLaw& law,
                                           const Vector& x0, int y0, double horizon, double dt,
                                           int n_paths, std::uint64_t root_seed, int threads = 0,
                                           const SimulationOptions& opts = {});

void write_trajectory_csv(std::ostream& os, const TrajectoryPath& path);

// Runs fn(0..n-1) on a worker pool. Exceptions are collected and the one with
// the smallest index is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

int resolve_threads(int threads);

}  // namespace jumpstab
