#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "jumpstab/linalg.hpp"
#include "jumpstab/model.hpp"
#include "jumpstab/riccati.hpp"
#include "jumpstab/simulate.hpp"

namespace jumpstab {

struct OperatorEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    int n_samples = 0;
};

// Monte Carlo value of E[v_{k+1}(y(t_{k+1}), eta_{k+1}, x(t_{k+1}))] - v_k(y, h, x)
// with v_k(y, ., x) = x^T G_yk x. The path starts at t_k in (y, h, x) and ends
// right after the switch at t_{k+1}. Sample s uses SeededStream(root_seed, s).
OperatorEstimate estimate_discrete_operator(const RegimeSystem& system, const FeedbackLaw& law,
                                            const GainSet& G, int y, int h, const Vector& x,
                                            int k, double dt, int n_samples,
                                            std::uint64_t root_seed, int threads = 0);

struct SupermartingaleRow {
    int k = 0;
    double time = 0.0;
    double mean = 0.0;  // mean over paths of v_k at t_k (after the switch)
    double std_error = 0.0;
    int n = 0;
};

struct SupermartingaleResult {
    std::vector<SupermartingaleRow> rows;
    // mean_{k+1} <= mean_k + 2 sqrt(se_k^2 + se_{k+1}^2) for every k.
    bool verdict = true;
};

SupermartingaleResult supermartingale_check(const std::vector<TrajectoryPath>& paths,
                                            const GainSet& G,
                                            const DeterministicSwitchSpec& det_switch);

// 7 [Ex2 + 3 C^2 Delta] exp(7 L^2 (Delta + 8))
double lemma1_bound(double Ex2, double L, double Delta, double C = 0.0);

struct Lemma1Row {
    int k = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    double start_second_moment = 0.0;  // mean |x(t_k)|^2
    double empirical = 0.0;            // mean over paths of sup_{[t_k, t_{k+1})} |x|^2
    double bound = 0.0;
    bool satisfied = true;
};

// Intervals are cut at the switch times and end at the last grid time. The
// path-wise supremum includes left limits, so `empirical` dominates the
// supremum of the second moment.
std::vector<Lemma1Row> lemma1_bound_check(const std::vector<TrajectoryPath>& paths,
                                          const DeterministicSwitchSpec& det_switch, double L,
                                          double Delta);

struct ExceedanceRow {
    Vector x0;
    int regime = 0;
    int exceed = 0;
    int n = 0;
    double probability = 0.0;
    double upper = 0.0;  // Wilson 95% upper bound
};

struct StabilityEstimate {
    std::vector<ExceedanceRow> rows;
    double max_probability = 0.0;
    double max_upper = 0.0;
};

// Wilson score upper bound, z = 1.96.
double wilson_upper(int successes, int n);

// Initial states uniform on |x0| = delta with uniform regimes; counts paths
// with sup_{t <= T} |x(t)| > eps1. Divergent paths count as exceedances.
StabilityEstimate stability_probability_estimate(const RegimeSystem& system,
                                                 const FeedbackLaw& law, double eps1,
                                                 double delta, double T, double dt, int n_paths,
                                                 int n_x0, std::uint64_t root_seed,
                                                 int threads = 0);

void write_supermartingale_csv(std::ostream& os, const SupermartingaleResult& res);
void write_lemma1_csv(std::ostream& os, const std::vector<Lemma1Row>& rows);
void write_stability_csv(std::ostream& os, const StabilityEstimate& est);

}  // namespace jumpstab
