#pragma once

#include <cstdint>

#include "jumpstab/linalg.hpp"
#include "jumpstab/model.hpp"
#include "jumpstab/simulate.hpp"

namespace jumpstab {

// W = x^T M_ik x + u^T D_ik u
double running_cost(const CostWeights& weights, int i, int k, const Vector& x, const Vector& u);

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_paths = 0;     // paths aggregated
    int n_diverged = 0;  // paths dropped after exceeding the explosion threshold
    double T = 0.0;
    double dt = 0.0;
    // Estimate of the integral beyond T, extrapolated from the decay of the
    // integral over the last two tenths of the horizon. Infinite if W is not
    // decaying there.
    double tail_estimate = 0.0;
};

struct CostOptions {
    int threads = 0;
    SimulationOptions sim;
    double max_divergent_fraction = 0.01;
};

// Trapezoidal quadrature of W along each path on [0, T]; path p uses
// SeededStream(root_seed, p). Throws DivergenceError when more than
// max_divergent_fraction of the paths diverge.
CostEstimate estimate_cost(const RegimeSystem& system, const CostWeights& weights,
                           const FeedbackLaw& law, const Vector& x0, int y0, double T, double dt,
                           int n_paths, std::uint64_t root_seed, const CostOptions& opts = {});

// Both laws driven by the same streams; the difference is taken per path.
struct CostComparison {
    CostEstimate a;
    CostEstimate b;
    double diff_mean = 0.0;  // cost(a) - cost(b)
    double diff_std_error = 0.0;
    double ci_low = 0.0;  // 95% normal interval for the difference
    double ci_high = 0.0;
};

CostComparison compare_costs(const RegimeSystem& system, const CostWeights& weights,
                             const FeedbackLaw& law_a, const FeedbackLaw& law_b, const Vector& x0,
                             int y0, double T, double dt, int n_paths, std::uint64_t root_seed,
                             const CostOptions& opts = {});

}  // namespace jumpstab
