#pragma once

#include <string>
#include <vector>

#include "jumpstab/linalg.hpp"
#include "jumpstab/model.hpp"

namespace jumpstab {

// Symmetric matrices G[i][k] of the quadratic Lyapunov functions
// v_ik(x) = x^T G_ik x, with the residual of the equation they solve.
struct GainSet {
    std::vector<std::vector<Matrix>> G;              // [regime][interval]
    std::vector<std::vector<double>> residual;       // Frobenius norm per (i, k)
    double tol = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;

    int regimes() const { return static_cast<int>(G.size()); }
    int intervals() const { return G.empty() ? 0 : static_cast<int>(G.front().size()); }
    const Matrix& at(int i, int k) const {
        return G[i][static_cast<std::size_t>(std::min(k, intervals() - 1))];
    }
    double max_residual() const;
};

// Sandwich constants c1 = lambda_min(G_ik), c2 = lambda_max(G_ik):
// c1 |x|^2 <= x^T G x <= c2 |x|^2.
struct GainBounds {
    double c1 = 0.0;
    double c2 = 0.0;
};
std::vector<std::vector<GainBounds>> gain_bounds(const GainSet& gains);
bool positive_definite(const GainSet& gains);
double max_asymmetry(const GainSet& gains);

struct SolveOptions {
    double tol = 1e-10;
    int max_outer = 500;
    double relaxation = 1.0;
};

// R_ik = G_ik A_i + A_i^T G_ik - G_ik B_i D_ik^{-1} B_i^T G_ik
//        + sum_l Sigma_il^T G_ik Sigma_il + sum_j pi_j C_ij^T G_ik C_ij
//        + sum_{j != i} [K_ij^T G_jk K_ij + sum_s Qs^T G_jk Qs - G_ik] q_ij + M_ik
std::vector<std::vector<Matrix>> care_residual(const RegimeSystem& system,
                                               const CostWeights& weights,
                                               const std::vector<std::vector<Matrix>>& G);

// Fills gains.residual from care_residual.
void attach_residuals(GainSet& gains, const RegimeSystem& system, const CostWeights& weights);

// Coupled algebraic equations R_ik = 0 by a Gauss-Seidel sweep over regimes.
// Each regime solves a standard CARE by Newton-Kleinman with the coupling and
// noise terms frozen at the latest iterates. Throws NonConvergence or
// IndefiniteIterate.
GainSet solve_coupled_care(const RegimeSystem& system, const CostWeights& weights,
                           const SolveOptions& opts = {});

// G(t) on a grid over [0, T], integrated backward from G(T) = 0 with RK4:
// dG_ik/dt = -R_ik(G).
struct GainTrajectory {
    std::vector<double> times;  // ascending, times.front() = 0, times.back() = T
    std::vector<GainSet> gains;
    bool psd = true;  // every G(t) positive semidefinite (within 1e-10)

    const GainSet& initial() const { return gains.front(); }
};

GainTrajectory solve_riccati_ode(const RegimeSystem& system, const CostWeights& weights,
                                 double horizon, double dt_g);

}  // namespace jumpstab
