#pragma once

#include <string>
#include <vector>

#include "jumpstab/linalg.hpp"
#include "jumpstab/model.hpp"
#include "jumpstab/riccati.hpp"

namespace jumpstab {

// Scalar majorant rho(eps) = sum rho_r eps^r of the coefficient norms. It
// solves rho^2 + (a + eps) rho + b = 0 and has real roots for eps <= radius.
struct Majorant {
    double L0 = 0.0;
    double c = 0.0;
    double a = 0.0;  // -(1/c + 2 L0)
    double b = 0.0;  // L0/c + L0^2
    double rho0 = 0.0;
    double radius = 0.0;  // -a - 2 sqrt(b)
};

Majorant majorant_radius(double L0, double c);

// Smallest c with L_r <= c [sum_{q=1}^{r-1} L_q L_{r-q} + L_{r-1}] for r = 1..R.
// Returns a tiny positive floor when no order constrains c.
double estimate_majorant_c(const std::vector<double>& L);

// rho_0 = L0, rho_r = c [sum_{q=1}^{r-1} rho_q rho_{r-q} + rho_{r-1}].
std::vector<double> majorant_sequence(double L0, double c, int order);

struct SeriesSolution {
    std::vector<std::vector<std::vector<Matrix>>> coeffs;  // [order][regime][interval]
    double eps = 0.0;
    int order = 0;
    Majorant majorant;
    std::vector<double> L;  // max_{i,k} |G^(r)_ik|_F
    std::vector<std::string> warnings;
};

// Rare switching: Q = eps * r. Order 0 is the decoupled equation per regime;
// every higher order is a linear equation in the closed-loop matrix
// A - B D^{-1} B^T G^(0). Throws SingularOperator naming the failing order.
SeriesSolution solve_case1(const RegimeSystem& system, const CostWeights& weights,
                           const Matrix& r_rates, double eps, int order);

// Small jumps: K_ij = I + eps Khat_ij, Qs = eps Qhat_s. Order 0 keeps the
// linear coupling sum_j (G_j - G_i) q_ij; higher orders are solved jointly
// over regimes.
SeriesSolution solve_case2(const RegimeSystem& system, const CostWeights& weights,
                           const std::vector<std::vector<Matrix>>& K_hat,
                           const std::vector<Matrix>& Q_hat, double eps, int order);

// G = sum_r eps^r G^(r). Adds a warning when eps exceeds the majorant radius
// or the sum is not positive definite.
GainSet assemble_series(const SeriesSolution& sol);

}  // namespace jumpstab
