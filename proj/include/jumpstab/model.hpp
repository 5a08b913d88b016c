#pragma once

#include <algorithm>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jumpstab/linalg.hpp"

namespace jumpstab {

// One atom of the finite marked Poisson measure: jumps arrive at rate
// `weight` and move the state by C x.
struct PoissonMark {
    double weight = 0.0;
    Matrix C;
};

// Coefficients active while the regime chain sits in one state.
struct Regime {
    Matrix A;                        // m x m drift
    Matrix B;                        // m x r control input
    std::vector<Matrix> sigma;       // one m x m matrix per scalar Wiener channel
    std::vector<PoissonMark> marks;  // compensated Poisson jumps
};

enum class XiLaw { rademacher, standard_normal };

XiLaw parse_xi_law(std::string_view tag);
std::string_view to_string(XiLaw law);

// State map applied when the regime chain moves i -> j:
//   x <- K[i][j] x + sum_s xi_s Qs[s] x
struct RegimeJumpSpec {
    std::vector<std::vector<Matrix>> K;
    std::vector<Matrix> Qs;
    XiLaw xi_law = XiLaw::rademacher;
};

// Jumps at fixed times t_1 < t_2 < ...: the chain eta steps with P_H, then
// x <- J[eta] x.
struct DeterministicSwitchSpec {
    std::vector<double> times;
    Matrix P_H;
    int h0 = 0;
    std::vector<Matrix> J;

    int states() const { return static_cast<int>(P_H.rows()); }

    // Number of switch times <= t; this is the interval index k at time t.
    int interval_at(double t) const;
    // Start of interval k (t_0 = 0).
    double interval_start(int k) const { return k == 0 ? 0.0 : times.at(k - 1); }
};

struct RegimeSystem {
    int m = 0;
    int r = 0;
    std::vector<Regime> regimes;
    Matrix Q;  // generator of the regime chain
    RegimeJumpSpec regime_jump;
    DeterministicSwitchSpec det_switch;

    int regime_count() const { return static_cast<int>(regimes.size()); }

    // N regimes of zero matrices, zero generator, identity jumps, no switches.
    static RegimeSystem zeros(int m, int r, int N);
};

// Quadratic running cost weights, indexed [regime][interval]. A single
// interval entry is reused for every k.
struct CostWeights {
    std::vector<std::vector<Matrix>> M;
    std::vector<std::vector<Matrix>> D;

    int intervals() const {
        if (M.empty()) return 0;
        return static_cast<int>(std::max(M.front().size(), D.empty() ? 0 : D.front().size()));
    }
    const Matrix& M_at(int i, int k) const { return at(M[i], k); }
    const Matrix& D_at(int i, int k) const { return at(D[i], k); }

    // Same M and D in every regime, single interval.
    static CostWeights uniform(int N, const Matrix& M, const Matrix& D);

private:
    // Entries past the end of a row reuse its last entry.
    static const Matrix& at(const std::vector<Matrix>& row, int k) {
        return row[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(row.size()) - 1))];
    }
};

struct ValidationOptions {
    double generator_tol = 1e-12;
    double stochastic_tol = 1e-12;
    double symmetry_tol = 1e-12;
    double psd_tol = 1e-10;        // eigenvalues of M must be >= -psd_tol
    double d_min = 1e-12;          // eigenvalues of D must be >= d_min
    double min_switch_gap = 1e-9;  // delta
    double max_switch_gap = std::numeric_limits<double>::infinity();
};

struct Violation {
    std::string location;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    double lipschitz = 0.0;   // L
    double max_gap = 0.0;     // Delta: largest gap between consecutive switch times
    double bound_const = 0.0; // C (zero for linear coefficients)

    bool ok() const { return violations.empty(); }
    std::string to_text() const;
};

ValidationReport validate(const RegimeSystem& system, const CostWeights& weights,
                          const ValidationOptions& opts = {});

// Lipschitz constant of the linear coefficients: max over regimes of
// ||A_i|| + sum ||Sigma_il|| + sum pi_j ||C_ij|| + max_h ||J_h||.
double lipschitz_constant(const RegimeSystem& system);

struct Model {
    RegimeSystem system;
    CostWeights weights;
};

Model load_model(const std::filesystem::path& path);
Model parse_model(std::string_view json_text);
void save_model(const std::filesystem::path& path, const RegimeSystem& system,
                const CostWeights& weights);
std::string serialize_model(const RegimeSystem& system, const CostWeights& weights);

}  // namespace jumpstab
