#include "jumpstab/riccati.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <cmath>
#include <sstream>

#include "jumpstab/error.hpp"

namespace jumpstab {

double GainSet::max_residual() const {
    double r = 0.0;
    for (const auto& row : residual)
        for (double v : row) r = std::max(r, v);
    return r;
}

std::vector<std::vector<GainBounds>> gain_bounds(const GainSet& gains) {
    std::vector<std::vector<GainBounds>> out;
    for (const auto& row : gains.G) {
        std::vector<GainBounds> b;
        for (const auto& X : row) {
            const auto sp = linalg::symmetric_spectrum(X);
            b.push_back({sp.min, sp.max});
        }
        out.push_back(std::move(b));
    }
    return out;
}

bool positive_definite(const GainSet& gains) {
    for (const auto& row : gain_bounds(gains))
        for (const auto& b : row)
            if (!(b.c1 > 0.0)) return false;
    return true;
}

double max_asymmetry(const GainSet& gains) {
    double a = 0.0;
    for (const auto& row : gains.G)
        for (const auto& X : row) a = std::max(a, linalg::asymmetry(X));
    return a;
}

namespace {

// B D^{-1} B^T
Matrix control_weight(const Matrix& B, const Matrix& D) {
    return B * D.ldlt().solve(B.transpose());
}

// sum_l Sigma^T X Sigma + sum_j pi_j C^T X C
Matrix noise_term(const Regime& reg, const Matrix& X) {
    Matrix out = Matrix::Zero(X.rows(), X.cols());
    for (const auto& S : reg.sigma) out.noalias() += S.transpose() * X * S;
    for (const auto& mk : reg.marks) out.noalias() += mk.weight * (mk.C.transpose() * X * mk.C);
    return out;
}

// sum_{j != i} q_ij [K_ij^T G_j K_ij + sum_s Qs^T G_j Qs]
Matrix coupling_term(const RegimeSystem& sys, int i, const std::vector<const Matrix*>& Gk) {
    const int N = sys.regime_count();
    Matrix out = Matrix::Zero(sys.m, sys.m);
    for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        const double q = sys.Q(i, j);
        if (q == 0.0) continue;
        const Matrix& K = sys.regime_jump.K[i][j];
        const Matrix& Gj = *Gk[j];
        Matrix t = K.transpose() * Gj * K;
        for (const auto& Qm : sys.regime_jump.Qs) t.noalias() += Qm.transpose() * Gj * Qm;
        out += q * t;
    }
    return out;
}

double outgoing_rate(const RegimeSystem& sys, int i) {
    double s = 0.0;
    for (int j = 0; j < sys.regime_count(); ++j)
        if (j != i) s += sys.Q(i, j);
    return s;
}

void check_gain_table(const RegimeSystem& sys, const std::vector<std::vector<Matrix>>& G) {
    if (static_cast<int>(G.size()) != sys.regime_count())
        throw DimensionError("G", "expected " + std::to_string(sys.regime_count()) + " regimes");
    for (std::size_t i = 0; i < G.size(); ++i) {
        if (G[i].empty()) throw DimensionError("G[" + std::to_string(i) + "]", "no interval entries");
        for (const auto& X : G[i])
            if (X.rows() != sys.m || X.cols() != sys.m)
                throw DimensionError("G[" + std::to_string(i) + "]",
                                     "expected " + std::to_string(sys.m) + "x" + std::to_string(sys.m));
    }
}

}  // namespace

std::vector<std::vector<Matrix>> care_residual(const RegimeSystem& sys, const CostWeights& w,
                                               const std::vector<std::vector<Matrix>>& G) {
    check_gain_table(sys, G);
    const int N = sys.regime_count();
    const int K = static_cast<int>(G.front().size());
    std::vector<std::vector<Matrix>> R(N, std::vector<Matrix>(K));
    for (int k = 0; k < K; ++k) {
        std::vector<const Matrix*> Gk(N);
        for (int j = 0; j < N; ++j) Gk[j] = &G[j][std::min<std::size_t>(k, G[j].size() - 1)];
        for (int i = 0; i < N; ++i) {
            const Regime& reg = sys.regimes[i];
            const Matrix& Gi = *Gk[i];
            const Matrix S = control_weight(reg.B, w.D_at(i, k));
            Matrix Ri = Gi * reg.A + reg.A.transpose() * Gi - Gi * S * Gi + noise_term(reg, Gi) +
                        coupling_term(sys, i, Gk) - outgoing_rate(sys, i) * Gi + w.M_at(i, k);
            R[i][k] = std::move(Ri);
        }
    }
    return R;
}

void attach_residuals(GainSet& gains, const RegimeSystem& sys, const CostWeights& w) {
    const auto R = care_residual(sys, w, gains.G);
    gains.residual.assign(R.size(), {});
    for (std::size_t i = 0; i < R.size(); ++i)
        for (const auto& Ri : R[i]) gains.residual[i].push_back(Ri.norm());
}

namespace {

std::optional<Matrix> solve_standard_care(const Matrix& A, const Matrix& S, const Matrix& E,
                                          const Matrix* warm) {
    if (warm && linalg::is_hurwitz(A - S * *warm)) {
        if (auto X = linalg::care_newton_kleinman(A, S, E, *warm)) return X;
    }
    auto X0 = linalg::care_sign(A, S, E);
    if (!X0) return std::nullopt;
    // One Newton polish from the sign-function solution.
    if (linalg::is_hurwitz(A - S * *X0)) {
        if (auto X = linalg::care_newton_kleinman(A, S, E, *X0)) return X;
    }
    return X0;
}

bool indefinite(const Matrix& X) {
    const auto sp = linalg::symmetric_spectrum(X);
    return sp.min < -1e-10 * std::max(1.0, std::abs(sp.max));
}

}  // namespace

GainSet solve_coupled_care(const RegimeSystem& sys, const CostWeights& w, const SolveOptions& opts) {
    if (!(opts.tol > 0.0) || opts.max_outer < 1)
        throw Error("solve_coupled_care: tol must be > 0 and max_outer >= 1");
    if (!(opts.relaxation > 0.0 && opts.relaxation <= 1.0))
        throw Error("solve_coupled_care: relaxation must lie in (0, 1]");

    const int N = sys.regime_count();
    const int K = w.intervals();
    const int m = sys.m;
    GainSet out;
    out.tol = opts.tol;
    out.G.assign(N, std::vector<Matrix>(K));

    for (int k = 0; k < K; ++k) {
        std::vector<Matrix> S(N);
        std::vector<Matrix> Ashift(N);
        std::vector<Matrix> G(N);
        for (int i = 0; i < N; ++i) {
            S[i] = control_weight(sys.regimes[i].B, w.D_at(i, k));
            Ashift[i] = sys.regimes[i].A -
                        0.5 * outgoing_rate(sys, i) * Matrix::Identity(m, m);
            // Warm start: plain CARE with coupling and noise dropped, else M.
            auto X = linalg::care_sign(sys.regimes[i].A, S[i], w.M_at(i, k));
            G[i] = (X && !indefinite(*X)) ? *X : w.M_at(i, k);
        }

        double residual = std::numeric_limits<double>::infinity();
        int it = 0;
        for (; it < opts.max_outer; ++it) {
            for (int i = 0; i < N; ++i) {
                std::vector<const Matrix*> Gk(N);
                for (int j = 0; j < N; ++j) Gk[j] = &G[j];
                const Matrix E = w.M_at(i, k) + noise_term(sys.regimes[i], G[i]) +
                                 coupling_term(sys, i, Gk);
                auto X = solve_standard_care(Ashift[i], S[i], linalg::symmetrize(E), &G[i]);
                if (!X) {
                    std::ostringstream os;
                    os << "regime " << i << " CARE has no stabilizing solution (outer iteration "
                       << it << ")";
                    throw NonConvergence(os.str(), residual);
                }
                double alpha = opts.relaxation;
                Matrix next = linalg::symmetrize(G[i] + alpha * (*X - G[i]));
                int halvings = 0;
                while (indefinite(next) && halvings < 10) {
                    alpha *= 0.5;
                    ++halvings;
                    next = linalg::symmetrize(G[i] + alpha * (*X - G[i]));
                }
                if (indefinite(next))
                    throw IndefiniteIterate("regime " + std::to_string(i) +
                                            " iterate lost positive semidefiniteness");
                G[i] = std::move(next);
            }

            std::vector<std::vector<Matrix>> table(N, std::vector<Matrix>(1));
            for (int i = 0; i < N; ++i) table[i][0] = G[i];
            CostWeights wk;
            wk.M.resize(N);
            wk.D.resize(N);
            for (int i = 0; i < N; ++i) {
                wk.M[i] = {w.M_at(i, k)};
                wk.D[i] = {w.D_at(i, k)};
            }
            const auto R = care_residual(sys, wk, table);
            residual = 0.0;
            for (int i = 0; i < N; ++i) residual = std::max(residual, R[i][0].norm());
            if (!std::isfinite(residual))
                throw NonConvergence("coupled CARE iteration produced non-finite values", residual);
            if (residual <= opts.tol) break;
        }
        if (residual > opts.tol) {
            std::ostringstream os;
            os << "coupled CARE did not converge in " << opts.max_outer
               << " outer iterations (interval " << k << ", residual " << residual << ")";
            throw NonConvergence(os.str(), residual);
        }
        out.iterations = std::max(out.iterations, it + 1);
        for (int i = 0; i < N; ++i) out.G[i][k] = std::move(G[i]);
    }

    attach_residuals(out, sys, w);
    return out;
}

GainTrajectory solve_riccati_ode(const RegimeSystem& sys, const CostWeights& w, double horizon,
                                 double dt_g) {
    if (!(horizon > 0.0) || !(dt_g > 0.0))
        throw Error("solve_riccati_ode: horizon and step must be positive");
    const int N = sys.regime_count();
    const int K = w.intervals();
    const long steps = std::max(1L, std::lround(horizon / dt_g));
    const double h = horizon / static_cast<double>(steps);

    using Table = std::vector<std::vector<Matrix>>;
    auto axpy = [&](const Table& X, double a, const Table& Y) {
        Table out = X;
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < K; ++k) out[i][k] += a * Y[i][k];
        return out;
    };
    auto rhs = [&](const Table& X) { return care_residual(sys, w, X); };

    Table G(N, std::vector<Matrix>(K, Matrix::Zero(sys.m, sys.m)));
    GainTrajectory traj;
    traj.times.resize(static_cast<std::size_t>(steps) + 1);
    traj.gains.resize(static_cast<std::size_t>(steps) + 1);

    auto store = [&](long idx) {
        GainSet gs;
        gs.G = G;
        const double t = horizon - static_cast<double>(steps - idx) * h;
        traj.times[static_cast<std::size_t>(idx)] = idx == 0 ? 0.0 : t;
        traj.gains[static_cast<std::size_t>(idx)] = std::move(gs);
        for (const auto& row : G)
            for (const auto& X : row)
                if (indefinite(X)) traj.psd = false;
    };

    // s = T - t runs forward; dG/ds = R(G).
    store(steps);
    traj.times.back() = horizon;
    for (long n = 0; n < steps; ++n) {
        const Table k1 = rhs(G);
        const Table k2 = rhs(axpy(G, 0.5 * h, k1));
        const Table k3 = rhs(axpy(G, 0.5 * h, k2));
        const Table k4 = rhs(axpy(G, h, k3));
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < K; ++k)
                G[i][k] = linalg::symmetrize(
                    G[i][k] + (h / 6.0) * (k1[i][k] + 2.0 * k2[i][k] + 2.0 * k3[i][k] + k4[i][k]));
        const double t = horizon - static_cast<double>(n + 1) * h;
        for (const auto& row : G)
            for (const auto& X : row)
                if (!X.allFinite() || X.norm() > 1e12) throw DivergenceError(std::max(t, 0.0));
        store(steps - n - 1);
    }
    return traj;
}

}  // namespace jumpstab
