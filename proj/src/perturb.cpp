#include "jumpstab/perturb.hpp"

#include <cmath>
#include <sstream>

#include "jumpstab/error.hpp"

namespace jumpstab {

Majorant majorant_radius(double L0, double c) {
    if (!(L0 > 0.0) || !(c > 0.0) || !std::isfinite(L0) || !std::isfinite(c))
        throw Error("majorant_radius: L0 and c must be positive and finite");
    Majorant mj;
    mj.L0 = L0;
    mj.c = c;
    mj.a = -(1.0 / c + 2.0 * L0);
    mj.b = L0 / c + L0 * L0;
    mj.rho0 = -mj.a / 2.0 - std::sqrt(mj.a * mj.a / 4.0 - mj.b);
    mj.radius = -mj.a - 2.0 * std::sqrt(mj.b);
    return mj;
}

namespace {

constexpr double kMajorantFloor = 1e-12;

double convolution(const std::vector<double>& v, std::size_t r) {
    double s = 0.0;
    for (std::size_t q = 1; q < r; ++q) s += v[q] * v[r - q];
    return s;
}

}  // namespace

double estimate_majorant_c(const std::vector<double>& L) {
    double c = 0.0;
    for (std::size_t r = 1; r < L.size(); ++r) {
        const double bracket = convolution(L, r) + L[r - 1];
        if (bracket > 0.0) c = std::max(c, L[r] / bracket);
    }
    return std::max(c, kMajorantFloor);
}

std::vector<double> majorant_sequence(double L0, double c, int order) {
    std::vector<double> rho(static_cast<std::size_t>(std::max(order, 0)) + 1);
    rho[0] = L0;
    for (std::size_t r = 1; r < rho.size(); ++r) rho[r] = c * (convolution(rho, r) + rho[r - 1]);
    return rho;
}

namespace {

using Table = std::vector<std::vector<Matrix>>;

Matrix control_weight(const Matrix& B, const Matrix& D) {
    return B * D.ldlt().solve(B.transpose());
}

// Matrix of X -> X At + At^T X + sum Sigma^T X Sigma + sum pi C^T X C.
Matrix noise_operator(const Regime& reg, const Matrix& At) {
    Matrix op = linalg::lyapunov_operator(At);
    for (const auto& S : reg.sigma) linalg::add_congruence(op, S, 1.0);
    for (const auto& mk : reg.marks) linalg::add_congruence(op, mk.C, mk.weight);
    return op;
}

// sum_{q=1}^{r-1} G^(q) S G^(r-q)
Matrix quadratic_convolution(const std::vector<Table>& coeffs, int r, int i, int k,
                             const Matrix& S) {
    const Eigen::Index m = S.rows();
    Matrix out = Matrix::Zero(m, m);
    for (int q = 1; q < r; ++q) out.noalias() += coeffs[q][i][k] * S * coeffs[r - q][i][k];
    return out;
}

double max_norm(const Table& t) {
    double n = 0.0;
    for (const auto& row : t)
        for (const auto& X : row) n = std::max(n, X.norm());
    return n;
}

bool positive_definite_table(const Table& t) {
    for (const auto& row : t)
        for (const auto& X : row)
            if (!(linalg::symmetric_spectrum(X).min > 0.0)) return false;
    return true;
}

void finish(SeriesSolution& sol) {
    sol.L.clear();
    for (const auto& t : sol.coeffs) sol.L.push_back(max_norm(t));
    if (!(sol.L[0] > 0.0)) {
        sol.warnings.push_back("zeroth-order gains vanish; majorant undefined");
        return;
    }
    sol.majorant = majorant_radius(sol.L[0], estimate_majorant_c(sol.L));
    const auto rho = majorant_sequence(sol.L[0], sol.majorant.c, sol.order);
    for (std::size_t r = 0; r < rho.size(); ++r) {
        if (sol.L[r] > rho[r] * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "order " << r << " norm " << sol.L[r] << " exceeds majorant " << rho[r];
            sol.warnings.push_back(os.str());
        }
    }
}

void check_order(int order, double eps) {
    if (order < 0) throw Error("series order must be >= 0");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error("series parameter eps must be >= 0");
}

}  // namespace

SeriesSolution solve_case1(const RegimeSystem& sys, const CostWeights& w, const Matrix& r_rates,
                           double eps, int order) {
    check_order(order, eps);
    const int N = sys.regime_count();
    if (r_rates.rows() != N || r_rates.cols() != N)
        throw DimensionError("r", "expected " + std::to_string(N) + "x" + std::to_string(N));
    if ((sys.Q - eps * r_rates).cwiseAbs().maxCoeff() > 1e-12)
        throw Error("generator Q does not equal eps * r within 1e-12");

    const int K = w.intervals();
    SeriesSolution sol;
    sol.eps = eps;
    sol.order = order;

    RegimeSystem decoupled = sys;
    decoupled.Q = Matrix::Zero(N, N);
    sol.coeffs.push_back(solve_coupled_care(decoupled, w).G);
    if (!positive_definite_table(sol.coeffs[0]))
        sol.warnings.push_back("zeroth-order gains are not positive definite");

    // Per (i, k): the operator is the same at every order.
    std::vector<std::vector<Matrix>> S(N, std::vector<Matrix>(K));
    std::vector<std::vector<Matrix>> op(N, std::vector<Matrix>(K));
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < K; ++k) {
            S[i][k] = control_weight(sys.regimes[i].B, w.D_at(i, k));
            const Matrix At = sys.regimes[i].A - S[i][k] * sol.coeffs[0][i][k];
            op[i][k] = noise_operator(sys.regimes[i], At);
        }

    for (int r = 1; r <= order; ++r) {
        const Table& prev = sol.coeffs[r - 1];
        Table next(N, std::vector<Matrix>(K));
        for (int k = 0; k < K; ++k) {
            for (int i = 0; i < N; ++i) {
                Matrix rhs = quadratic_convolution(sol.coeffs, r, i, k, S[i][k]);
                for (int j = 0; j < N; ++j) {
                    if (j == i || r_rates(i, j) == 0.0) continue;
                    const Matrix& Kij = sys.regime_jump.K[i][j];
                    Matrix t = Kij.transpose() * prev[j][k] * Kij - prev[i][k];
                    for (const auto& Qm : sys.regime_jump.Qs)
                        t.noalias() += Qm.transpose() * prev[j][k] * Qm;
                    rhs -= r_rates(i, j) * t;
                }
                auto X = linalg::solve_vectorized(op[i][k], linalg::symmetrize(rhs));
                if (!X)
                    throw SingularOperator("case I linear operator is singular at order " +
                                               std::to_string(r) + " (regime " +
                                               std::to_string(i) + ")",
                                           r);
                next[i][k] = std::move(*X);
            }
        }
        sol.coeffs.push_back(std::move(next));
    }
    finish(sol);
    return sol;
}

SeriesSolution solve_case2(const RegimeSystem& sys, const CostWeights& w, const Table& K_hat,
                           const std::vector<Matrix>& Q_hat, double eps, int order) {
    check_order(order, eps);
    const int N = sys.regime_count();
    const int m = sys.m;
    if (static_cast<int>(K_hat.size()) != N)
        throw DimensionError("K_hat", "expected " + std::to_string(N) + " rows");
    for (int i = 0; i < N; ++i) {
        if (static_cast<int>(K_hat[i].size()) != N)
            throw DimensionError("K_hat[" + std::to_string(i) + "]",
                                 "expected " + std::to_string(N) + " entries");
        for (int j = 0; j < N; ++j) {
            const std::string field = "K_hat[" + std::to_string(i) + "][" + std::to_string(j) + "]";
            if (K_hat[i][j].rows() != m || K_hat[i][j].cols() != m)
                throw DimensionError(field, "expected " + std::to_string(m) + "x" + std::to_string(m));
            if (i == j) continue;
            const Matrix expected = Matrix::Identity(m, m) + eps * K_hat[i][j];
            if ((sys.regime_jump.K[i][j] - expected).cwiseAbs().maxCoeff() > 1e-12)
                throw Error("K[" + std::to_string(i) + "][" + std::to_string(j) +
                            "] does not equal I + eps * K_hat within 1e-12");
        }
    }
    if (Q_hat.size() != sys.regime_jump.Qs.size())
        throw DimensionError("Q_hat", "expected " + std::to_string(sys.regime_jump.Qs.size()) +
                                          " matrices");
    for (std::size_t s = 0; s < Q_hat.size(); ++s) {
        if (Q_hat[s].rows() != m || Q_hat[s].cols() != m)
            throw DimensionError("Q_hat[" + std::to_string(s) + "]", "wrong shape");
        if ((sys.regime_jump.Qs[s] - eps * Q_hat[s]).cwiseAbs().maxCoeff() > 1e-12)
            throw Error("Qs[" + std::to_string(s) + "] does not equal eps * Q_hat within 1e-12");
    }

    const int K = w.intervals();
    SeriesSolution sol;
    sol.eps = eps;
    sol.order = order;

    RegimeSystem identity_jumps = sys;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) identity_jumps.regime_jump.K[i][j] = Matrix::Identity(m, m);
    identity_jumps.regime_jump.Qs.clear();
    sol.coeffs.push_back(solve_coupled_care(identity_jumps, w).G);
    if (!positive_definite_table(sol.coeffs[0]))
        throw IndefiniteIterate("case II zeroth-order solution is not positive definite");

    const Eigen::Index mm = static_cast<Eigen::Index>(m) * m;
    std::vector<std::vector<Matrix>> S(N, std::vector<Matrix>(K));
    std::vector<Eigen::FullPivLU<Matrix>> lu(K);
    for (int k = 0; k < K; ++k) {
        Matrix op = Matrix::Zero(N * mm, N * mm);
        for (int i = 0; i < N; ++i) {
            S[i][k] = control_weight(sys.regimes[i].B, w.D_at(i, k));
            const Matrix At = sys.regimes[i].A - S[i][k] * sol.coeffs[0][i][k];
            op.block(i * mm, i * mm, mm, mm) = noise_operator(sys.regimes[i], At);
            for (int j = 0; j < N; ++j)
                op.block(i * mm, j * mm, mm, mm).diagonal().array() += sys.Q(i, j);
        }
        lu[k].compute(op);
    }

    for (int r = 1; r <= order; ++r) {
        Table next(N, std::vector<Matrix>(K));
        for (int k = 0; k < K; ++k) {
            Vector rhs(N * mm);
            for (int i = 0; i < N; ++i) {
                Matrix phi = quadratic_convolution(sol.coeffs, r, i, k, S[i][k]);
                for (int j = 0; j < N; ++j) {
                    if (j == i || sys.Q(i, j) == 0.0) continue;
                    const Matrix& Kh = K_hat[i][j];
                    const Matrix& G1 = sol.coeffs[r - 1][j][k];
                    Matrix t = Kh.transpose() * G1 + G1 * Kh;
                    if (r >= 2) {
                        const Matrix& G2 = sol.coeffs[r - 2][j][k];
                        t.noalias() += Kh.transpose() * G2 * Kh;
                        for (const auto& Qm : Q_hat) t.noalias() += Qm.transpose() * G2 * Qm;
                    }
                    phi -= sys.Q(i, j) * t;
                }
                rhs.segment(i * mm, mm) = linalg::vec(linalg::symmetrize(phi));
            }
            const double rcond = lu[k].rcond();
            if (!lu[k].isInvertible() || rcond < 1e3 * std::numeric_limits<double>::epsilon())
                throw SingularOperator("case II joint operator is singular at order " +
                                           std::to_string(r),
                                       r);
            const Vector z = lu[k].solve(rhs);
            for (int i = 0; i < N; ++i)
                next[i][k] = linalg::symmetrize(linalg::unvec(z.segment(i * mm, mm), m, m));
        }
        sol.coeffs.push_back(std::move(next));
    }
    finish(sol);
    return sol;
}

GainSet assemble_series(const SeriesSolution& sol) {
    GainSet out;
    if (sol.coeffs.empty()) return out;
    // Horner in eps from the highest order down.
    out.G = sol.coeffs.back();
    for (int r = static_cast<int>(sol.coeffs.size()) - 2; r >= 0; --r)
        for (std::size_t i = 0; i < out.G.size(); ++i)
            for (std::size_t k = 0; k < out.G[i].size(); ++k)
                out.G[i][k] = sol.coeffs[r][i][k] + sol.eps * out.G[i][k];
    for (auto& row : out.G)
        for (auto& X : row) X = linalg::symmetrize(X);

    out.warnings = sol.warnings;
    if (sol.majorant.radius > 0.0 && sol.eps > sol.majorant.radius) {
        std::ostringstream os;
        os << "eps = " << sol.eps << " exceeds the majorant radius " << sol.majorant.radius;
        out.warnings.push_back(os.str());
    }
    if (!positive_definite(out)) out.warnings.push_back("assembled gains are not positive definite");
    return out;
}

}  // namespace jumpstab
