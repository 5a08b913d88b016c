#include "jumpstab/linalg.hpp"

#include <cmath>
#include <limits>

namespace jumpstab::linalg {

Vector vec(const Matrix& X) {
    return Eigen::Map<const Vector>(X.data(), X.size());
}

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

double spectral_norm(const Matrix& X) {
    if (X.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(X);
    return svd.singularValues()(0);
}

double asymmetry(const Matrix& X) {
    if (X.size() == 0) return 0.0;
    return (X - X.transpose()).cwiseAbs().maxCoeff();
}

SymmetricSpectrum symmetric_spectrum(const Matrix& X) {
    if (X.size() == 0) return {};
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

double spectral_abscissa(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, false);
    return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Matrix& A) { return spectral_abscissa(A) < 0.0; }

void add_congruence(Matrix& op, const Matrix& C, double weight) {
    // vec(C^T X C) = (C^T kron C^T) vec(X)
    const Matrix Ct = C.transpose();
    op += weight * kron(Ct, Ct);
}

Matrix lyapunov_operator(const Matrix& A) {
    const auto m = A.rows();
    const Matrix I = Matrix::Identity(m, m);
    // vec(X A) = (A^T kron I) vec X ; vec(A^T X) = (I kron A^T) vec X
    return kron(A.transpose(), I) + kron(I, A.transpose());
}

std::optional<Matrix> solve_vectorized(const Matrix& op, const Matrix& rhs) {
    Eigen::FullPivLU<Matrix> lu(op);
    if (!lu.isInvertible()) return std::nullopt;
    if (lu.rcond() < 1e3 * std::numeric_limits<double>::epsilon()) return std::nullopt;
    Vector x = lu.solve(vec(rhs));
    if (!x.allFinite()) return std::nullopt;
    return symmetrize(unvec(x, rhs.rows(), rhs.cols()));
}

std::optional<Matrix> care_sign(const Matrix& A, const Matrix& S, const Matrix& Q) {
    const auto n = A.rows();
    Matrix Z(2 * n, 2 * n);
    Z << A, -S, -Q, -A.transpose();
    const Matrix I2 = Matrix::Identity(2 * n, 2 * n);

    bool converged = false;
    double last_change = std::numeric_limits<double>::infinity();
    bool scale = true;
    for (int it = 0; it < 200; ++it) {
        Eigen::PartialPivLU<Matrix> lu(Z);
        double c = 1.0;
        if (scale) {
            const double det = lu.determinant();
            if (!std::isfinite(det) || det == 0.0) return std::nullopt;
            c = std::pow(std::abs(det), 1.0 / static_cast<double>(2 * n));
        }
        const Matrix Zinv = lu.inverse();
        Matrix Znext = 0.5 * (Z / c + c * Zinv);
        if (!Znext.allFinite()) return std::nullopt;
        const double change = (Znext - Z).norm() / std::max(1.0, Znext.norm());
        Z = std::move(Znext);
        if (change < 1e-2) scale = false;  // determinant scaling only helps early on
        if (change <= 1e-14 || (change < 1e-8 && change >= last_change)) {
            converged = true;
            break;
        }
        last_change = change;
    }
    if (!converged) return std::nullopt;

    // Stable invariant subspace span[I; X] lies in ker(Z + I).
    const Matrix W = Z + I2;
    Matrix lhs(2 * n, n);
    lhs << W.topRightCorner(n, n), W.bottomRightCorner(n, n);
    Matrix rhs(2 * n, n);
    rhs << W.topLeftCorner(n, n), W.bottomLeftCorner(n, n);
    Matrix X = lhs.colPivHouseholderQr().solve(-rhs);
    if (!X.allFinite()) return std::nullopt;
    return symmetrize(X);
}

std::optional<Matrix> care_newton_kleinman(const Matrix& A, const Matrix& S, const Matrix& Q,
                                           const Matrix& X0, int max_iter) {
    Matrix X = X0;
    for (int it = 0; it < max_iter; ++it) {
        const Matrix Acl = A - S * X;
        if (!is_hurwitz(Acl)) return std::nullopt;
        // X+ Acl + Acl^T X+ = -(Q + X S X)
        auto next = solve_vectorized(lyapunov_operator(Acl), -(Q + X * S * X));
        if (!next) return std::nullopt;
        const double change = (*next - X).norm();
        X = std::move(*next);
        if (change <= 1e-14 * std::max(1.0, X.norm())) break;
    }
    return X;
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const auto half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanStd mean_and_std_error(std::span<const double> v) {
    MeanStd out;
    if (v.empty()) return out;
    const double n = static_cast<double>(v.size());
    out.mean = pairwise_sum(v) / n;
    if (v.size() < 2) return out;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / (n - 1.0);
    out.std_error = std::sqrt(var / n);
    return out;
}

}  // namespace jumpstab::linalg
