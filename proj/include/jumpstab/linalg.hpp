#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

namespace jumpstab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

// Column-major vec(): vec(A X B) = (B^T kron A) vec(X).
Vector vec(const Matrix& X);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);
Matrix kron(const Matrix& A, const Matrix& B);

// Small dense kernels for the per-step simulation loops; plain loops beat the
// general Eigen product dispatch at m of a few units.

// x^T M y
inline double bilinear_form(const Matrix& M, const Vector& x, const Vector& y) {
    const Eigen::Index rows = M.rows();
    const Eigen::Index cols = M.cols();
    const double* a = M.data();
    double s = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        double col = 0.0;
        for (Eigen::Index i = 0; i < rows; ++i) col += x[i] * a[j * rows + i];
        s += col * y[j];
    }
    return s;
}

// out = alpha A x (accumulate = false) or out += alpha A x.
inline void gemv_small(Vector& out, const Matrix& A, const Vector& x, double alpha,
                       bool accumulate) {
    const Eigen::Index rows = A.rows();
    const Eigen::Index cols = A.cols();
    const double* a = A.data();
    double* o = out.data();
    if (!accumulate)
        for (Eigen::Index i = 0; i < rows; ++i) o[i] = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double xj = alpha * x[j];
        for (Eigen::Index i = 0; i < rows; ++i) o[i] += a[j * rows + i] * xj;
    }
}

inline Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

double spectral_norm(const Matrix& X);
double asymmetry(const Matrix& X);  // max |X - X^T| entry

struct SymmetricSpectrum {
    double min = 0.0;
    double max = 0.0;
};
SymmetricSpectrum symmetric_spectrum(const Matrix& X);

bool is_hurwitz(const Matrix& A);
double spectral_abscissa(const Matrix& A);

// Adds the matrix of X -> C^T X C, scaled by w, to an m^2 x m^2 operator.
void add_congruence(Matrix& op, const Matrix& C, double weight);

// Matrix of X -> X A + A^T X acting on vec(X).
Matrix lyapunov_operator(const Matrix& A);

// Solves op * vec(X) = vec(rhs) for square X; returns nullopt when op is
// numerically singular. The result is symmetrized.
std::optional<Matrix> solve_vectorized(const Matrix& op, const Matrix& rhs);

// Stabilizing solution X of  X A + A^T X - X S X + Q = 0  via the matrix sign
// function of the Hamiltonian. Returns nullopt if the iteration breaks down
// (eigenvalues on or near the imaginary axis).
std::optional<Matrix> care_sign(const Matrix& A, const Matrix& S, const Matrix& Q);

// Newton-Kleinman for the same equation starting from X0; the closed loop
// A - S X0 must be Hurwitz. Returns nullopt when an iterate loses stability.
std::optional<Matrix> care_newton_kleinman(const Matrix& A, const Matrix& S, const Matrix& Q,
                                           const Matrix& X0, int max_iter = 60);

// Pairwise summation; fixed association order for a given length.
double pairwise_sum(std::span<const double> v);

struct MeanStd {
    double mean = 0.0;
    double std_error = 0.0;
};
MeanStd mean_and_std_error(std::span<const double> v);

}  // namespace linalg
}  // namespace jumpstab
