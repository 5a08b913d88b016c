#include "jumpstab/model.hpp"

#include <cmath>
#include <sstream>

#include "jumpstab/error.hpp"

namespace jumpstab {

XiLaw parse_xi_law(std::string_view tag) {
    if (tag == "rademacher") return XiLaw::rademacher;
    if (tag == "standard_normal") return XiLaw::standard_normal;
    throw ParseError("unknown xi_law tag '" + std::string(tag) +
                     "' (expected rademacher or standard_normal)");
}

std::string_view to_string(XiLaw law) {
    switch (law) {
        case XiLaw::rademacher: return "rademacher";
        case XiLaw::standard_normal: return "standard_normal";
    }
    return "rademacher";
}

int DeterministicSwitchSpec::interval_at(double t) const {
    return static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
}

RegimeSystem RegimeSystem::zeros(int m, int r, int N) {
    RegimeSystem s;
    s.m = m;
    s.r = r;
    s.regimes.resize(N);
    for (auto& reg : s.regimes) {
        reg.A = Matrix::Zero(m, m);
        reg.B = Matrix::Zero(m, r);
    }
    s.Q = Matrix::Zero(N, N);
    s.regime_jump.K.assign(N, std::vector<Matrix>(N, Matrix::Identity(m, m)));
    s.det_switch.P_H = Matrix::Identity(1, 1);
    s.det_switch.J = {Matrix::Identity(m, m)};
    return s;
}

CostWeights CostWeights::uniform(int N, const Matrix& M, const Matrix& D) {
    CostWeights w;
    w.M.assign(N, std::vector<Matrix>{M});
    w.D.assign(N, std::vector<Matrix>{D});
    return w;
}

double lipschitz_constant(const RegimeSystem& system) {
    double jump = 0.0;
    for (const auto& J : system.det_switch.J) jump = std::max(jump, linalg::spectral_norm(J));
    double L = 0.0;
    for (const auto& reg : system.regimes) {
        double l = linalg::spectral_norm(reg.A);
        for (const auto& S : reg.sigma) l += linalg::spectral_norm(S);
        for (const auto& mk : reg.marks) l += mk.weight * linalg::spectral_norm(mk.C);
        L = std::max(L, l + jump);
    }
    return L;
}

namespace {

std::string idx(std::string_view name, std::size_t i) {
    return std::string(name) + "[" + std::to_string(i) + "]";
}

std::string idx(std::string_view name, std::size_t i, std::size_t j) {
    return idx(name, i) + "[" + std::to_string(j) + "]";
}

std::string shape(const Matrix& X) {
    return std::to_string(X.rows()) + "x" + std::to_string(X.cols());
}

class Checker {
public:
    explicit Checker(ValidationReport& report) : report_(report) {}

    void fail(std::string location, std::string message) {
        report_.violations.push_back({std::move(location), std::move(message)});
    }

    bool dims(const Matrix& X, Eigen::Index rows, Eigen::Index cols, const std::string& loc) {
        if (X.rows() == rows && X.cols() == cols) return true;
        fail(loc, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                      shape(X));
        return false;
    }

    bool finite(const Matrix& X, const std::string& loc) {
        if (X.allFinite()) return true;
        fail(loc, "non-finite entry");
        return false;
    }

private:
    ValidationReport& report_;
};

}  // namespace

ValidationReport validate(const RegimeSystem& sys, const CostWeights& w,
                          const ValidationOptions& opts) {
    ValidationReport report;
    Checker check(report);
    const int m = sys.m;
    const int r = sys.r;
    const int N = sys.regime_count();

    if (m <= 0) check.fail("m", "state dimension must be positive");
    if (r <= 0) check.fail("r", "control dimension must be positive");
    if (N <= 0) check.fail("N", "need at least one regime");
    if (m <= 0 || r <= 0 || N <= 0) return report;

    bool shapes_ok = true;
    for (int i = 0; i < N; ++i) {
        const auto& reg = sys.regimes[i];
        shapes_ok &= check.dims(reg.A, m, m, idx("A", i)) && check.finite(reg.A, idx("A", i));
        shapes_ok &= check.dims(reg.B, m, r, idx("B", i)) && check.finite(reg.B, idx("B", i));
        for (std::size_t l = 0; l < reg.sigma.size(); ++l)
            shapes_ok &= check.dims(reg.sigma[l], m, m, idx("Sigma", i, l));
        for (std::size_t j = 0; j < reg.marks.size(); ++j) {
            const auto& mk = reg.marks[j];
            shapes_ok &= check.dims(mk.C, m, m, idx("PoissonJump", i, j) + ".C");
            if (!(mk.weight >= 0.0) || !std::isfinite(mk.weight))
                check.fail(idx("PoissonJump", i, j) + ".weight",
                           "mark weight must be finite and >= 0, got " + std::to_string(mk.weight));
        }
    }

    // Generator.
    if (check.dims(sys.Q, N, N, "Q")) {
        for (int i = 0; i < N; ++i) {
            const double row = sys.Q.row(i).sum();
            if (std::abs(row) > opts.generator_tol) {
                std::ostringstream os;
                os << "row " << i << " sums to " << row;
                check.fail("Q", os.str());
            }
            for (int j = 0; j < N; ++j)
                if (i != j && sys.Q(i, j) < 0.0)
                    check.fail(idx("Q", i, j), "off-diagonal intensity must be >= 0");
        }
    }

    // Regime-transition jumps.
    const auto& rj = sys.regime_jump;
    if (static_cast<int>(rj.K.size()) != N) {
        check.fail("regime_jump.K", "expected " + std::to_string(N) + " rows of matrices");
    } else {
        for (int i = 0; i < N; ++i) {
            if (static_cast<int>(rj.K[i].size()) != N) {
                check.fail(idx("regime_jump.K", i), "expected " + std::to_string(N) + " matrices");
                continue;
            }
            for (int j = 0; j < N; ++j) {
                const auto loc = idx("regime_jump.K", i, j);
                if (!check.dims(rj.K[i][j], m, m, loc)) continue;
                if (i == j && !rj.K[i][j].isIdentity(0.0))
                    check.fail(loc, "diagonal jump matrix must be the identity");
            }
        }
    }
    for (std::size_t s = 0; s < rj.Qs.size(); ++s) check.dims(rj.Qs[s], m, m, idx("regime_jump.Qs", s));

    // Deterministic switches.
    const auto& ds = sys.det_switch;
    const int H = ds.states();
    if (H <= 0 || ds.P_H.cols() != H) {
        check.fail("det_switch.P_H", "must be a non-empty square matrix, got " + shape(ds.P_H));
    } else {
        for (int h = 0; h < H; ++h) {
            const double row = ds.P_H.row(h).sum();
            if (std::abs(row - 1.0) > opts.stochastic_tol) {
                std::ostringstream os;
                os << "row " << h << " sums to " << row;
                check.fail("det_switch.P_H", os.str());
            }
            if ((ds.P_H.row(h).array() < 0.0).any())
                check.fail(idx("det_switch.P_H", h), "negative transition probability");
        }
        if (ds.h0 < 0 || ds.h0 >= H)
            check.fail("det_switch.h0", "initial state out of range [0, " + std::to_string(H) + ")");
        if (static_cast<int>(ds.J.size()) != H)
            check.fail("det_switch.J", "expected " + std::to_string(H) + " jump matrices, got " +
                                           std::to_string(ds.J.size()));
        for (std::size_t h = 0; h < ds.J.size(); ++h) check.dims(ds.J[h], m, m, idx("det_switch.J", h));
    }
    double prev = 0.0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ds.times.size(); ++k) {
        const double gap = ds.times[k] - prev;
        if (!(gap > 0.0)) check.fail(idx("det_switch.times", k), "times must be strictly increasing and > 0");
        min_gap = std::min(min_gap, gap);
        report.max_gap = std::max(report.max_gap, gap);
        prev = ds.times[k];
    }
    if (!ds.times.empty()) {
        if (min_gap < opts.min_switch_gap) {
            std::ostringstream os;
            os << "minimum gap " << min_gap << " is below delta = " << opts.min_switch_gap;
            check.fail("det_switch.times", os.str());
        }
        if (report.max_gap > opts.max_switch_gap) {
            std::ostringstream os;
            os << "maximum gap " << report.max_gap << " exceeds Delta = " << opts.max_switch_gap;
            check.fail("det_switch.times", os.str());
        }
    }

    // Cost weights.
    if (static_cast<int>(w.M.size()) != N || static_cast<int>(w.D.size()) != N) {
        check.fail("weights", "expected M and D for each of the " + std::to_string(N) + " regimes");
    } else {
        const int K = w.intervals();
        if (K <= 0) check.fail("weights.M", "no interval entries");
        for (int i = 0; i < N; ++i) {
            if (static_cast<int>(w.M[i].size()) != K || static_cast<int>(w.D[i].size()) != K) {
                check.fail(idx("weights", i), "inconsistent number of interval entries");
                continue;
            }
            for (int k = 0; k < K; ++k) {
                const auto locM = K == 1 ? idx("weights.M", i) : idx("weights.M", i, k);
                const auto locD = K == 1 ? idx("weights.D", i) : idx("weights.D", i, k);
                const Matrix& M = w.M[i][k];
                const Matrix& D = w.D[i][k];
                if (check.dims(M, m, m, locM)) {
                    if (linalg::asymmetry(M) > opts.symmetry_tol) check.fail(locM, "M not symmetric");
                    if (linalg::symmetric_spectrum(M).min < -opts.psd_tol)
                        check.fail(locM, "M not positive semidefinite");
                }
                if (check.dims(D, r, r, locD)) {
                    if (linalg::asymmetry(D) > opts.symmetry_tol) check.fail(locD, "D not symmetric");
                    if (linalg::symmetric_spectrum(D).min < opts.d_min)
                        check.fail(locD, "D not positive definite");
                }
            }
        }
    }

    if (shapes_ok) report.lipschitz = lipschitz_constant(sys);
    return report;
}

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << (ok() ? "ok" : "invalid") << "\n";
    os << "lipschitz_L " << lipschitz << "\n";
    os << "bound_C " << bound_const << "\n";
    os << "max_switch_gap " << max_gap << "\n";
    for (const auto& v : violations) os << "violation " << v.location << ": " << v.message << "\n";
    return os.str();
}

}  // namespace jumpstab
