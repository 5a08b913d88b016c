#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "jumpstab/error.hpp"
#include "jumpstab/perturb.hpp"
#include "test_models.hpp"

using namespace jumpstab;
using Catch::Approx;
using testing_models::mat;
using testing_models::scalar;

namespace {

double table_distance(const std::vector<std::vector<Matrix>>& a,
                      const std::vector<std::vector<Matrix>>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < a[i].size(); ++k) d = std::max(d, (a[i][k] - b[i][k]).norm());
    return d;
}

// Two-regime model with Q = eps * r.
testing_models::TestModel rare_switching(double eps) {
    auto t = testing_models::two_regime_model();
    t.system.Q = eps * testing_models::two_regime_rates();
    return t;
}

// Two-regime model with K = I + eps Khat, Qs = eps Qhat.
testing_models::TestModel small_jumps(double eps, const Matrix& Kh, const Matrix& Qh) {
    auto t = testing_models::two_regime_model();
    const Matrix I = Matrix::Identity(2, 2);
    t.system.regime_jump.K[0][1] = I + eps * Kh;
    t.system.regime_jump.K[1][0] = I + eps * Kh;
    t.system.regime_jump.Qs = {eps * Qh};
    return t;
}

std::vector<std::vector<Matrix>> khat_table(const Matrix& Kh) {
    return {{Matrix::Zero(2, 2), Kh}, {Kh, Matrix::Zero(2, 2)}};
}

double case1_error(double eps, int order) {
    auto t = rare_switching(eps);
    const auto sol = solve_case1(t.system, t.weights, testing_models::two_regime_rates(), eps, order);
    return table_distance(assemble_series(sol).G, solve_coupled_care(t.system, t.weights, {1e-13, 2000, 1.0}).G);
}

double case2_error(double eps, int order, const Matrix& Kh, const Matrix& Qh) {
    auto t = small_jumps(eps, Kh, Qh);
    const auto sol = solve_case2(t.system, t.weights, khat_table(Kh), {Qh}, eps, order);
    return table_distance(assemble_series(sol).G, solve_coupled_care(t.system, t.weights, {1e-13, 2000, 1.0}).G);
}

}  // namespace

TEST_CASE("majorant radius for L0 = c = 1", "[perturb]") {
    const auto mj = majorant_radius(1.0, 1.0);
    REQUIRE(mj.a == Approx(-3.0));
    REQUIRE(mj.b == Approx(2.0));
    REQUIRE(mj.rho0 == Approx(1.0));
    REQUIRE(mj.radius == Approx(3.0 - 2.0 * std::sqrt(2.0)));
    REQUIRE_THROWS_AS(majorant_radius(0.0, 1.0), Error);
}

TEST_CASE("majorant root at eps = 0 is L0 and the radius shrinks with c", "[perturb]") {
    for (double L0 : {0.1, 1.0, 7.0}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double c : {0.01, 0.1, 1.0, 10.0}) {
            const auto mj = majorant_radius(L0, c);
            REQUIRE(mj.rho0 == Approx(L0).epsilon(1e-9));
            REQUIRE(mj.radius > 0.0);
            REQUIRE(mj.radius < prev);
            prev = mj.radius;
            // The discriminant (a + eps)^2 - 4b vanishes at the radius.
            const double ae = mj.a + mj.radius;
            REQUIRE(std::abs(ae * ae - 4.0 * mj.b) < 1e-9 * (1.0 + 4.0 * mj.b));
        }
    }
}

TEST_CASE("majorant sequence matches the Taylor coefficients of the root", "[perturb]") {
    // rho(eps) = -(a + eps)/2 - sqrt((a + eps)^2/4 - b); finite differences of
    // the closed form at 0 give rho_1 and rho_2.
    const double L0 = 0.8, c = 0.5;
    const auto mj = majorant_radius(L0, c);
    auto rho = [&](double e) {
        const double ae = mj.a + e;
        return -ae / 2.0 - std::sqrt(ae * ae / 4.0 - mj.b);
    };
    const auto seq = majorant_sequence(L0, c, 3);
    const double h = 1e-4;
    REQUIRE(seq[0] == Approx(L0));
    REQUIRE(seq[1] == Approx((rho(h) - rho(-h)) / (2 * h)).epsilon(1e-6));
    REQUIRE(seq[2] == Approx((rho(h) - 2 * rho(0) + rho(-h)) / (2 * h * h)).epsilon(1e-4));
}

TEST_CASE("estimated c is the smallest admissible constant", "[perturb]") {
    const std::vector<double> L = {1.0, 0.5, 0.6, 0.4};
    const double c = estimate_majorant_c(L);
    // Binding order is r = 2: 0.6 / (0.5^2 + 0.5).
    REQUIRE(c == Approx(0.8));
    auto admissible = [&](double cc) {
        for (std::size_t r = 1; r < L.size(); ++r) {
            double bracket = L[r - 1];
            for (std::size_t q = 1; q < r; ++q) bracket += L[q] * L[r - q];
            if (L[r] > cc * bracket * (1.0 + 1e-12)) return false;
        }
        return true;
    };
    REQUIRE(admissible(c));
    REQUIRE_FALSE(admissible(0.99 * c));
    // The majorant sequence then dominates every computed norm.
    const auto rho = majorant_sequence(L[0], c, 3);
    for (std::size_t r = 0; r < L.size(); ++r) REQUIRE(L[r] <= rho[r] * (1.0 + 1e-12));
    REQUIRE(estimate_majorant_c({1.0, 0.0, 0.0}) > 0.0);
}

TEST_CASE("case I at eps = 0 reproduces the decoupled scalar root", "[perturb]") {
    auto t = testing_models::scalar_model(-1.0, 1.0);
    const auto sol = solve_case1(t.system, t.weights, Matrix::Zero(1, 1), 0.0, 3);
    REQUIRE(sol.coeffs.size() == 4);
    REQUIRE(sol.coeffs[0][0][0](0, 0) == Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
    for (int r = 1; r <= 3; ++r) REQUIRE(sol.coeffs[r][0][0].norm() == 0.0);
    const auto g = assemble_series(sol);
    REQUIRE(g.G[0][0](0, 0) == Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("case I first-order coefficient solves its linear equation", "[perturb]") {
    // Scalar two-regime model: order 1 gives 2 At_i g1_i + s_i^2 g1_i =
    // -r_ij (k_ij^2 g0_j - g0_i).
    auto t = testing_models::scalar_two_regime_model();
    const Matrix r = t.system.Q;
    const double eps = 0.01;
    t.system.Q = eps * r;
    const auto sol = solve_case1(t.system, t.weights, r, eps, 1);
    const double k[2] = {1.1, 0.8};
    const double a[2] = {-1.0, 0.5}, b[2] = {1.0, 2.0}, d[2] = {1.0, 0.5}, s2[2] = {0.04, 0.0};
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        const double g0i = sol.coeffs[0][i][0](0, 0);
        const double g0j = sol.coeffs[0][j][0](0, 0);
        const double At = a[i] - b[i] * b[i] / d[i] * g0i;
        const double g1 = -r(i, j) * (k[i] * k[i] * g0j - g0i) / (2.0 * At + s2[i]);
        REQUIRE(sol.coeffs[1][i][0](0, 0) == Approx(g1).epsilon(1e-10));
    }
}

TEST_CASE("case I truncation error is third order", "[perturb]") {
    const double e1 = case1_error(0.01, 2);
    const double e2 = case1_error(0.02, 2);
    const double ratio = e2 / e1;
    INFO("errors " << e1 << " " << e2);
    REQUIRE(ratio >= 6.0);
    REQUIRE(ratio <= 10.0);
}

TEST_CASE("case I assembled series agrees with the direct solve", "[perturb]") {
    REQUIRE(case1_error(0.05, 4) < 1e-6);
}

TEST_CASE("case I rejects a generator that is not eps * r", "[perturb]") {
    auto t = rare_switching(0.1);
    REQUIRE_THROWS_AS(solve_case1(t.system, t.weights, testing_models::two_regime_rates(), 0.2, 2), Error);
    REQUIRE_THROWS_AS(solve_case1(t.system, t.weights, Matrix::Zero(3, 3), 0.1, 2), DimensionError);
    REQUIRE_THROWS_AS(solve_case1(t.system, t.weights, testing_models::two_regime_rates(), 0.1, -1), Error);
}

TEST_CASE("case I reports the order of a singular operator", "[perturb]") {
    // A = -1/2, sigma = 1, B = 0, M = 0: G0 = 0 and X -> 2 A X + sigma^2 X
    // is identically zero.
    RegimeSystem sys = RegimeSystem::zeros(1, 1, 2);
    for (auto& reg : sys.regimes) {
        reg.A = scalar(-0.5);
        reg.sigma = {scalar(1.0)};
    }
    sys.regime_jump.K[0][1] = scalar(2.0);
    sys.Q = 0.1 * mat({{-1.0, 1.0}, {1.0, -1.0}});
    const auto w = CostWeights::uniform(2, scalar(0.0), scalar(1.0));
    try {
        solve_case1(sys, w, mat({{-1.0, 1.0}, {1.0, -1.0}}), 0.1, 2);
        FAIL("expected SingularOperator");
    } catch (const SingularOperator& e) {
        REQUIRE(e.order() == 1);
    }
}

TEST_CASE("case II with eps = 0 or zero perturbations has vanishing corrections", "[perturb]") {
    const Matrix Kh = mat({{0.0, 1.0}, {0.0, 0.0}});
    const Matrix Qh = Matrix::Zero(2, 2);
    {
        auto t = small_jumps(0.0, Kh, Qh);
        const auto sol = solve_case2(t.system, t.weights, khat_table(Kh), {Qh}, 0.0, 2);
        const auto direct = solve_coupled_care(t.system, t.weights);
        REQUIRE(table_distance(assemble_series(sol).G, direct.G) < 1e-9);
    }
    {
        const Matrix Z = Matrix::Zero(2, 2);
        auto t = small_jumps(0.1, Z, Z);
        const auto sol = solve_case2(t.system, t.weights, khat_table(Z), {Z}, 0.1, 3);
        for (int r = 1; r <= 3; ++r)
            for (const auto& row : sol.coeffs[r])
                for (const auto& X : row) REQUIRE(X.norm() < 1e-13);
    }
}

TEST_CASE("case II truncation error is third order", "[perturb]") {
    const Matrix Kh = mat({{0.0, 1.0}, {0.0, 0.0}});
    const Matrix Qh = mat({{0.5, 0.0}, {0.0, 0.5}});
    const double e1 = case2_error(0.01, 2, Kh, Qh);
    const double e2 = case2_error(0.02, 2, Kh, Qh);
    INFO("errors " << e1 << " " << e2);
    REQUIRE(e2 / e1 >= 6.0);
    REQUIRE(e2 / e1 <= 10.0);
}

TEST_CASE("scalar two-regime series at eps = 0.05 and R = 4 match the direct solve", "[perturb]") {
    const double eps = 0.05;
    {
        auto t = testing_models::scalar_two_regime_model();
        const Matrix r = t.system.Q;
        t.system.Q = eps * r;
        const auto sol = solve_case1(t.system, t.weights, r, eps, 4);
        const auto direct = solve_coupled_care(t.system, t.weights, {1e-13, 2000, 1.0});
        REQUIRE(table_distance(assemble_series(sol).G, direct.G) < 1e-6);
    }
    {
        auto t = testing_models::scalar_two_regime_model();
        t.system.regime_jump.K[0][1] = scalar(1.0 + eps);
        t.system.regime_jump.K[1][0] = scalar(1.0 + eps);
        const std::vector<std::vector<Matrix>> Kh = {{scalar(0.0), scalar(1.0)}, {scalar(1.0), scalar(0.0)}};
        const auto sol = solve_case2(t.system, t.weights, Kh, {}, eps, 4);
        const auto direct = solve_coupled_care(t.system, t.weights, {1e-13, 2000, 1.0});
        REQUIRE(table_distance(assemble_series(sol).G, direct.G) < 1e-6);
    }
}

TEST_CASE("series error decreases with the order inside half the radius", "[perturb]") {
    auto probe = rare_switching(1e-3);
    const auto sol = solve_case1(probe.system, probe.weights, testing_models::two_regime_rates(), 1e-3, 4);
    const double eps = 0.5 * sol.majorant.radius;
    auto t = rare_switching(eps);
    const auto direct = solve_coupled_care(t.system, t.weights, {1e-13, 2000, 1.0});
    double prev = std::numeric_limits<double>::infinity();
    for (int R = 0; R <= 4; ++R) {
        const auto s = solve_case1(t.system, t.weights, testing_models::two_regime_rates(), eps, R);
        const double err = table_distance(assemble_series(s).G, direct.G);
        INFO("R = " << R << " error " << err);
        REQUIRE((err < prev || err < 1e-11));
        prev = err;
    }
}

TEST_CASE("case II checks the jump parametrization", "[perturb]") {
    const Matrix Kh = mat({{0.0, 1.0}, {0.0, 0.0}});
    const Matrix Qh = Matrix::Identity(2, 2);
    auto t = small_jumps(0.1, Kh, Qh);
    REQUIRE_THROWS_AS(solve_case2(t.system, t.weights, khat_table(Kh), {Qh}, 0.2, 2), Error);
    REQUIRE_THROWS_AS(solve_case2(t.system, t.weights, khat_table(Kh), {}, 0.1, 2), DimensionError);
    REQUIRE_THROWS_AS(solve_case2(t.system, t.weights, {{Kh}}, {Qh}, 0.1, 2), DimensionError);
}

TEST_CASE("series coefficients stay under their majorant", "[perturb]") {
    auto t = rare_switching(0.05);
    const auto sol = solve_case1(t.system, t.weights, testing_models::two_regime_rates(), 0.05, 4);
    REQUIRE(sol.L.size() == 5);
    const auto rho = majorant_sequence(sol.majorant.L0, sol.majorant.c, 4);
    for (std::size_t r = 0; r < rho.size(); ++r) REQUIRE(sol.L[r] <= rho[r] * (1.0 + 1e-12));
    REQUIRE(sol.majorant.rho0 == Approx(sol.L[0]).epsilon(1e-9));
}

TEST_CASE("assembly warns beyond the radius", "[perturb]") {
    SeriesSolution sol;
    sol.coeffs = {{{scalar(1.0)}}, {{scalar(1.0)}}};
    sol.order = 1;
    sol.eps = 0.5;
    sol.majorant = majorant_radius(1.0, 1.0);
    const auto g = assemble_series(sol);
    REQUIRE(g.G[0][0](0, 0) == Approx(1.5));
    REQUIRE(g.warnings.size() == 1);
    REQUIRE(g.warnings[0].find("radius") != std::string::npos);

    sol.coeffs = {{{scalar(1.0)}}, {{scalar(-4.0)}}};
    const auto h = assemble_series(sol);
    REQUIRE(h.warnings.back().find("not positive definite") != std::string::npos);
}
