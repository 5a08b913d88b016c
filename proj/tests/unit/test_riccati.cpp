#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "jumpstab/error.hpp"
#include "jumpstab/riccati.hpp"
#include "test_models.hpp"

using namespace jumpstab;
using Catch::Approx;
using testing_models::mat;
using testing_models::scalar;

namespace {

std::vector<std::vector<Matrix>> table1(const std::vector<Matrix>& G) {
    std::vector<std::vector<Matrix>> out;
    for (const auto& X : G) out.push_back({X});
    return out;
}

std::vector<Matrix> column(const GainSet& g) {
    std::vector<Matrix> out;
    for (const auto& row : g.G) out.push_back(row.front());
    return out;
}

}  // namespace

TEST_CASE("residual of the scalar equation at hand-computed points", "[riccati]") {
    auto t = testing_models::scalar_model(-1.0, 1.0);
    // R(G) = -2G - G^2 + 1
    REQUIRE(care_residual(t.system, t.weights, {{scalar(0.0)}})[0][0](0, 0) == Approx(1.0));
    REQUIRE(care_residual(t.system, t.weights, {{scalar(1.0)}})[0][0](0, 0) == Approx(-2.0));
    const double root = std::sqrt(2.0) - 1.0;
    REQUIRE(std::abs(care_residual(t.system, t.weights, {{scalar(root)}})[0][0](0, 0)) < 1e-15);
}

TEST_CASE("residual rejects a mis-shaped gain table", "[riccati]") {
    auto t = testing_models::two_regime_model();
    REQUIRE_THROWS_AS(care_residual(t.system, t.weights, {{Matrix::Identity(2, 2)}}), DimensionError);
    REQUIRE_THROWS_AS(care_residual(t.system, t.weights,
                                    {{Matrix::Identity(3, 3)}, {Matrix::Identity(2, 2)}}),
                      DimensionError);
}

TEST_CASE("residual agrees with the elementwise evaluation", "[riccati]") {
    auto t = testing_models::two_regime_model();
    const std::vector<Matrix> G = {mat({{2.0, 0.3}, {0.3, 1.0}}), mat({{1.5, -0.2}, {-0.2, 0.7}})};
    const auto R = care_residual(t.system, t.weights, table1(G));
    const auto oracle = testing_models::straight_line_residual(t.system, t.weights, G);
    for (int i = 0; i < 2; ++i) REQUIRE((R[i][0] - oracle[i]).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("scalar CARE root", "[riccati]") {
    auto t = testing_models::scalar_model(-1.0, 1.0);
    const auto g = solve_coupled_care(t.system, t.weights);
    REQUIRE(std::abs(g.G[0][0](0, 0) - (std::sqrt(2.0) - 1.0)) < 1e-10);
    REQUIRE(g.max_residual() <= 1e-10);
    REQUIRE(positive_definite(g));

    auto n = testing_models::scalar_model(-1.0, 1.0, 0.3);
    const auto gn = solve_coupled_care(n.system, n.weights);
    REQUIRE(gn.G[0][0](0, 0) == Approx(testing_models::scalar_care_root(-1.0, 0.3)).epsilon(1e-10));
}

TEST_CASE("zero state weight gives the zero solution for a stable drift", "[riccati]") {
    auto t = testing_models::scalar_model(-1.0, 1.0, 0.0, 0.0);
    const auto g = solve_coupled_care(t.system, t.weights);
    REQUIRE(std::abs(g.G[0][0](0, 0)) < 1e-12);
}

TEST_CASE("identical regimes reduce to the single-regime equation", "[riccati]") {
    // With K = I and no Qs, the coupling cancels when G_0 = G_1.
    auto one = testing_models::scalar_model(-0.5, 1.0, 0.2);
    RegimeSystem two = RegimeSystem::zeros(1, 1, 2);
    two.regimes = {one.system.regimes[0], one.system.regimes[0]};
    two.Q = mat({{-3.0, 3.0}, {1.0, -1.0}});
    const auto w = CostWeights::uniform(2, scalar(1.0), scalar(1.0));
    const auto g = solve_coupled_care(two, w);
    const double expected = testing_models::scalar_care_root(-0.5, 0.2);
    REQUIRE(g.G[0][0](0, 0) == Approx(expected).epsilon(1e-10));
    REQUIRE(g.G[1][0](0, 0) == Approx(expected).epsilon(1e-10));
}

TEST_CASE("solution scales linearly with the weights", "[riccati]") {
    auto t = testing_models::two_regime_model();
    const auto g = solve_coupled_care(t.system, t.weights, {1e-12, 500, 1.0});
    auto w2 = t.weights;
    for (auto& row : w2.M)
        for (auto& X : row) X *= 3.0;
    for (auto& row : w2.D)
        for (auto& X : row) X *= 3.0;
    const auto g2 = solve_coupled_care(t.system, w2, {1e-11, 500, 1.0});
    for (int i = 0; i < 2; ++i)
        REQUIRE((g2.G[i][0] - 3.0 * g.G[i][0]).norm() < 1e-9 * g2.G[i][0].norm());
}

TEST_CASE("orthogonal change of coordinates is covariant", "[riccati]") {
    auto t = testing_models::two_regime_model();
    const double c = std::cos(0.7), s = std::sin(0.7);
    const Matrix T = mat({{c, -s}, {s, c}});
    auto u = t;
    for (auto& reg : u.system.regimes) {
        reg.A = T.transpose() * reg.A * T;
        reg.B = T.transpose() * reg.B;
        for (auto& S : reg.sigma) S = T.transpose() * S * T;
        for (auto& mk : reg.marks) mk.C = T.transpose() * mk.C * T;
    }
    for (auto& row : u.system.regime_jump.K)
        for (auto& K : row) K = T.transpose() * K * T;
    for (auto& Qm : u.system.regime_jump.Qs) Qm = T.transpose() * Qm * T;
    for (auto& row : u.weights.M)
        for (auto& X : row) X = T.transpose() * X * T;
    const auto g = solve_coupled_care(t.system, t.weights);
    const auto gu = solve_coupled_care(u.system, u.weights);
    for (int i = 0; i < 2; ++i)
        REQUIRE((gu.G[i][0] - T.transpose() * g.G[i][0] * T).norm() < 1e-8);
}

TEST_CASE("two-regime solution meets the residual tolerance and is stabilizing", "[riccati]") {
    auto t = testing_models::two_regime_model();
    const auto g = solve_coupled_care(t.system, t.weights);
    REQUIRE(g.max_residual() <= 1e-10);
    REQUIRE(positive_definite(g));
    REQUIRE(max_asymmetry(g) < 1e-12);
    const auto oracle = testing_models::straight_line_residual(t.system, t.weights, column(g));
    for (int i = 0; i < 2; ++i) REQUIRE(oracle[i].norm() <= 1e-10 + 1e-12);
    for (int i = 0; i < 2; ++i) {
        const auto& reg = t.system.regimes[i];
        const Matrix Acl = reg.A - reg.B * reg.B.transpose() * g.G[i][0];
        REQUIRE(linalg::is_hurwitz(Acl));
    }
    const auto b = gain_bounds(g);
    for (const auto& row : b)
        for (const auto& x : row) REQUIRE(x.c1 <= x.c2);
}

TEST_CASE("one solve per interval when the weights change with k", "[riccati]") {
    auto t = testing_models::scalar_model(-1.0, 1.0);
    t.weights.M = {{scalar(1.0), scalar(4.0)}};
    t.weights.D = {{scalar(1.0)}};
    const auto g = solve_coupled_care(t.system, t.weights);
    REQUIRE(g.intervals() == 2);
    REQUIRE(g.G[0][0](0, 0) == Approx(std::sqrt(2.0) - 1.0).epsilon(1e-10));
    REQUIRE(g.G[0][1](0, 0) == Approx(std::sqrt(5.0) - 1.0).epsilon(1e-10));
}

TEST_CASE("an uncontrollable unstable regime does not converge", "[riccati]") {
    auto t = testing_models::scalar_model(1.0, 0.0);
    REQUIRE_THROWS_AS(solve_coupled_care(t.system, t.weights), NonConvergence);
}

TEST_CASE("option checks", "[riccati]") {
    auto t = testing_models::scalar_model();
    REQUIRE_THROWS_AS(solve_coupled_care(t.system, t.weights, {0.0, 10, 1.0}), Error);
    REQUIRE_THROWS_AS(solve_coupled_care(t.system, t.weights, {1e-10, 10, 1.5}), Error);
}

TEST_CASE("relaxed iteration reaches the same fixed point", "[riccati]") {
    auto t = testing_models::two_regime_model();
    const auto g = solve_coupled_care(t.system, t.weights);
    const auto gr = solve_coupled_care(t.system, t.weights, {1e-10, 2000, 0.5});
    for (int i = 0; i < 2; ++i) REQUIRE((g.G[i][0] - gr.G[i][0]).norm() < 1e-9);
}

TEST_CASE("Riccati ODE approaches the algebraic solution", "[riccati]") {
    auto t = testing_models::scalar_model(-1.0, 1.0);
    const auto traj = solve_riccati_ode(t.system, t.weights, 20.0, 0.01);
    REQUIRE(traj.times.front() == 0.0);
    REQUIRE(traj.times.back() == 20.0);
    REQUIRE(traj.gains.back().G[0][0](0, 0) == 0.0);
    REQUIRE(std::abs(traj.initial().G[0][0](0, 0) - (std::sqrt(2.0) - 1.0)) < 1e-6);
    REQUIRE(traj.psd);
    // Monotone in the remaining horizon.
    for (std::size_t n = 1; n < traj.times.size(); ++n)
        REQUIRE(traj.gains[n].G[0][0](0, 0) <= traj.gains[n - 1].G[0][0](0, 0) + 1e-15);
}

TEST_CASE("Riccati ODE with zero state weight stays at zero", "[riccati]") {
    auto t = testing_models::two_regime_model();
    for (auto& row : t.weights.M)
        for (auto& X : row) X.setZero();
    const auto traj = solve_riccati_ode(t.system, t.weights, 2.0, 0.05);
    for (const auto& g : traj.gains)
        for (const auto& row : g.G)
            for (const auto& X : row) REQUIRE(X.norm() == 0.0);
}

TEST_CASE("Riccati ODE matches the closed form and converges at fourth order", "[riccati]") {
    // Scalar dG/ds = 1 - 2G - G^2 with G(0) = 0 has
    // G(s) = (1 - e^{-2 sqrt2 s}) / ((1 + sqrt2) + (sqrt2 - 1) e^{-2 sqrt2 s}).
    auto exact = [](double s) {
        const double r = std::sqrt(2.0);
        const double e = std::exp(-2.0 * r * s);
        return (1.0 - e) / ((1.0 + r) + (r - 1.0) * e);
    };
    auto t = testing_models::scalar_model(-1.0, 1.0);
    const double T = 1.0;
    const double e1 = std::abs(solve_riccati_ode(t.system, t.weights, T, 0.1).initial().G[0][0](0, 0) - exact(T));
    const double e2 = std::abs(solve_riccati_ode(t.system, t.weights, T, 0.05).initial().G[0][0](0, 0) - exact(T));
    REQUIRE(e1 < 1e-5);
    REQUIRE(e1 / e2 >= 12.0);
    REQUIRE(e1 / e2 <= 20.0);
}

TEST_CASE("Riccati ODE flags blow-up", "[riccati]") {
    auto t = testing_models::scalar_model(1.0, 0.0);
    RegimeSystem sys = t.system;
    sys.regimes[0].sigma = {scalar(1.0)};
    // B = 0: dG/ds = 3G + 1 grows like e^{3s} and passes 1e12 near s = 9.
    REQUIRE_THROWS_AS(solve_riccati_ode(sys, t.weights, 20.0, 0.01), DivergenceError);
    REQUIRE_THROWS_AS(solve_riccati_ode(sys, t.weights, 0.0, 0.01), Error);
}
