#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "jumpstab/error.hpp"
#include "jumpstab/simulate.hpp"
#include "test_models.hpp"

using namespace jumpstab;
using Catch::Approx;
using testing_models::mat;
using testing_models::scalar;
using testing_models::vec1;

TEST_CASE("frozen dynamics keep the state exactly", "[simulate]") {
    RegimeSystem sys = RegimeSystem::zeros(2, 1, 1);
    Vector x0(2);
    x0 << 1.0, 2.0;
    const auto p = simulate_path(sys, FeedbackLaw::zero(sys), x0, 0, 3.0, 0.1, SeededStream(1, 0));
    REQUIRE(p.x.back() == x0);
    REQUIRE(p.time.back() == 3.0);
    REQUIRE(p.size() == 31);
}

TEST_CASE("deterministic scalar decay matches exp(-t)", "[simulate]") {
    auto t = testing_models::scalar_model(-1.0, 0.0);
    const auto p =
        simulate_path(t.system, FeedbackLaw::zero(t.system), vec1(1.0), 0, 1.0, 1e-4, SeededStream(1, 0));
    REQUIRE(std::abs(p.x.back()(0) - std::exp(-1.0)) <= 5e-4);
    // Euler error is about t e^{-t} dt / 2.
    REQUIRE(std::abs(p.x.back()(0) - std::exp(-1.0)) < 1e-4);
}

TEST_CASE("grid is strictly increasing and x_pre equals x away from events", "[simulate]") {
    auto t = testing_models::two_regime_model();
    t.system.det_switch.times = {0.5, 1.25};
    const auto p = simulate_path(t.system, FeedbackLaw::zero(t.system), Vector::Ones(2), 0, 3.0,
                                 0.1, SeededStream(3, 0));
    for (std::size_t n = 1; n < p.size(); ++n) {
        REQUIRE(p.time[n] > p.time[n - 1]);
        if (p.event_mask[n] == event_none) REQUIRE(p.x_pre[n] == p.x[n]);
        if (!(p.event_mask[n] & event_regime_jump)) REQUIRE(p.regime[n] == p.regime[n - 1]);
        if (!(p.event_mask[n] & event_det_switch)) REQUIRE(p.eta[n] == p.eta[n - 1]);
    }
    // Switch times are grid points, and the interval index steps there.
    for (double ts : t.system.det_switch.times) {
        bool found = false;
        for (std::size_t n = 0; n < p.size(); ++n)
            if (p.time[n] == ts) {
                found = true;
                REQUIRE((p.event_mask[n] & event_det_switch));
            }
        REQUIRE(found);
    }
    REQUIRE(p.interval.back() == 2);
}

TEST_CASE("regime jumps are applied at their exact times with K", "[simulate]") {
    // Frozen dynamics; the only state change is x <- K x at regime jumps.
    RegimeSystem sys = RegimeSystem::zeros(1, 1, 2);
    sys.Q = mat({{-2.0, 2.0}, {2.0, -2.0}});
    sys.regime_jump.K[0][1] = scalar(2.0);
    sys.regime_jump.K[1][0] = scalar(0.25);
    const auto p = simulate_path(sys, FeedbackLaw::zero(sys), vec1(1.0), 0, 5.0, 0.1, SeededStream(4, 0));
    REQUIRE(!p.events.empty());
    double expected = 1.0;
    for (const auto& e : p.events) {
        REQUIRE(e.kind == event_regime_jump);
        expected *= e.detail == 1 ? 2.0 : 0.25;
    }
    REQUIRE(p.x.back()(0) == Approx(expected));
    // Event times are off the dt grid in general.
    bool off_grid = false;
    for (const auto& e : p.events) off_grid |= std::abs(e.time / 0.1 - std::round(e.time / 0.1)) > 1e-6;
    REQUIRE(off_grid);
}

TEST_CASE("deterministic switch applies J of the new eta state", "[simulate]") {
    RegimeSystem sys = RegimeSystem::zeros(1, 1, 1);
    sys.det_switch.times = {1.0, 2.0};
    sys.det_switch.P_H = mat({{0.0, 1.0}, {1.0, 0.0}});
    sys.det_switch.J = {scalar(3.0), scalar(0.5)};
    const auto p = simulate_path(sys, FeedbackLaw::zero(sys), vec1(1.0), 0, 3.0, 0.25, SeededStream(5, 0));
    // eta: 0 -> 1 (J = 0.5) -> 0 (J = 3)
    REQUIRE(p.x.back()(0) == Approx(1.5));
    REQUIRE(p.eta.back() == 0);
}

TEST_CASE("zero Poisson coefficient leaves the trajectory unchanged", "[simulate]") {
    auto a = testing_models::scalar_model(-0.5, 1.0, 0.4);
    auto b = a;
    b.system.regimes[0].marks = {{3.0, scalar(0.0)}};
    FeedbackLaw law;
    law.F = {{scalar(0.3)}};
    const auto pa = simulate_path(a.system, law, vec1(1.0), 0, 2.0, 0.01, SeededStream(6, 0));
    const auto pb = simulate_path(b.system, law, vec1(1.0), 0, 2.0, 0.01, SeededStream(6, 0));
    REQUIRE(pa.x.size() == pb.x.size());
    for (std::size_t n = 0; n < pa.size(); ++n) REQUIRE(pa.x[n] == pb.x[n]);
}

TEST_CASE("batch path p equals a single run with stream id p", "[simulate]") {
    auto t = testing_models::two_regime_model();
    const auto law = FeedbackLaw::zero(t.system);
    const auto batch = simulate_batch(t.system, law, Vector::Ones(2), 1, 2.0, 0.05, 3, 77, 2);
    for (int p = 0; p < 3; ++p) {
        const auto single = simulate_path(t.system, law, Vector::Ones(2), 1, 2.0, 0.05,
                                          SeededStream(77, static_cast<std::uint64_t>(p)));
        REQUIRE(single.time == batch[p].time);
        for (std::size_t n = 0; n < single.size(); ++n) REQUIRE(single.x[n] == batch[p].x[n]);
    }
    const auto again = simulate_batch(t.system, law, Vector::Ones(2), 1, 2.0, 0.05, 3, 77, 1);
    for (int p = 0; p < 3; ++p) REQUIRE(again[p].x.back() == batch[p].x.back());
}

TEST_CASE("driftless geometric noise is a martingale", "[simulate]") {
    auto t = testing_models::scalar_model(0.0, 0.0, 1.0);
    const int n = 1000;
    const auto paths =
        simulate_batch(t.system, FeedbackLaw::zero(t.system), vec1(1.0), 0, 1.0, 0.01, n, 10, 0);
    std::vector<double> xs;
    for (const auto& p : paths) xs.push_back(p.x.back()(0));
    const auto ms = linalg::mean_and_std_error(xs);
    REQUIRE(std::abs(ms.mean - 1.0) <= 3.0 * ms.std_error);
}

TEST_CASE("compensated Poisson jumps keep the mean", "[simulate]") {
    auto t = testing_models::scalar_model(0.0, 0.0);
    t.system.regimes[0].marks = {{2.0, scalar(0.3)}, {1.0, scalar(-0.2)}};
    const int n = 4000;
    const auto paths =
        simulate_batch(t.system, FeedbackLaw::zero(t.system), vec1(1.0), 0, 1.0, 0.01, n, 11, 0);
    std::vector<double> xs;
    int jumps = 0;
    for (const auto& p : paths) {
        xs.push_back(p.x.back()(0));
        jumps += static_cast<int>(p.events.size());
    }
    const auto ms = linalg::mean_and_std_error(xs);
    REQUIRE(std::abs(ms.mean - 1.0) <= 4.0 * ms.std_error);
    REQUIRE(jumps > 0);
}

TEST_CASE("explosion aborts with the divergence time and path index", "[simulate]") {
    auto t = testing_models::scalar_model(2.0, 0.0);
    try {
        simulate_path(t.system, FeedbackLaw::zero(t.system), vec1(1.0), 0, 40.0, 0.01, SeededStream(1, 0));
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        // (1.02)^n > 1e12 first at n = 1396.
        REQUIRE(e.time() == Approx(13.96).margin(0.011));
    }
    try {
        simulate_batch(t.system, FeedbackLaw::zero(t.system), vec1(1.0), 0, 40.0, 0.01, 3, 1, 2);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        REQUIRE(e.path() == 0);
    }
}

TEST_CASE("trajectory CSV has the documented columns", "[simulate]") {
    auto t = testing_models::two_regime_model();
    const auto p = simulate_path(t.system, FeedbackLaw::zero(t.system), Vector::Ones(2), 0, 0.2, 0.1,
                                 SeededStream(1, 0));
    std::ostringstream os;
    write_trajectory_csv(os, p);
    const std::string s = os.str();
    REQUIRE(s.rfind("time,x_0,x_1,regime,eta,u_0,event_kind\n", 0) == 0);
    REQUIRE(s.find("\n0,1,1,0,0,0,none\n") != std::string::npos);
}

TEST_CASE("event mask names", "[simulate]") {
    REQUIRE(event_mask_name(event_none) == "none");
    REQUIRE(event_mask_name(event_poisson | event_det_switch) == "poisson|det_switch");
}

TEST_CASE("parallel_for rethrows the lowest-index failure", "[simulate]") {
    std::vector<int> seen(50, 0);
    try {
        parallel_for(50, 4, [&](int i) {
            seen[static_cast<std::size_t>(i)] = 1;
            if (i == 7 || i == 30) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        REQUIRE(std::string(e.what()) == "7");
    }
    for (int v : seen) REQUIRE(v == 1);
}
