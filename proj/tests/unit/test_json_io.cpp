#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <limits>

#include "jumpstab/error.hpp"
#include "jumpstab/json_io.hpp"
#include "test_models.hpp"

using namespace jumpstab;
using json_io::json;
using testing_models::mat;
using testing_models::scalar;

TEST_CASE("gain sets round-trip bit-exactly", "[json_io]") {
    GainSet g;
    g.G = {{mat({{0.1, 1.0 / 3.0}, {1.0 / 3.0, 2.0}})}, {mat({{std::sqrt(2.0), 0.0}, {0.0, 1e-300}})}};
    g.residual = {{1e-12}, {3e-11}};
    g.tol = 1e-10;
    g.iterations = 7;
    g.warnings = {"note"};
    const auto back = json_io::gains_from_json(json::parse(json_io::gains_to_json(g).dump()));
    REQUIRE(back.G.size() == 2);
    for (int i = 0; i < 2; ++i) REQUIRE(back.G[i][0] == g.G[i][0]);
    REQUIRE(back.residual == g.residual);
    REQUIRE(back.tol == g.tol);
    REQUIRE(back.iterations == 7);
    REQUIRE(back.warnings == g.warnings);
}

TEST_CASE("gain files load from disk", "[json_io]") {
    const auto path = std::filesystem::temp_directory_path() / "jumpstab_gains_test.json";
    GainSet g;
    g.G = {{scalar(0.41421356237309515)}};
    json_io::write_text_file(path, json_io::gains_to_json(g).dump());
    const auto back = json_io::load_gains(path);
    REQUIRE(back.G[0][0](0, 0) == 0.41421356237309515);
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(json_io::load_gains(path), IoError);
    REQUIRE_THROWS_AS(json_io::read_text_file(path), IoError);
}

TEST_CASE("malformed gain JSON is rejected", "[json_io]") {
    REQUIRE_THROWS_AS(json_io::gains_from_json(json::parse(R"({"residual": []})")), ParseError);
    REQUIRE_THROWS_AS(json_io::gains_from_json(json::parse(R"({"G": [[[[1, 2], [3]]]]})")), DimensionError);
}

TEST_CASE("cost JSON writes an infinite tail as null", "[json_io]") {
    CostEstimate e;
    e.mean = 1.5;
    e.tail_estimate = std::numeric_limits<double>::infinity();
    const auto j = json_io::cost_to_json(e);
    REQUIRE(j.at("mean").get<double>() == 1.5);
    REQUIRE(j.at("tail_estimate").is_null());
}

TEST_CASE("comparison JSON carries the confidence interval", "[json_io]") {
    CostComparison c;
    c.diff_mean = -0.1;
    c.ci_low = -0.2;
    c.ci_high = 0.0;
    const auto j = json_io::comparison_to_json(c);
    REQUIRE(j.at("difference").at("ci95").at(0).get<double>() == -0.2);
    REQUIRE(j.contains("a"));
    REQUIRE(j.contains("b"));
}

TEST_CASE("feedback and series JSON shapes", "[json_io]") {
    FeedbackLaw law;
    // A single interval is written without the interval level.
    law.F = {{mat({{1.0, 2.0}})}};
    const auto jf = json_io::feedback_to_json(law);
    REQUIRE(jf.at("F").at(0).at(0).at(1).get<double>() == 2.0);

    SeriesSolution s;
    s.coeffs = {{{scalar(1.0)}}, {{scalar(0.5)}}};
    s.order = 1;
    s.eps = 0.1;
    s.L = {1.0, 0.5};
    const auto js = json_io::series_to_json(s);
    REQUIRE(js.at("coeffs").size() == 2);
    REQUIRE(js.at("order").get<int>() == 1);
    REQUIRE(js.contains("majorant"));
}
