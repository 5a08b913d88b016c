#include "jumpstab/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "jumpstab/error.hpp"

namespace jumpstab::json_io {

json gains_to_json(const GainSet& gains) {
    json j;
    j["G"] = table_to_json(gains.G);
    j["residual"] = gains.residual;
    j["tol"] = gains.tol;
    j["iterations"] = gains.iterations;
    j["warnings"] = gains.warnings;
    return j;
}

GainSet gains_from_json(const json& j) {
    if (!j.is_object() || !j.contains("G")) throw ParseError("gains: missing field 'G'");
    GainSet g;
    g.G = table_from_json(j["G"], "G");
    if (g.G.empty()) throw DimensionError("G", "no regimes");
    const auto K = g.G.front().size();
    for (std::size_t i = 0; i < g.G.size(); ++i) {
        if (g.G[i].size() != K)
            throw DimensionError("G[" + std::to_string(i) + "]", "interval count differs");
        for (const auto& X : g.G[i])
            if (X.rows() != X.cols())
                throw DimensionError("G[" + std::to_string(i) + "]", "matrix is not square");
    }
    try {
        if (j.contains("residual")) g.residual = j["residual"].get<std::vector<std::vector<double>>>();
        if (j.contains("tol")) g.tol = j["tol"].get<double>();
        if (j.contains("iterations")) g.iterations = j["iterations"].get<int>();
        if (j.contains("warnings")) g.warnings = j["warnings"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("gains: ") + e.what());
    }
    return g;
}

GainSet load_gains(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + describe_position(text, e.byte) + ": " + e.what());
    }
    return gains_from_json(j);
}

json feedback_to_json(const FeedbackLaw& law) { return {{"F", table_to_json(law.F)}}; }

json series_to_json(const SeriesSolution& sol) {
    json coeffs = json::array();
    for (const auto& t : sol.coeffs) coeffs.push_back(table_to_json(t));
    const auto& mj = sol.majorant;
    return {{"coeffs", std::move(coeffs)},
            {"eps", sol.eps},
            {"order", sol.order},
            {"L", sol.L},
            {"majorant",
             {{"L0", mj.L0}, {"c", mj.c}, {"a", mj.a}, {"b", mj.b}, {"rho0", mj.rho0},
              {"radius", mj.radius}}},
            {"warnings", sol.warnings}};
}

namespace {

// JSON has no infinity; an unbounded tail is written as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json cost_to_json(const CostEstimate& est) {
    return {{"mean", est.mean},
            {"std_error", est.std_error},
            {"n_paths", est.n_paths},
            {"n_diverged", est.n_diverged},
            {"T", est.T},
            {"dt", est.dt},
            {"tail_estimate", finite_or_null(est.tail_estimate)}};
}

json comparison_to_json(const CostComparison& cmp) {
    return {{"a", cost_to_json(cmp.a)},
            {"b", cost_to_json(cmp.b)},
            {"difference",
             {{"mean", cmp.diff_mean},
              {"std_error", cmp.diff_std_error},
              {"ci95", {cmp.ci_low, cmp.ci_high}}}}};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace jumpstab::json_io
