#pragma once

#include <filesystem>
#include <string>

#include "jumpstab/cost.hpp"
#include "jumpstab/json_matrix.hpp"
#include "jumpstab/perturb.hpp"
#include "jumpstab/riccati.hpp"
#include "jumpstab/simulate.hpp"

namespace jumpstab::json_io {

// {"G": ..., "residual": [[...]], "tol": ..., "iterations": ..., "warnings": [...]}
json gains_to_json(const GainSet& gains);
GainSet gains_from_json(const json& j);
GainSet load_gains(const std::filesystem::path& path);

// {"F": ...} with the same nesting as G.
json feedback_to_json(const FeedbackLaw& law);

// Coefficients as {"coeffs": [table per order], "eps", "order", "L", "majorant"}.
json series_to_json(const SeriesSolution& sol);

json cost_to_json(const CostEstimate& est);
json comparison_to_json(const CostComparison& cmp);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace jumpstab::json_io
