#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "jumpstab/linalg.hpp"

namespace jumpstab::json_io {

using nlohmann::json;

// Row-major nested arrays of doubles.
json matrix_to_json(const Matrix& X);
Matrix matrix_from_json(const json& j, const std::string& field);

// Depth of nested arrays at the front of `j` (a matrix has depth 2).
int array_depth(const json& j);

// Per-(regime, interval) tables: written as a list of matrices when there is a
// single interval, otherwise as a list (per regime) of lists (per interval).
json table_to_json(const std::vector<std::vector<Matrix>>& table);
std::vector<std::vector<Matrix>> table_from_json(const json& j, const std::string& field);

double number_from_json(const json& j, const std::string& field);

// Formats "line L, column C" for a byte offset into `text`.
std::string describe_position(const std::string& text, std::size_t byte);

}  // namespace jumpstab::json_io
