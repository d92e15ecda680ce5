#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lassopsi/types.hpp"

namespace lassopsi {

/// Reads a numeric CSV. Every row must have the same number of fields;
/// violations raise ErrorCode::Parse with the offending line number.
MatrixXd read_csv_matrix(const std::string& path, bool header = false);

/// Reads a single column (or a single row) of numbers.
VectorXd read_csv_vector(const std::string& path, bool header = false);

void write_csv_matrix(const std::string& path, const MatrixXd& m);

/// 17 significant digits, the shortest form that round-trips any double.
std::string format_double(double v);

nlohmann::json to_json(const VectorXd& v);
nlohmann::json to_json(const MatrixXd& m); // array of rows
nlohmann::json to_json(const IndexSet& s);
VectorXd vector_from_json(const nlohmann::json& j);
IndexSet index_set_from_json(const nlohmann::json& j);

/// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

} // namespace lassopsi
