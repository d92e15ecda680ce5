#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace lassopsi {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Sorted, duplicate-free feature indices (0-based).
using IndexSet = std::vector<int>;

IndexSet complement(const IndexSet& set, int p);

// Rows `rows` of `m`.
MatrixXd take_rows(const MatrixXd& m, const IndexSet& rows);
// Columns `cols` of `m`.
MatrixXd take_cols(const MatrixXd& m, const IndexSet& cols);
VectorXd take(const VectorXd& v, const IndexSet& idx);

// Sign vector with entries in {-1, 0, +1}.
VectorXd sign_of(const VectorXd& v);

} // namespace lassopsi
