#include "lassopsi/types.hpp"

#include <algorithm>

namespace lassopsi {

IndexSet complement(const IndexSet& set, int p) {
    IndexSet out;
    out.reserve(p - static_cast<int>(set.size()));
    auto it = set.begin();
    for (int j = 0; j < p; ++j) {
        if (it != set.end() && *it == j) {
            ++it;
            continue;
        }
        out.push_back(j);
    }
    return out;
}

MatrixXd take_rows(const MatrixXd& m, const IndexSet& rows) {
    MatrixXd out(rows.size(), m.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = m.row(rows[i]);
    return out;
}

MatrixXd take_cols(const MatrixXd& m, const IndexSet& cols) {
    MatrixXd out(m.rows(), cols.size());
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = m.col(cols[j]);
    return out;
}

VectorXd take(const VectorXd& v, const IndexSet& idx) {
    VectorXd out(idx.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = v[idx[i]];
    return out;
}

VectorXd sign_of(const VectorXd& v) {
    return v.unaryExpr([](double x) { return static_cast<double>((x > 0) - (x < 0)); });
}

} // namespace lassopsi
