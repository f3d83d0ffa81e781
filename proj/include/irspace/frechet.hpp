#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace irspace {

/// Discrete Fréchet distance between two polylines stored as rows.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar discrete_frechet(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    const Eigen::Index n = a.rows(), m = b.rows();
    if (n == 0 || m == 0) return std::numeric_limits<Scalar>::infinity();

    // Rolling row of the coupling table.
    std::vector<Scalar> prev(static_cast<std::size_t>(m)), cur(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const Scalar d = (a.row(i) - b.row(j)).norm();
            Scalar best;
            if (i == 0 && j == 0) {
                best = d;
            } else if (i == 0) {
                best = std::max(cur[j - 1], d);
            } else if (j == 0) {
                best = std::max(prev[0], d);
            } else {
                best = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
            }
            cur[j] = best;
        }
        std::swap(prev, cur);
    }
    return prev[static_cast<std::size_t>(m - 1)];
}

}  // namespace irspace
