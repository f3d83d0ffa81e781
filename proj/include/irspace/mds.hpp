#pragma once

// Metric multidimensional scaling: classical (Torgerson) initialisation and
// stress majorization (Guttman transform iterations, unit weights).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace irspace {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Pairwise Euclidean distances between the rows of X.
template <typename Derived>
MatrixX<typename Derived::Scalar> pairwise_distances(const Eigen::MatrixBase<Derived>& X) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = X.rows();
    MatrixX<Scalar> D = MatrixX<Scalar>::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) D(i, j) = D(j, i) = (X.row(i) - X.row(j)).norm();
    return D;
}

/// sum_{i<j} (d_ij - |x_i - x_j|)^2 / sum_{i<j} d_ij^2. When every target
/// distance is zero the raw squared mismatch is returned instead.
template <typename DerivedD, typename DerivedX>
typename DerivedD::Scalar normalized_stress(const Eigen::MatrixBase<DerivedD>& D,
                                            const Eigen::MatrixBase<DerivedX>& X) {
    using Scalar = typename DerivedD::Scalar;
    const Eigen::Index n = D.rows();
    Scalar num = 0, den = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            Scalar e = (X.row(i) - X.row(j)).norm();
            Scalar r = D(i, j) - e;
            num += r * r;
            den += D(i, j) * D(i, j);
        }
    return den > 0 ? num / den : num;
}

/// Torgerson scaling into `dim` coordinates. Eigenvector signs are fixed so
/// the largest-magnitude component is positive. Axes whose eigenvalue is not
/// positive would trap the majorization in a lower-dimensional subspace, so
/// when the classical solution is not already exact those axes are filled
/// with small seeded noise.
template <typename Scalar>
MatrixX<Scalar> classical_scaling(const MatrixX<Scalar>& D, int dim, std::uint64_t seed) {
    const Eigen::Index n = D.rows();
    MatrixX<Scalar> X = MatrixX<Scalar>::Zero(n, dim);
    if (n == 0) return X;

    MatrixX<Scalar> D2 = D.array().square().matrix();
    MatrixX<Scalar> J = MatrixX<Scalar>::Identity(n, n) - MatrixX<Scalar>::Constant(n, n, Scalar(1) / Scalar(n));
    MatrixX<Scalar> B = Scalar(-0.5) * J * D2 * J;
    B = Scalar(0.5) * (B + B.transpose());

    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(B);
    const auto& values = eig.eigenvalues();   // ascending
    const auto& vectors = eig.eigenvectors();
    const Scalar top = std::max(values(n - 1), Scalar(0));

    std::vector<int> null_axes;
    for (int a = 0; a < dim; ++a) {
        const Eigen::Index k = n - 1 - a;
        if (k < 0 || values(k) <= Scalar(1e-12) * std::max(top, Scalar(1e-300))) {
            null_axes.push_back(a);
            continue;
        }
        VectorX<Scalar> v = vectors.col(k);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        X.col(a) = v * std::sqrt(values(k));
    }

    if (!null_axes.empty() && normalized_stress(D, X) > Scalar(1e-12)) {
        Scalar rms = 0;
        Eigen::Index pairs = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j, ++pairs) rms += D(i, j) * D(i, j);
        rms = pairs > 0 ? std::sqrt(rms / Scalar(pairs)) : Scalar(1);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int a : null_axes)
            for (Eigen::Index i = 0; i < n; ++i) X(i, a) = Scalar(1e-2) * rms * Scalar(gauss(rng));
    }
    return X;
}

struct MajorizationOptions {
    int max_iters = 1000;
    double tolerance = 1e-10;  // relative stress decrease that ends the iteration
};

template <typename Scalar>
struct MajorizationResult {
    MatrixX<Scalar> X;
    std::vector<Scalar> stress_history;  // index 0 is the starting configuration
    int iterations = 0;
    bool converged = false;

    Scalar stress() const { return stress_history.back(); }
};

/// Iterates X <- B(X) X / n, which never increases stress.
template <typename Scalar>
MajorizationResult<Scalar> stress_majorization(const MatrixX<Scalar>& D, MatrixX<Scalar> X,
                                               const MajorizationOptions& opts = {}) {
    const Eigen::Index n = D.rows();
    MajorizationResult<Scalar> result;
    result.stress_history.push_back(normalized_stress(D, X));
    if (n < 2) {
        result.X = std::move(X);
        result.converged = true;
        return result;
    }

    MatrixX<Scalar> Bm(n, n);
    for (int it = 0; it < opts.max_iters; ++it) {
        const Scalar prev = result.stress_history.back();
        if (prev <= std::numeric_limits<Scalar>::min()) {
            result.converged = true;
            break;
        }
        Bm.setZero();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                Scalar e = (X.row(i) - X.row(j)).norm();
                Scalar b = e > 0 ? -D(i, j) / e : Scalar(0);
                Bm(i, j) = Bm(j, i) = b;
            }
        for (Eigen::Index i = 0; i < n; ++i) Bm(i, i) = -Bm.row(i).sum();
        X = (Bm * X) / Scalar(n);
        const Scalar next = normalized_stress(D, X);
        result.stress_history.push_back(next);
        result.iterations = it + 1;
        if (prev - next <= Scalar(opts.tolerance) * prev) {
            result.converged = true;
            break;
        }
    }
    result.X = std::move(X);
    return result;
}

}  // namespace irspace
