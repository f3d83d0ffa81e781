#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "irspace/mds.hpp"

namespace irspace {

enum class Reflection { forbid, allow };

/// y = scale * R x + t, applied to row-stored points.
template <typename Scalar>
struct RigidTransform {
    MatrixX<Scalar> rotation;
    VectorX<Scalar> translation;
    Scalar scale = 1;

    static RigidTransform identity(Eigen::Index dim) {
        return {MatrixX<Scalar>::Identity(dim, dim), VectorX<Scalar>::Zero(dim), Scalar(1)};
    }

    template <typename Derived>
    MatrixX<Scalar> apply(const Eigen::MatrixBase<Derived>& points) const {
        MatrixX<Scalar> out = scale * (points * rotation.transpose());
        out.rowwise() += translation.transpose();
        return out;
    }

    RigidTransform inverse() const {
        MatrixX<Scalar> rt = rotation.transpose();
        return {rt, -(rt * translation) / scale, Scalar(1) / scale};
    }
};

/// Least-squares transform carrying `source` rows onto `target` rows
/// (Kabsch/Umeyama). With fewer than two points only a translation is fitted.
template <typename DerivedS, typename DerivedT>
RigidTransform<typename DerivedS::Scalar> fit_rigid(const Eigen::MatrixBase<DerivedS>& source,
                                                    const Eigen::MatrixBase<DerivedT>& target,
                                                    Reflection reflection = Reflection::forbid,
                                                    bool with_scale = false) {
    using Scalar = typename DerivedS::Scalar;
    const Eigen::Index n = source.rows();
    const Eigen::Index d = source.cols();
    auto T = RigidTransform<Scalar>::identity(d);
    if (n == 0) return T;

    VectorX<Scalar> mu_s = source.colwise().mean().transpose();
    VectorX<Scalar> mu_t = target.colwise().mean().transpose();
    if (n < 2) {
        T.translation = mu_t - mu_s;
        return T;
    }
    MatrixX<Scalar> S = source.rowwise() - mu_s.transpose();
    MatrixX<Scalar> Tc = target.rowwise() - mu_t.transpose();
    MatrixX<Scalar> H = S.transpose() * Tc;

    Eigen::JacobiSVD<MatrixX<Scalar>> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    MatrixX<Scalar> U = svd.matrixU();
    MatrixX<Scalar> V = svd.matrixV();
    VectorX<Scalar> sigma = svd.singularValues();
    VectorX<Scalar> sign = VectorX<Scalar>::Ones(d);
    if (reflection == Reflection::forbid && (V * U.transpose()).determinant() < 0) sign(d - 1) = -1;

    T.rotation = V * sign.asDiagonal() * U.transpose();
    if (with_scale) {
        Scalar var = S.squaredNorm();
        T.scale = var > 0 ? sigma.dot(sign) / var : Scalar(1);
    }
    T.translation = mu_t - T.scale * T.rotation * mu_s;
    return T;
}

/// sqrt(mean_i |a_i - b_i|^2) over paired rows.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rms_deviation(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.rows() == 0) return Scalar(0);
    return std::sqrt((a - b).squaredNorm() / Scalar(a.rows()));
}

}  // namespace irspace
