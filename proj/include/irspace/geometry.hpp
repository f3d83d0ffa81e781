#pragma once

// Metric tensor fields on rectilinear grids, Levi-Civita connection
// coefficients, geodesic integration and curve functionals.
//
// Field evaluation uses the tensor-product quadratic B-spline with knots at
// cell midpoints. Its derivative at a node equals the central difference of
// the node samples, it is C^1 everywhere, and it is a convex combination of
// node samples, so positive-definiteness of the samples carries over to every
// evaluated metric. Connection coefficients are computed from the exact
// derivative of the evaluated field, which makes g(x', x') a first integral of
// the discretised geodesic flow.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "irspace/error.hpp"
#include "irspace/mds.hpp"

namespace irspace {

/// Regular grid: node i on axis a sits at origin[a] + i * spacing[a].
template <typename Scalar>
class Grid {
public:
    using Vector = VectorX<Scalar>;

    Grid() = default;
    Grid(std::vector<int> nodes, Vector origin, Vector spacing)
        : nodes_(std::move(nodes)), origin_(std::move(origin)), spacing_(std::move(spacing)) {
        if (nodes_.empty()) throw ValidationError("grid needs at least one axis");
        if (origin_.size() != dim() || spacing_.size() != dim())
            throw ValidationError("grid origin/spacing size does not match the number of axes");
        for (int a = 0; a < dim(); ++a) {
            if (nodes_[a] < 3) throw ValidationError("grid axis " + std::to_string(a) + " needs >= 3 nodes");
            if (!(spacing_(a) > 0)) throw ValidationError("grid spacing must be positive");
        }
    }

    /// Grid with `nodes` nodes per axis spanning [lo, hi] exactly.
    static Grid spanning(const Vector& lo, const Vector& hi, const std::vector<int>& nodes) {
        Vector spacing(lo.size());
        for (Eigen::Index a = 0; a < lo.size(); ++a) spacing(a) = (hi(a) - lo(a)) / Scalar(nodes[a] - 1);
        return Grid(nodes, lo, spacing);
    }

    int dim() const { return static_cast<int>(nodes_.size()); }
    int nodes(int axis) const { return nodes_[axis]; }
    const std::vector<int>& node_counts() const { return nodes_; }
    const Vector& origin() const { return origin_; }
    const Vector& spacing() const { return spacing_; }

    std::size_t size() const {
        std::size_t s = 1;
        for (int n : nodes_) s *= static_cast<std::size_t>(n);
        return s;
    }

    /// Axis 0 varies fastest.
    std::size_t flatten(const std::vector<int>& idx) const {
        std::size_t flat = 0;
        for (int a = dim() - 1; a >= 0; --a) flat = flat * static_cast<std::size_t>(nodes_[a]) + static_cast<std::size_t>(idx[a]);
        return flat;
    }

    std::vector<int> unflatten(std::size_t flat) const {
        std::vector<int> idx(nodes_.size());
        for (int a = 0; a < dim(); ++a) {
            idx[a] = static_cast<int>(flat % static_cast<std::size_t>(nodes_[a]));
            flat /= static_cast<std::size_t>(nodes_[a]);
        }
        return idx;
    }

    Vector position(const std::vector<int>& idx) const {
        Vector x(dim());
        for (int a = 0; a < dim(); ++a) x(a) = origin_(a) + Scalar(idx[a]) * spacing_(a);
        return x;
    }
    Vector position(std::size_t flat) const { return position(unflatten(flat)); }

    /// At least one cell away from the boundary on every axis.
    bool interior(const Vector& x) const {
        if (x.size() != dim()) return false;
        for (int a = 0; a < dim(); ++a) {
            if (!std::isfinite(x(a))) return false;
            const Scalar lo = origin_(a) + spacing_(a);
            const Scalar hi = origin_(a) + Scalar(nodes_[a] - 2) * spacing_(a);
            if (x(a) < lo || x(a) > hi) return false;
        }
        return true;
    }

    /// Inside the region where the three-node evaluation stencil exists.
    bool supported(const Vector& x) const {
        if (x.size() != dim()) return false;
        for (int a = 0; a < dim(); ++a) {
            if (!std::isfinite(x(a))) return false;
            const Scalar u = (x(a) - origin_(a)) / spacing_(a);
            if (u < Scalar(0.5) || u > Scalar(nodes_[a]) - Scalar(1.5)) return false;
        }
        return true;
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.nodes_ == b.nodes_ && a.origin_ == b.origin_ && a.spacing_ == b.spacing_;
    }

private:
    std::vector<int> nodes_;
    Vector origin_;
    Vector spacing_;
};

/// Symmetrises and raises every eigenvalue below `floor` to `floor`.
template <typename Scalar>
MatrixX<Scalar> floor_eigenvalues(const MatrixX<Scalar>& m, Scalar floor) {
    MatrixX<Scalar> s = Scalar(0.5) * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(s);
    if (eig.eigenvalues().minCoeff() >= floor) return s;
    // Slight overshoot keeps the recomputed minimum at or above the floor after rounding.
    const Scalar target = floor * (Scalar(1) + Scalar(1e-9));
    VectorX<Scalar> lam = eig.eigenvalues().cwiseMax(target);
    MatrixX<Scalar> out = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
    out = Scalar(0.5) * (out + out.transpose());
    Scalar got = Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>>(out, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (got < floor) out += Scalar(2) * (floor - got) * MatrixX<Scalar>::Identity(m.rows(), m.cols());
    return out;
}

/// Smallest eigenvalue of a symmetric matrix.
template <typename Scalar>
Scalar min_eigenvalue(const MatrixX<Scalar>& m) {
    return Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

/// Grid-sampled symmetric positive-definite tensor field g_ik.
template <typename Scalar>
class MetricField {
public:
    using Vector = VectorX<Scalar>;
    using Matrix = MatrixX<Scalar>;

    MetricField() = default;

    /// Samples are floored at eps_pd.
    MetricField(Grid<Scalar> grid, std::vector<Matrix> samples, Scalar eps_pd)
        : grid_(std::move(grid)), samples_(std::move(samples)), eps_pd_(eps_pd) {
        if (samples_.size() != grid_.size()) throw ValidationError("metric field needs one sample per grid node");
        if (!(eps_pd_ > 0)) throw ValidationError("eps_pd must be positive");
        for (auto& s : samples_) {
            if (s.rows() != grid_.dim() || s.cols() != grid_.dim())
                throw ValidationError("metric sample has the wrong shape");
            if (!s.allFinite()) throw NumericError("metric sample is not finite");
            s = floor_eigenvalues<Scalar>(s, eps_pd_);
        }
    }

    /// Samples f at every node.
    template <typename F>
    static MetricField from_function(Grid<Scalar> grid, F&& f, Scalar eps_pd) {
        std::vector<Matrix> samples;
        samples.reserve(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) samples.push_back(f(grid.position(i)));
        return MetricField(std::move(grid), std::move(samples), eps_pd);
    }

    int dim() const { return grid_.dim(); }
    const Grid<Scalar>& grid() const { return grid_; }
    const std::vector<Matrix>& samples() const { return samples_; }
    const Matrix& sample(std::size_t node) const { return samples_[node]; }
    Scalar eps_pd() const { return eps_pd_; }
    bool interior(const Vector& x) const { return grid_.interior(x); }

    /// Field value and, when dg is non-null, its partial derivatives dg[k] = dg/dx_k.
    void evaluate(const Vector& x, Matrix& g, std::vector<Matrix>* dg) const {
        const int m = dim();
        if (!grid_.supported(x)) throw BoundaryError("point lies outside the metric field's grid");
        std::vector<int> base(static_cast<std::size_t>(m));
        std::vector<std::array<Scalar, 3>> w(static_cast<std::size_t>(m)), dw(static_cast<std::size_t>(m));
        for (int a = 0; a < m; ++a) {
            const Scalar u = (x(a) - grid_.origin()(a)) / grid_.spacing()(a);
            int i = static_cast<int>(std::floor(u + Scalar(0.5)));
            i = std::clamp(i, 1, grid_.nodes(a) - 2);
            const Scalar f = u - Scalar(i);
            const Scalar inv_h = Scalar(1) / grid_.spacing()(a);
            base[a] = i;
            w[a] = {Scalar(0.5) * (Scalar(0.5) - f) * (Scalar(0.5) - f), Scalar(0.75) - f * f,
                    Scalar(0.5) * (Scalar(0.5) + f) * (Scalar(0.5) + f)};
            dw[a] = {(f - Scalar(0.5)) * inv_h, Scalar(-2) * f * inv_h, (Scalar(0.5) + f) * inv_h};
        }
        g = Matrix::Zero(m, m);
        if (dg) dg->assign(static_cast<std::size_t>(m), Matrix::Zero(m, m));

        std::vector<int> offset(static_cast<std::size_t>(m), 0), idx(static_cast<std::size_t>(m));
        std::size_t combos = 1;
        for (int a = 0; a < m; ++a) combos *= 3;
        for (std::size_t c = 0; c < combos; ++c) {
            std::size_t rest = c;
            Scalar weight = 1;
            for (int a = 0; a < m; ++a) {
                offset[a] = static_cast<int>(rest % 3);
                rest /= 3;
                idx[a] = base[a] + offset[a] - 1;
                weight *= w[a][offset[a]];
            }
            const Matrix& s = samples_[grid_.flatten(idx)];
            g.noalias() += weight * s;
            if (dg) {
                for (int k = 0; k < m; ++k) {
                    Scalar dk = dw[k][offset[k]];
                    for (int a = 0; a < m; ++a)
                        if (a != k) dk *= w[a][offset[a]];
                    (*dg)[k].noalias() += dk * s;
                }
            }
        }
    }

    Matrix metric(const Vector& x) const {
        Matrix g;
        evaluate(x, g, nullptr);
        return g;
    }

private:
    Grid<Scalar> grid_;
    std::vector<Matrix> samples_;
    Scalar eps_pd_ = Scalar(1e-4);
};

/// Connection coefficients Γ^j_{kl} at one point.
template <typename Scalar>
class Christoffel {
public:
    explicit Christoffel(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim * dim * dim), Scalar(0)) {}

    int dim() const { return dim_; }
    Scalar& operator()(int j, int k, int l) { return data_[index(j, k, l)]; }
    Scalar operator()(int j, int k, int l) const { return data_[index(j, k, l)]; }

    /// Γ^j_{kl} v^k v^l.
    VectorX<Scalar> contract(const VectorX<Scalar>& v) const {
        VectorX<Scalar> out = VectorX<Scalar>::Zero(dim_);
        for (int j = 0; j < dim_; ++j)
            for (int k = 0; k < dim_; ++k)
                for (int l = 0; l < dim_; ++l) out(j) += (*this)(j, k, l) * v(k) * v(l);
        return out;
    }

private:
    std::size_t index(int j, int k, int l) const { return static_cast<std::size_t>((j * dim_ + k) * dim_ + l); }

    int dim_;
    std::vector<Scalar> data_;
};

namespace detail {

template <typename Scalar>
Eigen::LLT<MatrixX<Scalar>> factor_metric(const MatrixX<Scalar>& g) {
    Eigen::LLT<MatrixX<Scalar>> llt(g);
    if (llt.info() != Eigen::Success) throw NumericError("interpolated metric is not positive-definite");
    return llt;
}

}  // namespace detail

/// Γ^j_{kl} = 1/2 g^{jm} (∂_k g_{ml} + ∂_l g_{mk} - ∂_m g_{kl}).
/// Works with any field exposing dim(), interior(x) and evaluate(x, g, &dg).
template <typename Field, typename Scalar = typename Field::Vector::Scalar>
Christoffel<Scalar> christoffel(const Field& field, const std::type_identity_t<VectorX<Scalar>>& x) {
    if (!field.interior(x)) throw BoundaryError("christoffel: point is outside the grid interior");
    const int m = field.dim();
    MatrixX<Scalar> g;
    std::vector<MatrixX<Scalar>> dg;
    field.evaluate(x, g, &dg);
    auto llt = detail::factor_metric(g);

    Christoffel<Scalar> gamma(m);
    VectorX<Scalar> first(m);
    for (int k = 0; k < m; ++k)
        for (int l = k; l < m; ++l) {
            for (int r = 0; r < m; ++r) first(r) = Scalar(0.5) * (dg[k](r, l) + dg[l](r, k) - dg[r](k, l));
            VectorX<Scalar> second = llt.solve(first);
            for (int j = 0; j < m; ++j) gamma(j, k, l) = gamma(j, l, k) = second(j);
        }
    return gamma;
}

/// -Γ^j_{kl} v^k v^l without forming the full tensor.
template <typename Field, typename Scalar = typename Field::Vector::Scalar>
VectorX<Scalar> geodesic_acceleration(const Field& field, const std::type_identity_t<VectorX<Scalar>>& x,
                                      const std::type_identity_t<VectorX<Scalar>>& v) {
    const int m = field.dim();
    MatrixX<Scalar> g;
    std::vector<MatrixX<Scalar>> dg;
    field.evaluate(x, g, &dg);
    VectorX<Scalar> w = VectorX<Scalar>::Zero(m);
    for (int k = 0; k < m; ++k) w.noalias() += v(k) * (dg[k] * v);
    for (int r = 0; r < m; ++r) w(r) -= Scalar(0.5) * v.dot(dg[r] * v);
    return -detail::factor_metric(g).solve(w);
}

enum class TrajectoryKind { geodesic, observed };

template <typename Scalar>
struct Trajectory {
    struct Sample {
        Scalar t;
        VectorX<Scalar> x;
        VectorX<Scalar> v;
    };
    std::vector<Sample> samples;
    TrajectoryKind kind = TrajectoryKind::geodesic;

    std::size_t size() const { return samples.size(); }
};

/// Trajectory through observed points (rows) at the given times, with
/// velocities by finite differences (central inside, one-sided at the ends).
template <typename Scalar>
Trajectory<Scalar> observed_trajectory(const MatrixX<Scalar>& points, const VectorX<Scalar>& times) {
    const Eigen::Index n = points.rows();
    if (n < 2) throw ValidationError("an observed trajectory needs at least 2 points");
    if (times.size() != n) throw ValidationError("one time per observed point is required");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(times(i) > times(i - 1))) throw ValidationError("observation times must increase");
    Trajectory<Scalar> out;
    out.kind = TrajectoryKind::observed;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(i - 1, 0), hi = std::min<Eigen::Index>(i + 1, n - 1);
        VectorX<Scalar> v = (points.row(hi) - points.row(lo)).transpose() / (times(hi) - times(lo));
        out.samples.push_back({times(i), points.row(i).transpose(), std::move(v)});
    }
    return out;
}

enum class GeodesicStatus { completed, left_domain, diverged };

inline const char* to_string(GeodesicStatus s) {
    switch (s) {
        case GeodesicStatus::completed: return "completed";
        case GeodesicStatus::left_domain: return "left_domain";
        case GeodesicStatus::diverged: return "diverged";
    }
    return "completed";
}

template <typename Scalar>
struct GeodesicResult {
    Trajectory<Scalar> trajectory;
    GeodesicStatus status = GeodesicStatus::completed;
    std::string message;
};

/// Classical RK4 on (x, v) for x'' = -Γ(x)(x', x'), one sample per step.
/// Stops early (keeping every sample recorded so far) when a stage point
/// leaves the grid interior or the state becomes non-finite. Throws
/// BoundaryError when x0 itself is not interior.
template <typename Field, typename Scalar = typename Field::Vector::Scalar>
GeodesicResult<Scalar> integrate_geodesic(const Field& field, const std::type_identity_t<VectorX<Scalar>>& x0,
                                          const std::type_identity_t<VectorX<Scalar>>& v0, std::type_identity_t<Scalar> T,
                                          std::type_identity_t<Scalar> h) {
    const int m = field.dim();
    if (x0.size() != m || v0.size() != m) throw ValidationError("geodesic start has the wrong dimension");
    if (!(h > 0) || !(T > 0)) throw ValidationError("geodesic step and span must be positive");
    if (!field.interior(x0)) throw BoundaryError("geodesic start point is outside the grid interior");

    GeodesicResult<Scalar> result;
    auto& samples = result.trajectory.samples;
    samples.push_back({Scalar(0), x0, v0});

    const auto steps = static_cast<long>(std::ceil(T / h - Scalar(1e-9)));
    VectorX<Scalar> x = x0, v = v0;
    Scalar t = 0;
    try {
        for (long i = 0; i < steps; ++i) {
            const Scalar t_next = (i + 1 == steps) ? T : Scalar(i + 1) * h;
            const Scalar dt = t_next - t;
            auto accel = [&](const VectorX<Scalar>& p, const VectorX<Scalar>& q, bool& ok) -> VectorX<Scalar> {
                ok = field.interior(p);
                if (!ok) return VectorX<Scalar>();
                return geodesic_acceleration(field, p, q);
            };
            bool ok = true;
            VectorX<Scalar> a1 = accel(x, v, ok);
            if (!ok) { result.status = GeodesicStatus::left_domain; break; }
            VectorX<Scalar> x2 = x + Scalar(0.5) * dt * v, v2 = v + Scalar(0.5) * dt * a1;
            VectorX<Scalar> a2 = accel(x2, v2, ok);
            if (!ok) { result.status = GeodesicStatus::left_domain; break; }
            VectorX<Scalar> x3 = x + Scalar(0.5) * dt * v2, v3 = v + Scalar(0.5) * dt * a2;
            VectorX<Scalar> a3 = accel(x3, v3, ok);
            if (!ok) { result.status = GeodesicStatus::left_domain; break; }
            VectorX<Scalar> x4 = x + dt * v3, v4 = v + dt * a3;
            VectorX<Scalar> a4 = accel(x4, v4, ok);
            if (!ok) { result.status = GeodesicStatus::left_domain; break; }

            VectorX<Scalar> xn = x + dt / Scalar(6) * (v + Scalar(2) * v2 + Scalar(2) * v3 + v4);
            VectorX<Scalar> vn = v + dt / Scalar(6) * (a1 + Scalar(2) * a2 + Scalar(2) * a3 + a4);
            if (!xn.allFinite() || !vn.allFinite()) {
                result.status = GeodesicStatus::diverged;
                result.message = "non-finite state at t = " + std::to_string(double(t_next));
                break;
            }
            if (!field.interior(xn)) { result.status = GeodesicStatus::left_domain; break; }
            x = std::move(xn);
            v = std::move(vn);
            t = t_next;
            samples.push_back({t, x, v});
        }
    } catch (const NumericError& e) {
        result.status = GeodesicStatus::diverged;
        result.message = e.what();
    }
    if (result.status == GeodesicStatus::left_domain)
        result.message = "left the grid interior after t = " + std::to_string(double(t));
    return result;
}

namespace detail {

template <typename Field, typename Scalar, typename Integrand>
Scalar trapezoid(const Field& field, const Trajectory<Scalar>& curve, Integrand&& f) {
    if (curve.size() < 2) throw ValidationError("degenerate curve: fewer than 2 samples");
    Scalar total = 0, prev = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const auto& s = curve.samples[i];
        if (!field.interior(s.x)) throw BoundaryError("curve sample outside the grid interior");
        MatrixX<Scalar> g;
        field.evaluate(s.x, g, nullptr);
        const Scalar value = f(s.v.dot(g * s.v));
        if (i > 0) total += Scalar(0.5) * (value + prev) * (s.t - curve.samples[i - 1].t);
        prev = value;
    }
    return total;
}

}  // namespace detail

/// Trapezoidal ∫ g(x', x') dt.
template <typename Field, typename Scalar = typename Field::Vector::Scalar>
Scalar curve_energy(const Field& field, const Trajectory<Scalar>& curve) {
    return detail::trapezoid(field, curve, [](Scalar q) { return q; });
}

/// Trapezoidal ∫ sqrt(g(x', x')) dt.
template <typename Field, typename Scalar = typename Field::Vector::Scalar>
Scalar curve_length(const Field& field, const Trajectory<Scalar>& curve) {
    return detail::trapezoid(field, curve, [](Scalar q) { return std::sqrt(std::max(q, Scalar(0))); });
}

}  // namespace irspace
