#include "irspace/metric_fit.hpp"

#include <algorithm>
#include <cmath>

#include "irspace/error.hpp"

namespace irspace {

namespace {

constexpr double kCutoffBandwidths = 3.0;
constexpr double kMinWeight = 1e-12;

struct PreparedEdge {
    Eigen::VectorXd mid;
    Eigen::VectorXd phi;  // coefficients of the upper-triangle unknowns
    double target = 0.0;  // d^2
};

// Upper-triangle unknown u <-> (j, k), row-major.
std::vector<std::pair<int, int>> upper_pairs(int m) {
    std::vector<std::pair<int, int>> pairs;
    for (int j = 0; j < m; ++j)
        for (int k = j; k < m; ++k) pairs.emplace_back(j, k);
    return pairs;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    double hi = *mid;
    double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace

void FitOptions::validate() const {
    if (nodes_per_axis < 4) throw ValidationError("fit.nodes_per_axis must be >= 4");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("fit.lambda must be >= 0");
    if (!(eps_pd_relative > 0.0)) throw ValidationError("fit.eps_pd_relative must be > 0");
    if (eps_pd && !(*eps_pd > 0.0)) throw ValidationError("fit.eps_pd must be > 0");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ValidationError("fit.bandwidth must be > 0");
    if (!(min_support >= 0.0) || !std::isfinite(min_support)) throw ValidationError("fit.min_support must be >= 0");
    if (!(min_conditioning >= 0.0) || !(min_conditioning < 1.0))
        throw ValidationError("fit.min_conditioning must be in [0, 1)");
}

Grid<double> grid_for(const EmbeddedSpace& space, int nodes_per_axis) {
    if (space.coords.rows() == 0) throw ValidationError("cannot build a grid over an empty space");
    const int m = space.n + 1;
    std::vector<int> nodes(static_cast<std::size_t>(m));
    Eigen::VectorXd origin(m), spacing(m);
    for (int a = 0; a < space.n; ++a) {
        const double lo = space.coords.col(a).minCoeff();
        const double hi = space.coords.col(a).maxCoeff();
        double h = (hi - lo) / double(nodes_per_axis - 3);
        if (!(h > 1e-12)) h = 1.0;
        nodes[a] = nodes_per_axis;
        spacing(a) = h;
        origin(a) = lo - h;
    }
    const int layers = static_cast<int>(std::lround(space.coords.col(space.n).maxCoeff())) + 1;
    nodes[space.n] = layers + 2;
    spacing(space.n) = 1.0;
    origin(space.n) = -1.0;
    return Grid<double>(nodes, origin, spacing);
}

FitResult fit_metric_field(const Grid<double>& grid, const Eigen::MatrixXd& coords,
                           const std::vector<SpaceEdge>& edges, const FitOptions& opts) {
    opts.validate();
    const int m = grid.dim();
    if (coords.cols() != m) throw ValidationError("coordinates do not match the grid dimension");
    if (edges.empty()) throw ValidationError("metric fitting needs at least one edge");

    const auto pairs = upper_pairs(m);
    const auto U = static_cast<Eigen::Index>(pairs.size());

    std::vector<PreparedEdge> prepared;
    prepared.reserve(edges.size());
    for (const auto& e : edges) {
        Eigen::VectorXd xa = coords.row(static_cast<Eigen::Index>(e.a)).transpose();
        Eigen::VectorXd xb = coords.row(static_cast<Eigen::Index>(e.b)).transpose();
        Eigen::VectorXd dx = xb - xa;
        PreparedEdge p;
        p.mid = 0.5 * (xa + xb);
        p.phi.resize(U);
        for (Eigen::Index u = 0; u < U; ++u) {
            auto [j, k] = pairs[static_cast<std::size_t>(u)];
            p.phi(u) = dx(j) * dx(k) * (j == k ? 1.0 : 2.0);
        }
        p.target = e.distance * e.distance;
        prepared.push_back(std::move(p));
    }

    Eigen::VectorXd inv_bw(m);
    for (int a = 0; a < m; ++a) inv_bw(a) = 1.0 / (opts.bandwidth * grid.spacing()(a));
    const double cutoff2 = kCutoffBandwidths * kCutoffBandwidths;

    Eigen::VectorXd identity_params(U), frob(U);
    for (Eigen::Index u = 0; u < U; ++u) {
        auto [j, k] = pairs[static_cast<std::size_t>(u)];
        identity_params(u) = j == k ? 1.0 : 0.0;
        frob(u) = j == k ? 1.0 : 2.0;
    }

    FitReport report;
    report.status.resize(grid.size());
    report.weight.resize(grid.size(), 0.0);
    std::vector<Eigen::MatrixXd> raw(grid.size(), Eigen::MatrixXd::Identity(m, m));
    std::vector<double> eigenvalues;

    Eigen::MatrixXd A(U, U);
    Eigen::VectorXd b(U);
    for (std::size_t node = 0; node < grid.size(); ++node) {
        const Eigen::VectorXd c = grid.position(node);
        A.setZero();
        b.setZero();
        double total = 0.0;
        for (const auto& p : prepared) {
            double r2 = (p.mid - c).cwiseProduct(inv_bw).squaredNorm();
            if (r2 > cutoff2) continue;
            double w = std::exp(-0.5 * r2);
            A.selfadjointView<Eigen::Lower>().rankUpdate(p.phi, w);
            b.noalias() += (w * p.target) * p.phi;
            total += w;
        }
        report.weight[node] = total;
        if (total < kMinWeight || total < opts.min_support * double(U)) {
            report.status[node] = NodeFit::no_data;
            continue;
        }
        A = A.selfadjointView<Eigen::Lower>();
        {
            // edges whose directions leave some entry of G undetermined
            Eigen::VectorXd scale = A.diagonal().cwiseMax(kMinWeight).cwiseSqrt().cwiseInverse();
            Eigen::MatrixXd C = scale.asDiagonal() * A * scale.asDiagonal();
            auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C, Eigen::EigenvaluesOnly).eigenvalues();
            if (!(ev.minCoeff() >= opts.min_conditioning * ev.maxCoeff())) {
                report.status[node] = NodeFit::degenerate;
                continue;
            }
        }
        if (opts.lambda > 0.0) {
            const double amax = A.diagonal().maxCoeff();
            Eigen::VectorXd s = A.diagonal().cwiseMax(1e-9 * amax);
            Eigen::VectorXd reg = opts.lambda * s.cwiseProduct(frob);
            A.diagonal() += reg;
            b += reg.cwiseProduct(identity_params);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(A, Eigen::EigenvaluesOnly);
        const double emax = spectrum.eigenvalues().maxCoeff();
        if (!(emax > 0.0) || spectrum.eigenvalues().minCoeff() <= 1e-12 * emax) {
            report.status[node] = NodeFit::degenerate;
            continue;
        }
        Eigen::VectorXd params = A.ldlt().solve(b);
        if (!params.allFinite()) {
            report.status[node] = NodeFit::degenerate;
            continue;
        }
        Eigen::MatrixXd G(m, m);
        for (Eigen::Index u = 0; u < U; ++u) {
            auto [j, k] = pairs[static_cast<std::size_t>(u)];
            G(j, k) = G(k, j) = params(u);
        }
        raw[node] = G;
        report.status[node] = NodeFit::fitted;
        auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues();
        for (Eigen::Index i = 0; i < ev.size(); ++i) eigenvalues.push_back(ev(i));
    }

    for (auto s : report.status) {
        if (s == NodeFit::fitted) ++report.fitted;
        else if (s == NodeFit::no_data) ++report.no_data;
        else ++report.degenerate;
    }

    double eps = 0.0;
    if (opts.eps_pd) {
        eps = *opts.eps_pd;
    } else {
        double med = median(eigenvalues);
        if (!(med > 0.0)) med = 1.0;
        eps = opts.eps_pd_relative * med;
    }
    report.eps_pd = eps;
    return {MetricField<double>(grid, std::move(raw), eps), std::move(report)};
}

FitResult fit_metric_field(const EmbeddedSpace& space, const FitOptions& opts) {
    opts.validate();
    if (space.edges.empty()) throw ValidationError("metric fitting needs at least one thread or knn edge");
    return fit_metric_field(grid_for(space, opts.nodes_per_axis), space.coords, space.edges, opts);
}

}  // namespace irspace
