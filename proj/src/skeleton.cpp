#include "irspace/skeleton.hpp"

#include <algorithm>
#include <random>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "irspace/error.hpp"
#include "irspace/mds.hpp"
#include "irspace/procrustes.hpp"

namespace irspace {

Skeleton link_nearest_neighbors(const LayeredPreSpace& prespace, std::size_t k) {
    if (k < 1) throw ValidationError("nearest-neighbour count k must be >= 1");
    Skeleton sk;
    sk.k = k;
    sk.thread_edges = prespace.thread_edges;
    sk.ranked.resize(prespace.layers.size());

    std::set<std::pair<PointId, PointId>> seen;
    for (std::size_t t = 0; t < prespace.layers.size(); ++t) {
        const auto& layer = prespace.layers[t];
        const auto size = static_cast<std::uint32_t>(layer.points.size());
        sk.points.insert(sk.points.end(), layer.points.begin(), layer.points.end());
        auto& ranked = sk.ranked[t];
        ranked.resize(size);
        for (std::uint32_t i = 0; i < size; ++i) {
            auto& order = ranked[i];
            for (std::uint32_t j = 0; j < size; ++j)
                if (j != i) order.push_back(j);
            // Points within a layer are stored by ascending id, so index order is id order.
            std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
                return layer.distances(i, a) < layer.distances(i, b);
            });
            const std::size_t take = std::min<std::size_t>(k, order.size());
            for (std::size_t r = 0; r < take; ++r) {
                std::uint32_t j = order[r];
                PointId a = layer.points[std::min(i, j)], b = layer.points[std::max(i, j)];
                if (seen.insert({a, b}).second) sk.knn_edges.push_back({a, b, layer.distances(i, j)});
            }
        }
    }
    std::sort(sk.knn_edges.begin(), sk.knn_edges.end(), [](const KnnEdge& x, const KnnEdge& y) {
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    });
    return sk;
}

Skeleton form_simplices(Skeleton skeleton, int n) {
    if (n < 1) throw ValidationError("simplex dimension n must be >= 1");
    std::set<Cell> cells;
    std::size_t offset = 0;
    for (const auto& layer_ranked : skeleton.ranked) {
        const std::size_t size = layer_ranked.size();
        for (std::size_t i = 0; i < size; ++i) {
            const auto& order = layer_ranked[i];
            if (order.size() < static_cast<std::size_t>(n)) continue;
            Cell cell{skeleton.points[offset + i]};
            for (int r = 0; r < n; ++r) cell.push_back(skeleton.points[offset + order[static_cast<std::size_t>(r)]]);
            std::sort(cell.begin(), cell.end());
            cells.insert(std::move(cell));
        }
        offset += size;
    }
    skeleton.cells.assign(cells.begin(), cells.end());
    return skeleton;
}

std::optional<std::size_t> EmbeddedSpace::row_of(PointId p) const {
    // points are layer-major and ascending by stream inside a layer
    auto less = [](const PointId& x, const PointId& y) {
        return std::tie(x.pos, x.stream) < std::tie(y.pos, y.stream);
    };
    auto it = std::lower_bound(points.begin(), points.end(), p, less);
    if (it == points.end() || *it != p) return std::nullopt;
    return static_cast<std::size_t>(it - points.begin());
}

std::string EmbeddedSpace::label(std::size_t row) const {
    const auto& p = points.at(row);
    return stream_ids.at(p.stream) + ":" + std::to_string(p.pos);
}

const Thread* EmbeddedSpace::thread(const std::string& stream_id) const {
    for (const auto& t : threads)
        if (t.stream_id == stream_id) return &t;
    return nullptr;
}

MajorizationResult<double> embed_distances(const Eigen::MatrixXd& D, int n, const EmbedOptions& opts,
                                           std::uint64_t seed) {
    if (opts.restarts < 0) throw ValidationError("embed.restarts must be >= 0");
    MajorizationOptions mopts;
    mopts.max_iters = opts.max_iters;
    mopts.tolerance = opts.tolerance;
    auto best = stress_majorization<double>(D, classical_scaling<double>(D, n, seed), mopts);

    const Eigen::Index N = D.rows();
    if (N < 3 || best.stress() <= 0.0) return best;
    double spread = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = i + 1; j < N; ++j) spread += D(i, j);
    spread /= double(N * (N - 1) / 2);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> U(-spread, spread);
    for (int r = 0; r < opts.restarts; ++r) {
        Eigen::MatrixXd X0(N, n);
        for (Eigen::Index i = 0; i < N; ++i)
            for (int a = 0; a < n; ++a) X0(i, a) = U(rng);
        auto res = stress_majorization<double>(D, std::move(X0), mopts);
        if (res.stress() < best.stress()) best = std::move(res);
    }
    return best;
}

EmbeddedSpace embed_layers(const LayeredPreSpace& prespace, const Skeleton& skeleton, int n,
                           const EmbedOptions& opts) {
    if (n < 1) throw ValidationError("spatial dimension n must be >= 1");
    if (opts.max_iters < 0) throw ValidationError("embed.max_iters must be >= 0");
    for (std::size_t t = 0; t < prespace.layers.size(); ++t)
        if (prespace.layers[t].points.empty())
            throw ValidationError("layer " + std::to_string(t) + " is empty");

    EmbeddedSpace space;
    space.n = n;
    space.stream_ids = prespace.stream_ids;
    const std::size_t L = prespace.layers.size();
    for (const auto& layer : prespace.layers)
        space.points.insert(space.points.end(), layer.points.begin(), layer.points.end());
    space.coords = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(space.points.size()), n + 1);

    std::vector<Eigen::MatrixXd> layer_coords(L);
    for (std::size_t t = 0; t < L; ++t) {
        const auto& D = prespace.layers[t].distances;
        auto res = embed_distances(D, n, opts, opts.seed + t);
        layer_coords[t] = std::move(res.X);
        space.stress_per_layer.push_back(std::max(0.0, res.stress()));
        space.converged.push_back(res.converged);
        space.stress_history.push_back(std::move(res.stress_history));
    }

    // Chain alignments: pair the t-th click of each stream with its (t-1)-th click.
    std::size_t row = 0;
    for (std::size_t t = 0; t < L; ++t) {
        const auto& layer = prespace.layers[t];
        Eigen::MatrixXd& X = layer_coords[t];
        if (t > 0) {
            const auto& prev_layer = prespace.layers[t - 1];
            const Eigen::MatrixXd& prev = layer_coords[t - 1];
            std::vector<Eigen::Index> here, there;
            for (std::size_t i = 0; i < layer.points.size(); ++i) {
                PointId p = layer.points[i];
                if (auto j = prev_layer.index_of({p.stream, p.pos - 1})) {
                    here.push_back(static_cast<Eigen::Index>(i));
                    there.push_back(static_cast<Eigen::Index>(*j));
                }
            }
            if (!here.empty()) {
                Eigen::MatrixXd src(static_cast<Eigen::Index>(here.size()), n), dst(src.rows(), n);
                for (std::size_t r = 0; r < here.size(); ++r) {
                    src.row(static_cast<Eigen::Index>(r)) = X.row(here[r]);
                    dst.row(static_cast<Eigen::Index>(r)) = prev.row(there[r]);
                }
                auto T = fit_rigid(src, dst, Reflection::allow);
                X = T.apply(X);
            }
        }
        for (Eigen::Index i = 0; i < X.rows(); ++i, ++row) {
            space.coords.row(static_cast<Eigen::Index>(row)).head(n) = X.row(i);
            space.coords(static_cast<Eigen::Index>(row), n) = static_cast<double>(t);
        }
    }

    for (std::uint32_t s = 0; s < space.stream_ids.size(); ++s) {
        Thread th{space.stream_ids[s], {}};
        for (std::uint32_t pos = 0;; ++pos) {
            auto r = space.row_of({s, pos});
            if (!r) break;
            th.rows.push_back(*r);
        }
        space.threads.push_back(std::move(th));
    }

    for (const auto& cell : skeleton.cells) {
        std::vector<std::size_t> rows;
        for (const auto& p : cell) {
            auto r = space.row_of(p);
            if (!r) throw ValidationError("skeleton cell references a point missing from the pre-space");
            rows.push_back(*r);
        }
        space.cells.push_back(std::move(rows));
    }

    auto add_edge = [&](PointId a, PointId b, double d, EdgeKind kind) {
        auto ra = space.row_of(a), rb = space.row_of(b);
        if (!ra || !rb) throw ValidationError("skeleton edge references a point missing from the pre-space");
        space.edges.push_back({*ra, *rb, d, kind});
    };
    for (const auto& e : skeleton.thread_edges) add_edge(e.from, e.to, e.distance, EdgeKind::thread);
    for (const auto& e : skeleton.knn_edges) add_edge(e.a, e.b, e.distance, EdgeKind::knn);
    return space;
}

}  // namespace irspace
