#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "irspace/mds.hpp"
#include "irspace/metricspace.hpp"

namespace irspace {

/// Same-layer link between two pre-space points, stored with a < b.
struct KnnEdge {
    PointId a;
    PointId b;
    double distance = 0.0;

    friend bool operator==(const KnnEdge&, const KnnEdge&) = default;
};

using Cell = std::vector<PointId>;  // sorted, n+1 distinct points of one layer

/// Threads, nearest-neighbour bones and simplex cells over the pre-space.
struct Skeleton {
    std::vector<PointId> points;  // layer-major, ascending within a layer
    std::vector<ThreadEdge> thread_edges;
    std::vector<KnnEdge> knn_edges;  // ascending (a, b)
    std::vector<Cell> cells;         // ascending, no duplicates
    std::size_t k = 0;
    /// ranked[t][i]: indices into layer t's points ordered by (distance, id), excluding i.
    std::vector<std::vector<std::vector<std::uint32_t>>> ranked;
};

inline std::size_t default_neighbor_count(int n) { return static_cast<std::size_t>(std::max(3, n + 1)); }

/// Links every point to its k nearest same-layer points (ties by point id),
/// symmetrising the edge set.
Skeleton link_nearest_neighbors(const LayeredPreSpace& prespace, std::size_t k);

/// One cell per point: the point and its n nearest same-layer neighbours.
/// Points with fewer than n neighbours contribute no cell.
Skeleton form_simplices(Skeleton skeleton, int n);

struct EmbedOptions {
    int max_iters = 1000;
    double tolerance = 1e-10;
    std::uint64_t seed = 1;
    int restarts = 8;  // extra random starts besides classical scaling; the lowest stress wins
};

/// Stress majorization of one distance matrix into n coordinates, started
/// from classical scaling and from `restarts` seeded random configurations.
MajorizationResult<double> embed_distances(const Eigen::MatrixXd& D, int n, const EmbedOptions& opts,
                                           std::uint64_t seed);

enum class EdgeKind { thread, knn };

struct SpaceEdge {
    std::size_t a = 0;  // rows of EmbeddedSpace::coords
    std::size_t b = 0;
    double distance = 0.0;  // pre-space distance
    EdgeKind kind = EdgeKind::knn;
};

struct Thread {
    std::string stream_id;
    std::vector<std::size_t> rows;  // in stream order
};

/// Layers projected to n spatial coordinates and stacked along a temporal
/// axis: row r of coords is (x_1..x_n, layer).
struct EmbeddedSpace {
    int n = 2;
    std::vector<std::string> stream_ids;
    std::vector<PointId> points;  // layer-major
    Eigen::MatrixXd coords;
    std::vector<Thread> threads;
    std::vector<std::vector<std::size_t>> cells;
    std::vector<SpaceEdge> edges;
    std::vector<double> stress_per_layer;
    std::vector<bool> converged;
    std::vector<std::vector<double>> stress_history;

    std::optional<std::size_t> row_of(PointId p) const;
    std::size_t num_layers() const { return stress_per_layer.size(); }
    std::string label(std::size_t row) const;
    const Thread* thread(const std::string& stream_id) const;
};

/// Embeds each layer by stress majorization from a classical-scaling start,
/// then chains orthogonal Procrustes alignments so that layer t+1 sits on top
/// of layer t along the threads they share.
EmbeddedSpace embed_layers(const LayeredPreSpace& prespace, const Skeleton& skeleton, int n,
                           const EmbedOptions& opts = {});

}  // namespace irspace
