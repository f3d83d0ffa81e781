#pragma once

#include <optional>
#include <vector>

#include "irspace/geometry.hpp"
#include "irspace/skeleton.hpp"

namespace irspace {

struct FitOptions {
    int nodes_per_axis = 32;  // spatial axes; the temporal axis gets one node per layer plus margins
    double lambda = 1e-3;
    double bandwidth = 4.0;  // Gaussian edge weight width, in grid spacings per axis
    double eps_pd_relative = 1e-4;  // floor as a fraction of the median fitted eigenvalue
    std::optional<double> eps_pd;   // absolute floor, overrides eps_pd_relative
    double min_support = 2.0;       // total edge weight a node needs, per unknown of G
    double min_conditioning = 1e-6; // reciprocal condition of the scaled data normal matrix

    void validate() const;
};

enum class NodeFit { fitted, no_data, degenerate };

struct FitReport {
    std::vector<NodeFit> status;
    std::vector<double> weight;  // total Gaussian weight of the edges seen by each node
    std::size_t fitted = 0;
    std::size_t no_data = 0;
    std::size_t degenerate = 0;
    double eps_pd = 0.0;
};

struct FitResult {
    MetricField<double> field;
    FitReport report;
};

/// Grid over the embedded coordinates with one cell of margin on every side.
Grid<double> grid_for(const EmbeddedSpace& space, int nodes_per_axis);

/// Per node, the symmetric G minimising
///   sum_e w_e (d_e^2 - dx_e' G dx_e)^2 + lambda * sum_jk s_jk (G - I)_jk^2
/// where w_e is a Gaussian in the distance from the node to the edge midpoint
/// (width `bandwidth` grid spacings per axis, cut off at three widths) and s_jk is the matching diagonal
/// entry of the data normal matrix. Nodes with too little or too one-sided
/// data keep the identity. G is then floored to eps_pd.
FitResult fit_metric_field(const Grid<double>& grid, const Eigen::MatrixXd& coords,
                           const std::vector<SpaceEdge>& edges, const FitOptions& opts);

FitResult fit_metric_field(const EmbeddedSpace& space, const FitOptions& opts = {});

}  // namespace irspace
