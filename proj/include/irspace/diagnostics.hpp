#pragma once

#include <string>
#include <utility>
#include <vector>

#include "irspace/geometry.hpp"
#include "irspace/procrustes.hpp"
#include "irspace/skeleton.hpp"

namespace irspace {

/// Consecutive in-thread step lengths (spatial coordinates) divided by their median.
struct JumpStats {
    std::size_t steps = 0;
    double median_step = 0.0;  // raw length used as the unit
    double mean = 0.0;
    double p95 = 0.0;
    double max = 0.0;
};

struct RoughnessOptions {
    double prominence = 0.5;
};

struct Peak {
    std::size_t node = 0;
    double height = 0.0;
};

struct RoughnessReport {
    // enough of the configuration to tell whether two reports are comparable
    int n = 0;
    std::vector<int> spatial_nodes;
    double prominence = 0.0;

    double gradient_rms = 0.0;
    std::size_t peak_count = 0;
    double max_peak_height = 0.0;
    std::vector<Peak> peaks;  // ascending node
    JumpStats jumps;
    std::vector<double> distortion;  // per grid node; not serialized in reports
};

/// log(largest / smallest eigenvalue) of the leading n x n block of every node sample.
std::vector<double> metric_distortion(const MetricField<double>& field, int n);

JumpStats jump_stats(const EmbeddedSpace& space);

/// Peaks are strict local maxima of the distortion over the full 3^m node
/// neighbourhood whose value exceeds the prominence; the gradient uses central
/// differences along the spatial axes at nodes with both neighbours.
RoughnessReport roughness(const EmbeddedSpace& space, const MetricField<double>& field,
                          const RoughnessOptions& opts = {});

struct SmoothingDelta {
    double gradient_rms = 0.0;
    long long peak_count = 0;
    double max_peak_height = 0.0;
    double jump_mean = 0.0;
    double jump_p95 = 0.0;
    double jump_max = 0.0;
    bool improved = false;
};

/// after - before. Throws ComparabilityError when the reports come from different settings.
SmoothingDelta smoothing_delta(const RoughnessReport& before, const RoughnessReport& after);

struct PairDeviation {
    std::string thread_a;
    std::string thread_b;
    std::size_t paired_points = 0;
    double frechet = 0.0;
    double pointwise_rms = 0.0;
};

struct ComparisonReport {
    std::size_t correspondence_size = 0;
    double procrustes_residual = 0.0;
    double deviation_mean = 0.0;
    double deviation_max = 0.0;
    std::vector<PairDeviation> pairs;
    std::vector<std::string> warnings;
    RigidTransform<double> alignment;  // maps b onto a
};

using Correspondence = std::vector<std::pair<std::string, std::string>>;

/// Aligns b onto a with the rotation and translation that best match the
/// paired thread points, then measures each pair.
ComparisonReport compare_environments(const EmbeddedSpace& a, const EmbeddedSpace& b,
                                      const Correspondence& correspondence);

/// Pairs every thread id present in both spaces, in a's order.
Correspondence identity_correspondence(const EmbeddedSpace& a, const EmbeddedSpace& b);

}  // namespace irspace
