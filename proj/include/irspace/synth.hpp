#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "irspace/logmodel.hpp"
#include "irspace/metricspace.hpp"

namespace irspace {

enum class SurfaceKind { flat, bump, height_grid };

SurfaceKind parse_surface_kind(std::string_view name);
std::string_view to_string(SurfaceKind kind);

/// Ground-truth surface over the unit square [0,1]^2. Heights of a
/// height_grid surface are bilinearly interpolated over an evenly spaced grid.
struct Surface {
    SurfaceKind kind = SurfaceKind::flat;
    double bump_radius = 0.3;
    Eigen::Vector2d bump_center{0.5, 0.5};
    Eigen::MatrixXd heights;  // rows along x, cols along y; only for height_grid

    double height(double x, double y) const;
};

struct SynthConfig {
    Surface surface;
    int num_users = 50;
    int sessions_per_user = 1;
    int session_length_min = 5;
    int session_length_max = 10;
    int vocabulary_size = 3600;
    double noise_scale = 0.0;
    std::uint64_t seed = 1;
    double step_length = 0.05;
    /// Radius of the term neighbourhood around a click's surface point.
    double term_radius = 1.5;

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// Planted surface coordinate per generated event, by event index.
struct GroundTruth {
    std::vector<Eigen::Vector2d> planted;
};

struct SynthOutput {
    std::vector<ClickEvent> events;
    GroundTruth truth;
    /// Statistics of the synthetic index: every vocabulary term has the same
    /// document frequency, so tf-idf weights are uniform across the lattice.
    CorpusStats corpus;
};

/// Users walk fixed-length steps with random turns over the surface. Each
/// click's terms are the vocabulary anchors (a lattice around the surface)
/// lying within term_radius of the click's 3D surface point; the two nearest
/// anchors form the query. Term overlap therefore decays with planted distance.
SynthOutput synth_generate(const SynthConfig& config);

void write_ground_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_ground_truth(std::istream& in);

}  // namespace irspace
