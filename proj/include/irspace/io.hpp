#pragma once

// Artifact files. Every writer emits a canonical byte stream (shortest
// round-trip doubles, fixed key order), so write -> read -> write is stable.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "irspace/diagnostics.hpp"
#include "irspace/geometry.hpp"
#include "irspace/logmodel.hpp"
#include "irspace/metric_fit.hpp"
#include "irspace/metricspace.hpp"
#include "irspace/skeleton.hpp"

namespace irspace {

namespace fs = std::filesystem;

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path& path, const std::string& content);

/// Throws MissingInputError naming `producer` when the file does not exist.
std::string read_file(const fs::path& path, const std::string& producer = "");

void write_streams(std::ostream& out, const std::vector<Clickstream>& streams);
std::vector<Clickstream> read_streams(std::istream& in);

void write_prespace(std::ostream& out, const LayeredPreSpace& space);
LayeredPreSpace read_prespace(std::istream& in);

/// Threads are not stored; they are rebuilt from the point ids on read.
void write_space(std::ostream& out, const EmbeddedSpace& space);
EmbeddedSpace read_space(std::istream& in);

void write_points_csv(std::ostream& out, const EmbeddedSpace& space);
void write_stress_csv(std::ostream& out, const EmbeddedSpace& space);

void write_metric_field(std::ostream& out, const MetricField<double>& field);
MetricField<double> read_metric_field(std::istream& in);

void write_fit_report(std::ostream& out, const FitReport& report);

void write_trajectory_csv(std::ostream& out, const Trajectory<double>& trajectory);
Trajectory<double> read_trajectory_csv(std::istream& in);

void write_roughness_text(std::ostream& out, const RoughnessReport& report, const Grid<double>& grid);
void write_roughness_jsonl(std::ostream& out, const RoughnessReport& report);
RoughnessReport read_roughness_jsonl(std::istream& in);
void write_heightmap_csv(std::ostream& out, const RoughnessReport& report, const Grid<double>& grid);

void write_smoothing_delta(std::ostream& out, const SmoothingDelta& delta);

void write_comparison_text(std::ostream& out, const ComparisonReport& report);
void write_comparison_jsonl(std::ostream& out, const ComparisonReport& report);

/// Lines of "<thread in a>\t<thread in b>"; blank lines and '#' comments ignored.
Correspondence read_correspondence(std::istream& in);

}  // namespace irspace
