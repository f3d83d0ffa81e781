#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "irspace/logmodel.hpp"
#include "irspace/metric_fit.hpp"
#include "irspace/metricspace.hpp"
#include "irspace/skeleton.hpp"
#include "irspace/synth.hpp"

namespace irspace {

enum class Stage { synth, ingest, sessionize, prespace, embed, fit, geodesic, diagnose, compare };

Stage parse_stage(std::string_view name);
std::string_view to_string(Stage stage);
const std::vector<Stage>& all_stages();

struct InputConfig {
    std::vector<std::string> paths;
    LogFormat format = LogFormat::tsv;
    std::string corpus;  // corpus statistics file; empty -> derived from the log
};

struct SessionizeConfig {
    std::int64_t gap_threshold_s = 1800;
    std::size_t min_length = kDefaultMinLength;
};

struct DistanceConfig {
    DistanceMethod method = DistanceMethod::tfidf_cosine;
    Bm25Params bm25;
};

struct SkeletonConfig {
    std::size_t k = 0;  // 0 -> default_neighbor_count(n)
    int n = 2;

    std::size_t resolved_k() const { return k ? k : default_neighbor_count(n); }
};

struct GeodesicConfig {
    std::vector<double> x0;
    std::vector<double> v0;
    double T = 1.0;
    double h = 1e-3;
    std::string from_thread;  // start at this thread's first point along its first step
};

struct DiagnoseConfig {
    double prominence = 0.5;
    std::string baseline;  // another output directory to compute a smoothing delta against
};

struct CompareConfig {
    std::string other;           // output directory of the second environment
    std::string correspondence;  // file of "<a>\t<b>" lines; empty -> shared thread ids
};

struct PipelineConfig {
    InputConfig input;
    SynthConfig synth;
    LogFormat synth_format = LogFormat::tsv;
    SessionizeConfig sessionize;
    DistanceConfig distance;
    SkeletonConfig skeleton;
    EmbedOptions embed;
    FitOptions fit;
    GeodesicConfig geodesic;
    DiagnoseConfig diagnose;
    CompareConfig compare;
    std::string outdir = "out";

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// Parses a config document. Unknown keys are rejected.
PipelineConfig parse_config(std::string_view text);

/// Canonical document with every field present.
std::string dump_config(const PipelineConfig& config);

/// Dotted names of every settable field, e.g. "distance.b".
std::vector<std::string> config_keys();

/// Sets one field from its text form; the value is read as JSON when it
/// parses, otherwise as a plain string.
void apply_override(PipelineConfig& config, std::string_view key, std::string_view value);

/// Hash of the resolved settings a stage's outputs depend on.
std::string stage_config_hash(const PipelineConfig& config, Stage stage);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace irspace
