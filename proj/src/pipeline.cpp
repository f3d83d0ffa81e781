#include "irspace/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "irspace/diagnostics.hpp"
#include "irspace/error.hpp"
#include "irspace/io.hpp"
#include "irspace/synth.hpp"

namespace irspace {

using json = nlohmann::ordered_json;

ExitCode exit_code_for(const std::exception& e) {
    if (dynamic_cast<const MissingInputError*>(&e) || dynamic_cast<const InputError*>(&e))
        return ExitCode::missing_input;
    if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const BoundaryError*>(&e)) return ExitCode::numeric;
    return ExitCode::validation;
}

OutputLock::OutputLock(const fs::path& outdir) : path_(outdir / ".irspace.lock") {
    fs::create_directories(outdir);
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw ValidationError("output directory " + outdir.string() + " is in use by another run (remove " +
                                  path_.string() + " if it is stale)");
        throw InputError("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a(read_file(path))); }

namespace {

struct Input {
    std::string key;  // as recorded in the manifest
    fs::path path;
    std::string producer;
    bool corpus = false;
};

struct Outputs {
    std::map<std::string, std::string> files;  // path relative to the stage directory -> content
    std::exception_ptr failure;                // raised after the partial outputs are on disk
};

std::string manifest_key(const fs::path& outdir, const fs::path& p) {
    auto rel = p.lexically_relative(outdir);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
}

template <typename F>
std::string render(F&& f) {
    std::ostringstream ss;
    f(ss);
    return ss.str();
}

std::optional<fs::path> synth_log(const fs::path& outdir) {
    for (const char* name : {"log.tsv", "log.jsonl"})
        if (fs::exists(outdir / "synth" / name)) return outdir / "synth" / name;
    return std::nullopt;
}

std::vector<Input> stage_inputs(Stage stage, const PipelineConfig& c) {
    const fs::path out = c.outdir;
    std::vector<Input> in;
    auto add = [&](fs::path p, std::string producer, bool corpus = false) {
        in.push_back({manifest_key(out, p), std::move(p), std::move(producer), corpus});
    };
    switch (stage) {
        case Stage::synth:
            break;
        case Stage::ingest:
            if (!c.input.paths.empty()) {
                for (const auto& p : c.input.paths) add(p, "");
                if (!c.input.corpus.empty()) add(c.input.corpus, "", true);
            } else {
                auto log = synth_log(out);
                if (!log)
                    throw MissingInputError("no input log: set input.paths or run the 'synth' stage first", "synth");
                add(*log, "synth");
                add(c.input.corpus.empty() ? out / "synth" / "corpus.jsonl" : fs::path(c.input.corpus),
                    c.input.corpus.empty() ? "synth" : "", true);
            }
            break;
        case Stage::sessionize:
            add(out / "ingest" / "events.jsonl", "ingest");
            break;
        case Stage::prespace:
            add(out / "sessionize" / "streams.jsonl", "sessionize");
            add(out / "ingest" / "corpus.jsonl", "ingest");
            break;
        case Stage::embed:
            add(out / "prespace" / "prespace.jsonl", "prespace");
            break;
        case Stage::fit:
            add(out / "embed" / "space.jsonl", "embed");
            break;
        case Stage::geodesic:
            add(out / "fit" / "metric.jsonl", "fit");
            if (!c.geodesic.from_thread.empty()) add(out / "embed" / "space.jsonl", "embed");
            break;
        case Stage::diagnose:
            add(out / "embed" / "space.jsonl", "embed");
            add(out / "fit" / "metric.jsonl", "fit");
            if (!c.diagnose.baseline.empty()) add(fs::path(c.diagnose.baseline) / "diagnose" / "report.jsonl", "diagnose");
            break;
        case Stage::compare:
            if (c.compare.other.empty()) throw ValidationError("compare.other must name the second output directory");
            add(out / "embed" / "space.jsonl", "embed");
            add(fs::path(c.compare.other) / "embed" / "space.jsonl", "embed");
            if (!c.compare.correspondence.empty()) add(c.compare.correspondence, "");
            break;
    }
    return in;
}

// ---- stage bodies

Outputs do_synth(const PipelineConfig& c) {
    auto gen = synth_generate(c.synth);
    Outputs o;
    o.files[c.synth_format == LogFormat::tsv ? "log.tsv" : "log.jsonl"] =
        render([&](std::ostream& s) { write_log(s, gen.events, c.synth_format); });
    o.files["truth.jsonl"] = render([&](std::ostream& s) { write_ground_truth(s, gen.truth); });
    o.files["corpus.jsonl"] = render([&](std::ostream& s) { write_corpus(s, gen.corpus); });
    return o;
}

Outputs do_ingest(const PipelineConfig& c, const std::vector<Input>& in) {
    const bool from_synth = c.input.paths.empty();
    std::vector<ClickEvent> events;
    json files = json::array();
    std::optional<CorpusStats> corpus;
    for (const auto& input : in) {
        std::istringstream text(read_file(input.path, input.producer));
        if (input.corpus) {
            corpus = read_corpus(text);
            continue;
        }
        LogFormat fmt = c.input.format;
        if (from_synth) fmt = input.path.extension() == ".tsv" ? LogFormat::tsv : LogFormat::jsonlines;
        auto parsed = parse_log(text, fmt);
        json skipped = json::array();
        for (const auto& s : parsed.report.skipped) skipped.push_back(json{{"line", s.line}, {"reason", s.reason}});
        files.push_back(json{{"path", input.key},
                             {"records", parsed.report.records},
                             {"parsed", parsed.report.parsed},
                             {"skipped", std::move(skipped)}});
        events.insert(events.end(), std::make_move_iterator(parsed.events.begin()),
                      std::make_move_iterator(parsed.events.end()));
    }
    if (!corpus) corpus = corpus_from_events(events);
    for (const auto& e : events)
        if (!corpus->doc_len.count(e.doc_id))
            throw CorpusMismatchError("document '" + e.doc_id + "' is missing from the corpus statistics");

    Outputs o;
    o.files["events.jsonl"] = render([&](std::ostream& s) { write_log(s, events, LogFormat::jsonlines); });
    o.files["corpus.jsonl"] = render([&](std::ostream& s) { write_corpus(s, *corpus); });
    o.files["parse_report.json"] = json{{"events", events.size()}, {"files", std::move(files)}}.dump(2) + "\n";
    return o;
}

Outputs do_sessionize(const PipelineConfig& c, const std::vector<Input>& in) {
    std::istringstream text(read_file(in[0].path, in[0].producer));
    auto parsed = parse_log(text, LogFormat::jsonlines);
    if (!parsed.report.skipped.empty()) throw InputError("ingest/events.jsonl contains malformed records");
    auto streams = extract_clickstreams(parsed.events, c.sessionize.gap_threshold_s * 1000, c.sessionize.min_length);
    Outputs o;
    o.files["streams.jsonl"] = render([&](std::ostream& s) { write_streams(s, streams); });
    return o;
}

Outputs do_prespace(const PipelineConfig& c, const std::vector<Input>& in) {
    std::istringstream streams_text(read_file(in[0].path, in[0].producer));
    std::istringstream corpus_text(read_file(in[1].path, in[1].producer));
    auto streams = read_streams(streams_text);
    auto corpus = read_corpus(corpus_text);
    auto space = build_prespace(streams, c.distance.method, corpus, c.distance.bm25);
    Outputs o;
    o.files["prespace.jsonl"] = render([&](std::ostream& s) { write_prespace(s, space); });
    for (std::size_t t = 0; t < space.layers.size(); ++t)
        o.files["layer_" + std::to_string(t) + ".csv"] = render([&](std::ostream& s) { write_layer_csv(s, space, t); });
    return o;
}

Outputs do_embed(const PipelineConfig& c, const std::vector<Input>& in) {
    std::istringstream text(read_file(in[0].path, in[0].producer));
    auto prespace = read_prespace(text);
    auto skeleton = form_simplices(link_nearest_neighbors(prespace, c.skeleton.resolved_k()), c.skeleton.n);
    auto space = embed_layers(prespace, skeleton, c.skeleton.n, c.embed);
    Outputs o;
    o.files["space.jsonl"] = render([&](std::ostream& s) { write_space(s, space); });
    o.files["points.csv"] = render([&](std::ostream& s) { write_points_csv(s, space); });
    o.files["stress.csv"] = render([&](std::ostream& s) { write_stress_csv(s, space); });
    return o;
}

EmbeddedSpace load_space(const Input& in) {
    std::istringstream text(read_file(in.path, in.producer));
    return read_space(text);
}

MetricField<double> load_metric(const Input& in) {
    std::istringstream text(read_file(in.path, in.producer));
    return read_metric_field(text);
}

Outputs do_fit(const PipelineConfig& c, const std::vector<Input>& in) {
    auto space = load_space(in[0]);
    auto fit = fit_metric_field(space, c.fit);
    Outputs o;
    o.files["metric.jsonl"] = render([&](std::ostream& s) { write_metric_field(s, fit.field); });
    o.files["fit_report.json"] = render([&](std::ostream& s) { write_fit_report(s, fit.report); });
    return o;
}

Outputs do_geodesic(const PipelineConfig& c, const std::vector<Input>& in) {
    auto field = load_metric(in[0]);
    const int m = field.dim();
    Eigen::VectorXd x0, v0;
    std::optional<double> observed_energy;
    if (!c.geodesic.from_thread.empty()) {
        auto space = load_space(in[1]);
        const Thread* th = space.thread(c.geodesic.from_thread);
        if (!th) throw ValidationError("geodesic.from_thread: no thread '" + c.geodesic.from_thread + "'");
        if (th->rows.size() < 2) throw ValidationError("geodesic.from_thread: thread has fewer than 2 points");
        if (space.coords.cols() != m) throw ValidationError("metric field and embedded space dimensions differ");
        x0 = space.coords.row(static_cast<Eigen::Index>(th->rows[0])).transpose();
        v0 = space.coords.row(static_cast<Eigen::Index>(th->rows[1])).transpose() - x0;
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(th->rows.size()), m);
        for (std::size_t i = 0; i < th->rows.size(); ++i)
            pts.row(static_cast<Eigen::Index>(i)) = space.coords.row(static_cast<Eigen::Index>(th->rows[i]));
        Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(pts.rows(), 0.0, double(pts.rows() - 1));
        try {
            observed_energy = curve_energy(field, observed_trajectory(pts, times));
        } catch (const BoundaryError&) {
        }
    } else {
        if (c.geodesic.x0.empty()) throw ValidationError("geodesic needs geodesic.x0 and geodesic.v0, or geodesic.from_thread");
        if (static_cast<int>(c.geodesic.x0.size()) != m)
            throw ValidationError("geodesic.x0 has " + std::to_string(c.geodesic.x0.size()) +
                                  " entries but the metric field has dimension " + std::to_string(m));
        x0 = Eigen::Map<const Eigen::VectorXd>(c.geodesic.x0.data(), m);
        v0 = Eigen::Map<const Eigen::VectorXd>(c.geodesic.v0.data(), m);
    }

    auto result = integrate_geodesic(field, x0, v0, c.geodesic.T, c.geodesic.h);
    const auto& tr = result.trajectory;
    json summary{{"status", to_string(result.status)},
                 {"boundary", result.status == GeodesicStatus::left_domain},
                 {"message", result.message},
                 {"samples", tr.size()},
                 {"t_end", tr.samples.back().t}};
    if (tr.size() >= 2) {
        summary["energy"] = curve_energy(field, tr);
        summary["length"] = curve_length(field, tr);
    } else {
        summary["energy"] = nullptr;
        summary["length"] = nullptr;
    }
    if (observed_energy) summary["observed_energy"] = *observed_energy;

    Outputs o;
    o.files["trajectory.csv"] = render([&](std::ostream& s) { write_trajectory_csv(s, tr); });
    o.files["summary.json"] = summary.dump(2) + "\n";
    if (result.status == GeodesicStatus::left_domain)
        o.failure = std::make_exception_ptr(BoundaryError("geodesic " + result.message));
    else if (result.status == GeodesicStatus::diverged)
        o.failure = std::make_exception_ptr(NumericError("geodesic diverged: " + result.message));
    return o;
}

Outputs do_diagnose(const PipelineConfig& c, const std::vector<Input>& in) {
    auto space = load_space(in[0]);
    auto field = load_metric(in[1]);
    auto report = roughness(space, field, {c.diagnose.prominence});
    Outputs o;
    o.files["report.txt"] = render([&](std::ostream& s) { write_roughness_text(s, report, field.grid()); });
    o.files["report.jsonl"] = render([&](std::ostream& s) { write_roughness_jsonl(s, report); });
    o.files["heightmap.csv"] = render([&](std::ostream& s) { write_heightmap_csv(s, report, field.grid()); });
    if (in.size() > 2) {
        std::istringstream text(read_file(in[2].path, in[2].producer));
        auto before = read_roughness_jsonl(text);
        auto delta = smoothing_delta(before, report);
        o.files["delta.jsonl"] = render([&](std::ostream& s) { write_smoothing_delta(s, delta); });
    }
    return o;
}

Outputs do_compare(const PipelineConfig&, const std::vector<Input>& in) {
    auto a = load_space(in[0]);
    auto b = load_space(in[1]);
    Correspondence corr;
    if (in.size() > 2) {
        std::istringstream text(read_file(in[2].path, in[2].producer));
        corr = read_correspondence(text);
    } else {
        corr = identity_correspondence(a, b);
    }
    auto report = compare_environments(a, b, corr);
    Outputs o;
    o.files["report.txt"] = render([&](std::ostream& s) { write_comparison_text(s, report); });
    o.files["report.jsonl"] = render([&](std::ostream& s) { write_comparison_jsonl(s, report); });
    return o;
}

Outputs compute(Stage stage, const PipelineConfig& c, const std::vector<Input>& in) {
    switch (stage) {
        case Stage::synth: return do_synth(c);
        case Stage::ingest: return do_ingest(c, in);
        case Stage::sessionize: return do_sessionize(c, in);
        case Stage::prespace: return do_prespace(c, in);
        case Stage::embed: return do_embed(c, in);
        case Stage::fit: return do_fit(c, in);
        case Stage::geodesic: return do_geodesic(c, in);
        case Stage::diagnose: return do_diagnose(c, in);
        case Stage::compare: return do_compare(c, in);
    }
    return {};
}

bool manifest_matches(const fs::path& manifest_path, const fs::path& outdir, const std::string& config_hash,
                      const json& input_hashes) {
    if (!fs::exists(manifest_path)) return false;
    json m = json::parse(read_file(manifest_path), nullptr, false);
    if (m.is_discarded() || !m.is_object()) return false;
    if (m.value("tool_version", "") != IRSPACE_VERSION || m.value("config_hash", "") != config_hash) return false;
    if (!m.contains("inputs") || m["inputs"] != input_hashes || !m.contains("outputs")) return false;
    for (auto it = m["outputs"].begin(); it != m["outputs"].end(); ++it) {
        const fs::path p = outdir / it.key();
        if (!fs::exists(p) || file_hash(p) != it.value().get<std::string>()) return false;
    }
    return true;
}

}  // namespace

StageOutcome run_stage(Stage stage, const PipelineConfig& config, const RunOptions& opts) {
    config.validate();
    const fs::path outdir = config.outdir;
    const fs::path stage_dir = outdir / std::string(to_string(stage));
    const fs::path manifest_path = stage_dir / "manifest.json";

    auto inputs = stage_inputs(stage, config);
    json input_hashes = json::object();
    for (const auto& in : inputs) {
        if (!fs::exists(in.path)) read_file(in.path, in.producer);  // throws MissingInputError
        input_hashes[in.key] = file_hash(in.path);
    }
    const std::string config_hash = stage_config_hash(config, stage);

    StageOutcome outcome;
    outcome.stage = stage;
    if (!opts.force && manifest_matches(manifest_path, outdir, config_hash, input_hashes)) {
        outcome.up_to_date = true;
        if (opts.log) *opts.log << to_string(stage) << ": up to date\n";
        return outcome;
    }

    std::error_code ec;
    fs::remove(manifest_path, ec);
    Outputs out = compute(stage, config, inputs);

    json output_hashes = json::object();
    for (const auto& [name, content] : out.files) {
        const fs::path p = stage_dir / name;
        write_file_atomic(p, content);
        const std::string key = manifest_key(outdir, p);
        output_hashes[key] = hex64(fnv1a(content));
        outcome.outputs.push_back(key);
    }
    if (out.failure) std::rethrow_exception(out.failure);

    json manifest{{"stage", to_string(stage)},
                  {"tool_version", IRSPACE_VERSION},
                  {"config_hash", config_hash},
                  {"inputs", std::move(input_hashes)},
                  {"outputs", std::move(output_hashes)}};
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    if (opts.log) *opts.log << to_string(stage) << ": done (" << outcome.outputs.size() << " files)\n";
    return outcome;
}

}  // namespace irspace
