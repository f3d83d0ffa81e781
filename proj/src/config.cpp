#include "irspace/config.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "irspace/error.hpp"
#include "irspace/format.hpp"

namespace irspace {

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kStageNames[] = {"synth", "ingest", "sessionize", "prespace", "embed",
                                            "fit",   "geodesic", "diagnose", "compare"};

json heights_json(const Eigen::MatrixXd& h) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < h.cols(); ++j) row.push_back(h(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json section_json(const PipelineConfig& c, Stage stage) {
    switch (stage) {
        case Stage::synth: {
            const auto& s = c.synth;
            return json{{"surface", to_string(s.surface.kind)},
                        {"bump_radius", s.surface.bump_radius},
                        {"bump_center", {s.surface.bump_center.x(), s.surface.bump_center.y()}},
                        {"heights", heights_json(s.surface.heights)},
                        {"num_users", s.num_users},
                        {"sessions_per_user", s.sessions_per_user},
                        {"session_length", {s.session_length_min, s.session_length_max}},
                        {"vocabulary_size", s.vocabulary_size},
                        {"noise_scale", s.noise_scale},
                        {"seed", s.seed},
                        {"step_length", s.step_length},
                        {"term_radius", s.term_radius},
                        {"format", to_string(c.synth_format)}};
        }
        case Stage::ingest:
            return json{{"paths", c.input.paths}, {"format", to_string(c.input.format)}, {"corpus", c.input.corpus}};
        case Stage::sessionize:
            return json{{"gap_threshold_s", c.sessionize.gap_threshold_s}, {"min_length", c.sessionize.min_length}};
        case Stage::prespace:
            return json{{"method", to_string(c.distance.method)}, {"k1", c.distance.bm25.k1}, {"b", c.distance.bm25.b}};
        case Stage::embed:
            return json{{"k", c.skeleton.k}, {"n", c.skeleton.n}};
        case Stage::fit:
            return json{{"nodes_per_axis", c.fit.nodes_per_axis},
                        {"lambda", c.fit.lambda},
                        {"bandwidth", c.fit.bandwidth},
                        {"min_support", c.fit.min_support},
                        {"min_conditioning", c.fit.min_conditioning},
                        {"eps_pd_relative", c.fit.eps_pd_relative},
                        {"eps_pd", c.fit.eps_pd.value_or(0.0)}};
        case Stage::geodesic:
            return json{{"x0", c.geodesic.x0},
                        {"v0", c.geodesic.v0},
                        {"T", c.geodesic.T},
                        {"h", c.geodesic.h},
                        {"from_thread", c.geodesic.from_thread}};
        case Stage::diagnose:
            return json{{"prominence", c.diagnose.prominence}, {"baseline", c.diagnose.baseline}};
        case Stage::compare:
            return json{{"other", c.compare.other}, {"correspondence", c.compare.correspondence}};
    }
    return json::object();
}

json to_json(const PipelineConfig& c) {
    return json{{"input", section_json(c, Stage::ingest)},
                {"synth", section_json(c, Stage::synth)},
                {"sessionize", section_json(c, Stage::sessionize)},
                {"distance", section_json(c, Stage::prespace)},
                {"skeleton", section_json(c, Stage::embed)},
                {"embed",
                 {{"max_iters", c.embed.max_iters},
                  {"tolerance", c.embed.tolerance},
                  {"seed", c.embed.seed},
                  {"restarts", c.embed.restarts}}},
                {"fit", section_json(c, Stage::fit)},
                {"geodesic", section_json(c, Stage::geodesic)},
                {"diagnose", section_json(c, Stage::diagnose)},
                {"compare", section_json(c, Stage::compare)},
                {"outdir", c.outdir}};
}

void check_keys(const json& given, const json& known, const std::string& prefix) {
    if (!given.is_object()) throw ValidationError("config " + (prefix.empty() ? "document" : "field '" + prefix + "'") + " must be an object");
    for (auto it = given.begin(); it != given.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!known.contains(it.key())) throw ValidationError("unknown config key '" + path + "'");
        if (known[it.key()].is_object()) check_keys(it.value(), known[it.key()], path);
    }
}

void merge(json& base, const json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base[it.key()].is_object()) merge(base[it.key()], it.value());
        else base[it.key()] = it.value();
    }
}

class Reader {
public:
    explicit Reader(const json& doc) : doc_(doc) {}

    template <typename T>
    T get(const std::string& section, const std::string& key) const {
        const json& v = section.empty() ? doc_.at(key) : doc_.at(section).at(key);
        const std::string path = section.empty() ? key : section + "." + key;
        try {
            if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ValidationError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ValidationError("");
                if constexpr (std::is_unsigned_v<T>)
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
                        throw ValidationError("config field '" + path + "' must be >= 0");
            }
            return v.get<T>();
        } catch (const ValidationError& e) {
            if (*e.what()) throw;
            throw ValidationError("config field '" + path + "' has the wrong type (got " + v.dump() + ")");
        } catch (const json::exception&) {
            throw ValidationError("config field '" + path + "' has the wrong type (got " + v.dump() + ")");
        }
    }

private:
    const json& doc_;
};

template <typename F>
auto wrap(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(field + ": " + e.what());
    }
}

PipelineConfig from_json(const json& doc) {
    const Reader r(doc);
    PipelineConfig c;
    c.input.paths = r.get<std::vector<std::string>>("input", "paths");
    c.input.format = wrap("input.format", [&] { return parse_log_format(r.get<std::string>("input", "format")); });
    c.input.corpus = r.get<std::string>("input", "corpus");

    auto& s = c.synth;
    s.surface.kind = wrap("synth.surface", [&] { return parse_surface_kind(r.get<std::string>("synth", "surface")); });
    s.surface.bump_radius = r.get<double>("synth", "bump_radius");
    auto center = r.get<std::vector<double>>("synth", "bump_center");
    if (center.size() != 2) throw ValidationError("config field 'synth.bump_center' must have 2 entries");
    s.surface.bump_center = {center[0], center[1]};
    auto heights = r.get<std::vector<std::vector<double>>>("synth", "heights");
    if (!heights.empty()) {
        s.surface.heights.resize(static_cast<Eigen::Index>(heights.size()), static_cast<Eigen::Index>(heights[0].size()));
        for (std::size_t i = 0; i < heights.size(); ++i) {
            if (heights[i].size() != heights[0].size()) throw ValidationError("config field 'synth.heights' must be rectangular");
            for (std::size_t j = 0; j < heights[i].size(); ++j)
                s.surface.heights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = heights[i][j];
        }
    }
    s.num_users = r.get<int>("synth", "num_users");
    s.sessions_per_user = r.get<int>("synth", "sessions_per_user");
    auto range = r.get<std::vector<int>>("synth", "session_length");
    if (range.size() != 2) throw ValidationError("config field 'synth.session_length' must be [min, max]");
    s.session_length_min = range[0];
    s.session_length_max = range[1];
    s.vocabulary_size = r.get<int>("synth", "vocabulary_size");
    s.noise_scale = r.get<double>("synth", "noise_scale");
    s.seed = r.get<std::uint64_t>("synth", "seed");
    s.step_length = r.get<double>("synth", "step_length");
    s.term_radius = r.get<double>("synth", "term_radius");
    c.synth_format = wrap("synth.format", [&] { return parse_log_format(r.get<std::string>("synth", "format")); });

    c.sessionize.gap_threshold_s = r.get<std::int64_t>("sessionize", "gap_threshold_s");
    c.sessionize.min_length = r.get<std::size_t>("sessionize", "min_length");

    c.distance.method = wrap("distance.method", [&] { return parse_distance_method(r.get<std::string>("distance", "method")); });
    c.distance.bm25.k1 = r.get<double>("distance", "k1");
    c.distance.bm25.b = r.get<double>("distance", "b");

    c.skeleton.k = r.get<std::size_t>("skeleton", "k");
    c.skeleton.n = r.get<int>("skeleton", "n");

    c.embed.max_iters = r.get<int>("embed", "max_iters");
    c.embed.tolerance = r.get<double>("embed", "tolerance");
    c.embed.seed = r.get<std::uint64_t>("embed", "seed");
    c.embed.restarts = r.get<int>("embed", "restarts");

    c.fit.nodes_per_axis = r.get<int>("fit", "nodes_per_axis");
    c.fit.lambda = r.get<double>("fit", "lambda");
    c.fit.bandwidth = r.get<double>("fit", "bandwidth");
    c.fit.min_support = r.get<double>("fit", "min_support");
    c.fit.min_conditioning = r.get<double>("fit", "min_conditioning");
    c.fit.eps_pd_relative = r.get<double>("fit", "eps_pd_relative");
    double eps = r.get<double>("fit", "eps_pd");
    if (eps != 0.0) c.fit.eps_pd = eps;

    c.geodesic.x0 = r.get<std::vector<double>>("geodesic", "x0");
    c.geodesic.v0 = r.get<std::vector<double>>("geodesic", "v0");
    c.geodesic.T = r.get<double>("geodesic", "T");
    c.geodesic.h = r.get<double>("geodesic", "h");
    c.geodesic.from_thread = r.get<std::string>("geodesic", "from_thread");

    c.diagnose.prominence = r.get<double>("diagnose", "prominence");
    c.diagnose.baseline = r.get<std::string>("diagnose", "baseline");
    c.compare.other = r.get<std::string>("compare", "other");
    c.compare.correspondence = r.get<std::string>("compare", "correspondence");
    c.outdir = r.get<std::string>("", "outdir");
    return c;
}

void collect_keys(const json& j, const std::string& prefix, std::vector<std::string>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it.value().is_object()) collect_keys(it.value(), path, out);
        else out.push_back(path);
    }
}

}  // namespace

Stage parse_stage(std::string_view name) {
    for (std::size_t i = 0; i < std::size(kStageNames); ++i)
        if (kStageNames[i] == name) return static_cast<Stage>(i);
    throw ValidationError("unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(Stage stage) { return kStageNames[static_cast<std::size_t>(stage)]; }

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::synth,    Stage::ingest, Stage::sessionize,
                                           Stage::prespace, Stage::embed,  Stage::fit,
                                           Stage::geodesic, Stage::diagnose, Stage::compare};
    return stages;
}

void PipelineConfig::validate() const {
    wrap("synth", [&] { synth.validate(); return 0; });
    if (sessionize.gap_threshold_s <= 0) throw ValidationError("sessionize.gap_threshold_s must be > 0");
    if (sessionize.min_length < 1) throw ValidationError("sessionize.min_length must be >= 1");
    wrap(distance.bm25.b < 0.0 || distance.bm25.b > 1.0 ? "distance.b" : "distance.k1",
         [&] { distance.bm25.validate(); return 0; });
    if (skeleton.n < 1) throw ValidationError("skeleton.n must be >= 1");
    if (embed.max_iters < 0) throw ValidationError("embed.max_iters must be >= 0");
    if (!(embed.tolerance >= 0.0)) throw ValidationError("embed.tolerance must be >= 0");
    if (embed.restarts < 0) throw ValidationError("embed.restarts must be >= 0");
    fit.validate();
    if (!(geodesic.T > 0.0) || !std::isfinite(geodesic.T)) throw ValidationError("geodesic.T must be > 0");
    if (!(geodesic.h > 0.0) || !std::isfinite(geodesic.h)) throw ValidationError("geodesic.h must be > 0");
    if (geodesic.x0.size() != geodesic.v0.size())
        throw ValidationError("geodesic.x0 and geodesic.v0 must have the same length");
    if (!(diagnose.prominence >= 0.0)) throw ValidationError("diagnose.prominence must be >= 0");
    if (outdir.empty()) throw ValidationError("outdir must not be empty");
}

PipelineConfig parse_config(std::string_view text) {
    json doc = json::parse(text, nullptr, false, /*ignore_comments=*/true);
    if (doc.is_discarded()) throw ValidationError("config is not valid JSON");
    json full = to_json(PipelineConfig{});
    check_keys(doc, full, "");
    merge(full, doc);
    return from_json(full);
}

std::string dump_config(const PipelineConfig& config) { return to_json(config).dump(2) + "\n"; }

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    collect_keys(to_json(PipelineConfig{}), "", out);
    return out;
}

void apply_override(PipelineConfig& config, std::string_view key, std::string_view value) {
    json doc = to_json(config);
    json* slot = &doc;
    std::string_view rest = key;
    while (true) {
        auto dot = rest.find('.');
        std::string part(rest.substr(0, dot));
        if (!slot->is_object() || !slot->contains(part)) throw ValidationError("unknown config key '" + std::string(key) + "'");
        slot = &(*slot)[part];
        if (dot == std::string_view::npos) break;
        rest = rest.substr(dot + 1);
    }
    if (slot->is_object()) throw ValidationError("config key '" + std::string(key) + "' is a section, not a field");
    json parsed = json::parse(value, nullptr, false);
    *slot = parsed.is_discarded() ? json(std::string(value)) : parsed;
    config = from_json(doc);
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string stage_config_hash(const PipelineConfig& config, Stage stage) {
    json subset{{"stage", to_string(stage)}};
    switch (stage) {
        case Stage::embed:
            subset["skeleton"] = json{{"k", config.skeleton.resolved_k()}, {"n", config.skeleton.n}};
            subset["embed"] = to_json(config)["embed"];
            break;
        case Stage::fit: {
            json f = section_json(config, Stage::fit);
            if (!config.fit.eps_pd) f.erase("eps_pd");
            else f.erase("eps_pd_relative");
            subset["fit"] = std::move(f);
            break;
        }
        case Stage::synth: {
            json s = section_json(config, Stage::synth);
            if (config.synth.surface.kind != SurfaceKind::height_grid) s.erase("heights");
            if (config.synth.surface.kind != SurfaceKind::bump) {
                s.erase("bump_radius");
                s.erase("bump_center");
            }
            subset["config"] = std::move(s);
            break;
        }
        case Stage::prespace: {
            json d = section_json(config, Stage::prespace);
            if (config.distance.method == DistanceMethod::tfidf_cosine) {
                d.erase("k1");
                d.erase("b");
            }
            subset["config"] = std::move(d);
            break;
        }
        case Stage::geodesic: {
            json g = section_json(config, Stage::geodesic);
            if (!config.geodesic.from_thread.empty()) {
                g.erase("x0");
                g.erase("v0");
            }
            subset["config"] = std::move(g);
            break;
        }
        default:
            subset["config"] = section_json(config, stage);
    }
    return hex64(fnv1a(subset.dump()));
}

}  // namespace irspace
