#include "irspace/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "irspace/error.hpp"
#include "irspace/format.hpp"

namespace irspace {

using json = nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& terms) {
    std::string out;
    for (const auto& t : terms) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

template <typename F>
void for_each_json_line(std::istream& in, const char* what, F&& f) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object())
            throw InputError(std::string(what) + ": line " + std::to_string(number) + " is not a json object");
        try {
            f(obj);
        } catch (const json::exception& e) {
            throw InputError(std::string(what) + ": line " + std::to_string(number) + ": " + e.what());
        }
    }
}

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd json_vec(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

json point_json(PointId p) { return json::array({p.stream, p.pos}); }
PointId json_point(const json& a) { return {a.at(0).get<std::uint32_t>(), a.at(1).get<std::uint32_t>()}; }

void emit(std::ostream& out, const json& obj) { out << obj.dump() << '\n'; }

double parse_number(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError("malformed number '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw InputError("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path)) {
        std::string msg = "missing input " + path.string();
        if (!producer.empty()) msg += " (produced by stage '" + producer + "')";
        throw MissingInputError(msg, producer);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- streams

void write_streams(std::ostream& out, const std::vector<Clickstream>& streams) {
    for (const auto& s : streams) {
        json events = json::array();
        for (const auto& e : s.events)
            events.push_back(json{{"ts", e.timestamp_ms},
                                  {"query", join(e.query_terms)},
                                  {"doc", e.doc_id},
                                  {"text", join(e.doc_terms)}});
        emit(out, json{{"stream", s.stream_id}, {"user", s.user_key}, {"events", std::move(events)}});
    }
}

std::vector<Clickstream> read_streams(std::istream& in) {
    std::vector<Clickstream> out;
    for_each_json_line(in, "streams", [&](const json& obj) {
        Clickstream s;
        s.stream_id = obj.at("stream").get<std::string>();
        s.user_key = obj.at("user").get<std::string>();
        for (const auto& ev : obj.at("events")) {
            ClickEvent e;
            e.user_key = s.user_key;
            e.timestamp_ms = ev.at("ts").get<std::int64_t>();
            e.query_terms = tokenize(ev.at("query").get<std::string>());
            e.doc_id = ev.at("doc").get<std::string>();
            e.doc_terms = tokenize(ev.at("text").get<std::string>());
            s.events.push_back(std::move(e));
        }
        out.push_back(std::move(s));
    });
    return out;
}

// ---- pre-space

void write_prespace(std::ostream& out, const LayeredPreSpace& space) {
    emit(out, json{{"kind", "prespace"}, {"streams", space.stream_ids}, {"layers", space.layers.size()}});
    for (std::size_t t = 0; t < space.layers.size(); ++t) {
        const auto& layer = space.layers[t];
        json points = json::array(), rows = json::array();
        for (auto p : layer.points) points.push_back(point_json(p));
        for (Eigen::Index i = 0; i < layer.distances.rows(); ++i) rows.push_back(vec_json(layer.distances.row(i).transpose()));
        emit(out, json{{"kind", "layer"}, {"layer", t}, {"points", std::move(points)}, {"distances", std::move(rows)}});
    }
    for (const auto& e : space.thread_edges)
        emit(out, json{{"kind", "thread"}, {"from", point_json(e.from)}, {"to", point_json(e.to)}, {"distance", e.distance}});
}

LayeredPreSpace read_prespace(std::istream& in) {
    LayeredPreSpace space;
    bool header = false;
    for_each_json_line(in, "prespace", [&](const json& obj) {
        const auto kind = obj.at("kind").get<std::string>();
        if (kind == "prespace") {
            space.stream_ids = obj.at("streams").get<std::vector<std::string>>();
            header = true;
        } else if (kind == "layer") {
            Layer layer;
            for (const auto& p : obj.at("points")) layer.points.push_back(json_point(p));
            const auto& rows = obj.at("distances");
            const auto n = static_cast<Eigen::Index>(layer.points.size());
            if (rows.size() != layer.points.size()) throw InputError("prespace: distance matrix does not match its points");
            layer.distances.resize(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& row = rows[static_cast<std::size_t>(i)];
                if (static_cast<Eigen::Index>(row.size()) != n) throw InputError("prespace: distance row has the wrong length");
                layer.distances.row(i) = json_vec(row).transpose();
            }
            space.layers.push_back(std::move(layer));
        } else if (kind == "thread") {
            space.thread_edges.push_back({json_point(obj.at("from")), json_point(obj.at("to")), obj.at("distance").get<double>()});
        } else {
            throw InputError("prespace: unknown record kind '" + kind + "'");
        }
    });
    if (!header) throw InputError("prespace: missing header record");
    return space;
}

// ---- embedded space

void write_space(std::ostream& out, const EmbeddedSpace& space) {
    json converged = json::array();
    for (bool c : space.converged) converged.push_back(c);
    emit(out, json{{"kind", "space"},
                   {"n", space.n},
                   {"streams", space.stream_ids},
                   {"stress", space.stress_per_layer},
                   {"converged", std::move(converged)}});
    for (std::size_t r = 0; r < space.points.size(); ++r)
        emit(out, json{{"kind", "point"},
                       {"id", point_json(space.points[r])},
                       {"x", vec_json(space.coords.row(static_cast<Eigen::Index>(r)).transpose())}});
    for (const auto& e : space.edges)
        emit(out, json{{"kind", "edge"},
                       {"a", e.a},
                       {"b", e.b},
                       {"distance", e.distance},
                       {"type", e.kind == EdgeKind::thread ? "thread" : "knn"}});
    for (const auto& c : space.cells) emit(out, json{{"kind", "cell"}, {"rows", c}});
}

EmbeddedSpace read_space(std::istream& in) {
    EmbeddedSpace space;
    bool header = false;
    std::vector<Eigen::VectorXd> coords;
    for_each_json_line(in, "space", [&](const json& obj) {
        const auto kind = obj.at("kind").get<std::string>();
        if (kind == "space") {
            space.n = obj.at("n").get<int>();
            space.stream_ids = obj.at("streams").get<std::vector<std::string>>();
            space.stress_per_layer = obj.at("stress").get<std::vector<double>>();
            for (const auto& c : obj.at("converged")) space.converged.push_back(c.get<bool>());
            header = true;
        } else if (kind == "point") {
            space.points.push_back(json_point(obj.at("id")));
            coords.push_back(json_vec(obj.at("x")));
        } else if (kind == "edge") {
            const auto type = obj.at("type").get<std::string>();
            if (type != "thread" && type != "knn") throw InputError("space: unknown edge type '" + type + "'");
            space.edges.push_back({obj.at("a").get<std::size_t>(), obj.at("b").get<std::size_t>(),
                                   obj.at("distance").get<double>(), type == "thread" ? EdgeKind::thread : EdgeKind::knn});
        } else if (kind == "cell") {
            space.cells.push_back(obj.at("rows").get<std::vector<std::size_t>>());
        } else {
            throw InputError("space: unknown record kind '" + kind + "'");
        }
    });
    if (!header) throw InputError("space: missing header record");
    space.coords.resize(static_cast<Eigen::Index>(coords.size()), space.n + 1);
    for (std::size_t r = 0; r < coords.size(); ++r) {
        if (coords[r].size() != space.n + 1) throw InputError("space: point has the wrong dimension");
        space.coords.row(static_cast<Eigen::Index>(r)) = coords[r].transpose();
    }
    for (const auto& e : space.edges)
        if (e.a >= coords.size() || e.b >= coords.size()) throw InputError("space: edge references a missing point");
    for (std::uint32_t s = 0; s < space.stream_ids.size(); ++s) {
        Thread th{space.stream_ids[s], {}};
        for (std::uint32_t pos = 0;; ++pos) {
            auto r = space.row_of({s, pos});
            if (!r) break;
            th.rows.push_back(*r);
        }
        space.threads.push_back(std::move(th));
    }
    return space;
}

void write_points_csv(std::ostream& out, const EmbeddedSpace& space) {
    out << "label";
    for (int a = 0; a < space.n; ++a) out << ",x" << a;
    out << ",layer\n";
    for (std::size_t r = 0; r < space.points.size(); ++r) {
        out << space.label(r);
        for (Eigen::Index a = 0; a < space.coords.cols(); ++a)
            out << ',' << format_double(space.coords(static_cast<Eigen::Index>(r), a));
        out << '\n';
    }
}

void write_stress_csv(std::ostream& out, const EmbeddedSpace& space) {
    out << "layer,iteration,stress\n";
    for (std::size_t t = 0; t < space.stress_history.size(); ++t)
        for (std::size_t i = 0; i < space.stress_history[t].size(); ++i)
            out << t << ',' << i << ',' << format_double(space.stress_history[t][i]) << '\n';
}

// ---- metric field

void write_metric_field(std::ostream& out, const MetricField<double>& field) {
    const auto& grid = field.grid();
    emit(out, json{{"kind", "metric"},
                   {"nodes", grid.node_counts()},
                   {"origin", vec_json(grid.origin())},
                   {"spacing", vec_json(grid.spacing())},
                   {"eps_pd", field.eps_pd()}});
    const int m = grid.dim();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& g = field.sample(i);
        json upper = json::array();
        for (int j = 0; j < m; ++j)
            for (int k = j; k < m; ++k) upper.push_back(g(j, k));
        emit(out, json{{"node", i}, {"coords", vec_json(grid.position(i))}, {"g", std::move(upper)}});
    }
}

MetricField<double> read_metric_field(std::istream& in) {
    std::optional<Grid<double>> grid;
    double eps = 0.0;
    std::vector<Eigen::MatrixXd> samples;
    for_each_json_line(in, "metric", [&](const json& obj) {
        if (obj.contains("kind")) {
            grid.emplace(obj.at("nodes").get<std::vector<int>>(), json_vec(obj.at("origin")), json_vec(obj.at("spacing")));
            eps = obj.at("eps_pd").get<double>();
            return;
        }
        if (!grid) throw InputError("metric: node record before the grid header");
        const int m = grid->dim();
        if (obj.at("node").get<std::size_t>() != samples.size()) throw InputError("metric: node records out of order");
        const auto& upper = obj.at("g");
        if (upper.size() != static_cast<std::size_t>(m * (m + 1) / 2)) throw InputError("metric: sample has the wrong size");
        Eigen::MatrixXd g(m, m);
        std::size_t u = 0;
        for (int j = 0; j < m; ++j)
            for (int k = j; k < m; ++k) g(j, k) = g(k, j) = upper[u++].get<double>();
        samples.push_back(std::move(g));
    });
    if (!grid) throw InputError("metric: missing grid header");
    if (samples.size() != grid->size()) throw InputError("metric: expected one sample per grid node");
    return MetricField<double>(std::move(*grid), std::move(samples), eps);
}

void write_fit_report(std::ostream& out, const FitReport& report) {
    out << json{{"nodes", report.status.size()},
                {"fitted", report.fitted},
                {"no_data", report.no_data},
                {"degenerate", report.degenerate},
                {"eps_pd", report.eps_pd}}
               .dump(2)
        << '\n';
}

// ---- trajectories

void write_trajectory_csv(std::ostream& out, const Trajectory<double>& trajectory) {
    const Eigen::Index m = trajectory.samples.empty() ? 0 : trajectory.samples.front().x.size();
    out << 't';
    for (Eigen::Index a = 0; a < m; ++a) out << ",x" << a;
    for (Eigen::Index a = 0; a < m; ++a) out << ",v" << a;
    out << '\n';
    for (const auto& s : trajectory.samples) {
        out << format_double(s.t);
        for (Eigen::Index a = 0; a < m; ++a) out << ',' << format_double(s.x(a));
        for (Eigen::Index a = 0; a < m; ++a) out << ',' << format_double(s.v(a));
        out << '\n';
    }
}

Trajectory<double> read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("trajectory: empty file");
    const auto header = split(line, ',');
    if (header.empty() || header[0] != "t" || header.size() % 2 != 1) throw InputError("trajectory: malformed header");
    const auto m = static_cast<Eigen::Index>((header.size() - 1) / 2);
    Trajectory<double> tr;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size()) throw InputError("trajectory: row has the wrong number of columns");
        Trajectory<double>::Sample s{parse_number(cells[0]), Eigen::VectorXd(m), Eigen::VectorXd(m)};
        for (Eigen::Index a = 0; a < m; ++a) {
            s.x(a) = parse_number(cells[static_cast<std::size_t>(1 + a)]);
            s.v(a) = parse_number(cells[static_cast<std::size_t>(1 + m + a)]);
        }
        tr.samples.push_back(std::move(s));
    }
    return tr;
}

// ---- diagnostics

void write_roughness_text(std::ostream& out, const RoughnessReport& r, const Grid<double>& grid) {
    out << "n = " << r.n << '\n';
    out << "prominence = " << format_double(r.prominence) << '\n';
    out << "gradient_rms = " << format_double(r.gradient_rms) << '\n';
    out << "peak_count = " << r.peak_count << '\n';
    out << "max_peak_height = " << format_double(r.max_peak_height) << '\n';
    out << "jump_steps = " << r.jumps.steps << '\n';
    out << "jump_median_step = " << format_double(r.jumps.median_step) << '\n';
    out << "jump_mean = " << format_double(r.jumps.mean) << '\n';
    out << "jump_p95 = " << format_double(r.jumps.p95) << '\n';
    out << "jump_max = " << format_double(r.jumps.max) << '\n';
    for (const auto& p : r.peaks) {
        out << "peak = node " << p.node << " at";
        auto x = grid.position(p.node);
        for (Eigen::Index a = 0; a < x.size(); ++a) out << ' ' << format_double(x(a));
        out << " height " << format_double(p.height) << '\n';
    }
}

void write_roughness_jsonl(std::ostream& out, const RoughnessReport& r) {
    emit(out, json{{"kind", "roughness"},
                   {"n", r.n},
                   {"spatial_nodes", r.spatial_nodes},
                   {"prominence", r.prominence},
                   {"gradient_rms", r.gradient_rms},
                   {"peak_count", r.peak_count},
                   {"max_peak_height", r.max_peak_height},
                   {"jump_steps", r.jumps.steps},
                   {"jump_median_step", r.jumps.median_step},
                   {"jump_mean", r.jumps.mean},
                   {"jump_p95", r.jumps.p95},
                   {"jump_max", r.jumps.max}});
    for (const auto& p : r.peaks) emit(out, json{{"kind", "peak"}, {"node", p.node}, {"height", p.height}});
}

RoughnessReport read_roughness_jsonl(std::istream& in) {
    RoughnessReport r;
    bool header = false;
    for_each_json_line(in, "roughness report", [&](const json& obj) {
        const auto kind = obj.at("kind").get<std::string>();
        if (kind == "roughness") {
            r.n = obj.at("n").get<int>();
            r.spatial_nodes = obj.at("spatial_nodes").get<std::vector<int>>();
            r.prominence = obj.at("prominence").get<double>();
            r.gradient_rms = obj.at("gradient_rms").get<double>();
            r.peak_count = obj.at("peak_count").get<std::size_t>();
            r.max_peak_height = obj.at("max_peak_height").get<double>();
            r.jumps.steps = obj.at("jump_steps").get<std::size_t>();
            r.jumps.median_step = obj.at("jump_median_step").get<double>();
            r.jumps.mean = obj.at("jump_mean").get<double>();
            r.jumps.p95 = obj.at("jump_p95").get<double>();
            r.jumps.max = obj.at("jump_max").get<double>();
            header = true;
        } else if (kind == "peak") {
            r.peaks.push_back({obj.at("node").get<std::size_t>(), obj.at("height").get<double>()});
        } else {
            throw InputError("roughness report: unknown record kind '" + kind + "'");
        }
    });
    if (!header) throw InputError("roughness report: missing summary record");
    return r;
}

void write_heightmap_csv(std::ostream& out, const RoughnessReport& r, const Grid<double>& grid) {
    out << "node";
    for (int a = 0; a < grid.dim(); ++a) out << ",x" << a;
    out << ",distortion\n";
    for (std::size_t i = 0; i < r.distortion.size(); ++i) {
        out << i;
        auto x = grid.position(i);
        for (Eigen::Index a = 0; a < x.size(); ++a) out << ',' << format_double(x(a));
        out << ',' << format_double(r.distortion[i]) << '\n';
    }
}

void write_smoothing_delta(std::ostream& out, const SmoothingDelta& d) {
    emit(out, json{{"kind", "smoothing_delta"},
                   {"gradient_rms", d.gradient_rms},
                   {"peak_count", d.peak_count},
                   {"max_peak_height", d.max_peak_height},
                   {"jump_mean", d.jump_mean},
                   {"jump_p95", d.jump_p95},
                   {"jump_max", d.jump_max},
                   {"improved", d.improved}});
}

void write_comparison_text(std::ostream& out, const ComparisonReport& r) {
    out << "correspondence_size = " << r.correspondence_size << '\n';
    out << "procrustes_residual = " << format_double(r.procrustes_residual) << '\n';
    out << "deviation_mean = " << format_double(r.deviation_mean) << '\n';
    out << "deviation_max = " << format_double(r.deviation_max) << '\n';
    for (const auto& p : r.pairs)
        out << "pair = " << p.thread_a << ' ' << p.thread_b << " points " << p.paired_points << " frechet "
            << format_double(p.frechet) << " rms " << format_double(p.pointwise_rms) << '\n';
    for (const auto& w : r.warnings) out << "warning = " << w << '\n';
}

void write_comparison_jsonl(std::ostream& out, const ComparisonReport& r) {
    emit(out, json{{"kind", "comparison"},
                   {"correspondence_size", r.correspondence_size},
                   {"procrustes_residual", r.procrustes_residual},
                   {"deviation_mean", r.deviation_mean},
                   {"deviation_max", r.deviation_max}});
    for (const auto& p : r.pairs)
        emit(out, json{{"kind", "pair"},
                       {"a", p.thread_a},
                       {"b", p.thread_b},
                       {"points", p.paired_points},
                       {"frechet", p.frechet},
                       {"rms", p.pointwise_rms}});
    for (const auto& w : r.warnings) emit(out, json{{"kind", "warning"}, {"message", w}});
}

Correspondence read_correspondence(std::istream& in) {
    Correspondence out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw InputError("correspondence: line " + std::to_string(number) + " is not '<a>\\t<b>'");
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

}  // namespace irspace
