// Acceptance gate: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "irspace/diagnostics.hpp"
#include "irspace/geometry.hpp"
#include "irspace/logmodel.hpp"
#include "irspace/mds.hpp"
#include "irspace/metric_fit.hpp"
#include "irspace/metricspace.hpp"
#include "irspace/pipeline.hpp"
#include "irspace/procrustes.hpp"
#include "irspace/skeleton.hpp"
#include "irspace/synth.hpp"
#include "support.hpp"

using namespace irspace;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Appends "name=value" to the detail and folds the check into the verdict.
void expect(Outcome& o, bool ok, const std::string& what) {
    if (!o.detail.empty()) o.detail += ", ";
    o.detail += what;
    if (!ok) {
        o.pass = false;
        o.detail += " (FAIL)";
    }
}

Eigen::MatrixXd sphere_metric(const Eigen::VectorXd& x) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = std::sin(x(0)) * std::sin(x(0));
    return g;
}

MetricField<double> sphere_field(int nodes, double th_lo, double th_hi, double ph_lo, double ph_hi, double eps) {
    auto grid = Grid<double>::spanning(Eigen::Vector2d(th_lo, ph_lo), Eigen::Vector2d(th_hi, ph_hi), {nodes, nodes});
    return MetricField<double>::from_function(grid, sphere_metric, eps);
}

// ---------------------------------------------------------------------------

Outcome flat_geodesics() {
    Outcome o;
    auto grid = Grid<double>::spanning(Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(), {32, 32, 32});
    auto field = MetricField<double>::from_function(grid, [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(3, 3); }, 1e-8);
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> start(0.35, 0.65), dir(-0.25, 0.25);
    double worst = 0.0;
    Timer t;
    for (int i = 0; i < 20; ++i) {
        Eigen::Vector3d x0(start(rng), start(rng), start(rng)), v0(dir(rng), dir(rng), dir(rng));
        auto r = integrate_geodesic(field, x0, v0, 1.0, 1e-3);
        if (r.status != GeodesicStatus::completed) worst = INFINITY;
        else worst = std::max(worst, (r.trajectory.samples.back().x - (x0 + v0)).norm());
    }
    const double secs = t.seconds();
    expect(o, worst < 1e-8, "max endpoint error " + fmt("%.2e", worst));
    expect(o, secs < 5.0, "runtime " + fmt("%.2f", secs) + " s");
    return o;
}

Outcome sphere_connection() {
    Outcome o;
    const double lo = 0.5, hi = pi - 0.5;
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> th(0.7, pi - 0.7), ph(0.5, 2.5);
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 100; ++i) pts.emplace_back(th(rng), ph(rng));
    auto max_error = [&](int nodes) {
        auto f = sphere_field(nodes, lo, hi, 0.0, 3.0, 1e-10);
        double worst = 0.0;
        for (const auto& p : pts) {
            auto gamma = christoffel(f, Eigen::VectorXd(p));
            worst = std::max(worst, std::abs(gamma(0, 1, 1) + std::sin(p(0)) * std::cos(p(0))));
            worst = std::max(worst, std::abs(gamma(1, 0, 1) - std::cos(p(0)) / std::sin(p(0))));
        }
        return worst;
    };
    const double e1 = max_error(256), e2 = max_error(511);
    expect(o, e1 < 5e-4, "max connection error " + fmt("%.2e", e1));
    expect(o, e1 / e2 >= 3.5 && e1 / e2 <= 4.5, "halving ratio " + fmt("%.3f", e1 / e2));

    // symmetric about the equator and wide enough for a pole-to-pole meridian
    auto f = sphere_field(256, pi / 2 - 3.3, pi / 2 + 3.3, -1.0, 7.5, 1e-10);
    auto eq = integrate_geodesic(f, Eigen::Vector2d(pi / 2, 0.0), Eigen::Vector2d(0.0, 1.0), 1.0, 1e-3);
    double drift = eq.status == GeodesicStatus::completed ? 0.0 : INFINITY;
    for (const auto& s : eq.trajectory.samples) drift = std::max(drift, std::abs(s.x(0) - pi / 2));
    expect(o, drift < 1e-6, "equator drift " + fmt("%.2e", drift));

    auto mer = integrate_geodesic(f, Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(1.0, 0.0), pi, 1e-3);
    const double len = mer.status == GeodesicStatus::completed ? curve_length(f, mer.trajectory) : INFINITY;
    expect(o, std::abs(len - pi) < 1e-4, "meridian length error " + fmt("%.2e", std::abs(len - pi)));
    return o;
}

Outcome speed_conservation() {
    Outcome o;
    auto f = sphere_field(256, 0.2, pi - 0.2, -1.0, 3.0, 1e-10);
    double worst = 0.0;
    for (const auto& [x, v] : std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>>{
             {{1.0, 0.3}, {0.4, 0.7}}, {{1.4, 0.0}, {-0.5, 1.2}}, {{2.0, 1.0}, {0.3, -0.8}}}) {
        auto r = integrate_geodesic(f, x, v, 1.0, 1e-3);
        if (r.status != GeodesicStatus::completed) {
            worst = INFINITY;
            continue;
        }
        auto q = [&](const Trajectory<double>::Sample& s) { return s.v.dot(f.metric(s.x) * s.v); };
        const double q0 = q(r.trajectory.samples.front());
        for (const auto& s : r.trajectory.samples) worst = std::max(worst, std::abs(q(s) - q0) / q0);
    }
    expect(o, worst < 1e-6, "max relative speed drift " + fmt("%.2e", worst));
    return o;
}

// Independent reference for the tetrahedron: many random starts of plain
// gradient descent with backtracking on the normalized stress.
double brute_force_min_stress(const Eigen::MatrixXd& D, int dim, int starts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    const Eigen::Index n = D.rows();
    double den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) den += D(i, j) * D(i, j);
    auto stress = [&](const Eigen::MatrixXd& X) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double e = (X.row(i) - X.row(j)).norm() - D(i, j);
                s += e * e;
            }
        return s / den;
    };
    double best = INFINITY;
    for (int s = 0; s < starts; ++s) {
        Eigen::MatrixXd X(n, dim);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int a = 0; a < dim; ++a) X(i, a) = N01(rng);
        double cur = stress(X), step = 0.1;
        for (int it = 0; it < 20000 && step > 1e-14; ++it) {
            Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, dim);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (i == j) continue;
                    Eigen::RowVectorXd d = X.row(i) - X.row(j);
                    const double len = d.norm();
                    if (len > 0) G.row(i) += 2.0 * (len - D(i, j)) / len * d / den;
                }
            Eigen::MatrixXd Y = X - step * G;
            const double next = stress(Y);
            if (next < cur) {
                X = Y;
                cur = next;
                step *= 1.2;
            } else {
                step *= 0.5;
            }
        }
        best = std::min(best, cur);
    }
    return best;
}

Outcome embedding() {
    Outcome o;
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> U(-1, 1);

    double worst_stress = 0.0, worst_rel = 0.0;
    for (int size : {10, 25, 50, 100, 200}) {
        Eigen::MatrixXd P(size, 2);
        for (int i = 0; i < size; ++i) P.row(i) << U(rng), U(rng);
        Eigen::MatrixXd D = pairwise_distances(P);
        auto r = embed_distances(D, 2, {}, 1);
        worst_stress = std::max(worst_stress, r.stress());
        Eigen::MatrixXd E = pairwise_distances(r.X);
        for (int i = 0; i < size; ++i)
            for (int j = i + 1; j < size; ++j) worst_rel = std::max(worst_rel, std::abs(E(i, j) - D(i, j)) / D(i, j));
    }
    expect(o, worst_stress < 1e-6, "realizable stress " + fmt("%.2e", worst_stress));
    expect(o, worst_rel < 1e-4, "max relative distance error " + fmt("%.2e", worst_rel));

    int violations = 0;
    for (int run = 0; run < 100; ++run) {
        std::mt19937_64 r2(1000 + static_cast<std::uint64_t>(run));
        std::uniform_real_distribution<double> V(-1, 1);
        const int size = 8 + run % 30;
        Eigen::MatrixXd P(size, 5);
        for (int i = 0; i < size; ++i)
            for (int a = 0; a < 5; ++a) P(i, a) = V(r2);
        Eigen::MatrixXd D = pairwise_distances(P);
        MajorizationOptions mo;
        mo.tolerance = 0.0;
        mo.max_iters = 200;
        auto res = stress_majorization<double>(D, classical_scaling<double>(D, 2, static_cast<std::uint64_t>(run)), mo);
        for (std::size_t i = 1; i < res.stress_history.size(); ++i)
            if (res.stress_history[i] > res.stress_history[i - 1] * (1 + 1e-12)) ++violations;
    }
    expect(o, violations == 0, "stress increases in 100 runs: " + std::to_string(violations));

    Eigen::MatrixXd tet = Eigen::MatrixXd::Ones(4, 4) - Eigen::MatrixXd::Identity(4, 4);
    auto r = embed_distances(tet, 2, {}, 1);
    const double reference = brute_force_min_stress(tet, 2, 200, 7);
    expect(o, std::abs(r.stress() - reference) < 1e-3,
           "tetrahedron stress " + fmt("%.5f", r.stress()) + " vs reference " + fmt("%.5f", reference));
    return o;
}

Outcome bm25() {
    Outcome o;
    CorpusStats st;
    st.num_docs = 20;
    st.avg_doc_len = 12.0;
    st.doc_freq = {{"a", 3}, {"b", 7}, {"c", 20}, {"d", 1}};
    struct Case {
        std::vector<std::string> q;
        TermFreqs f;
        double len, k1, b, expect;
    };
    // evaluated by hand from the closed form
    const std::vector<Case> cases{
        {{"a"}, {{"a", 1}}, 12, 1.2, 0.75, 1.791759469228055},  // |D| = avgdl, f = 1: the idf itself
        {{"a"}, {{"b", 1}}, 12, 1.2, 0.75, 0.0},
        {{"a"}, {{"a", 2}}, 6, 1.2, 0.75, 2.866815150764888},
        {{"a", "b"}, {{"a", 1}, {"b", 3}}, 24, 1.2, 0.75, 2.604019893754919},
        {{"b"}, {{"b", 4}}, 30, 2.0, 0.0, 2.0592388343623163},
        {{"d"}, {{"d", 1}}, 24, 1.2, 1.0, 1.7076253309275202},
        {{"c"}, {{"c", 5}}, 12, 1.2, 0.75, 0.042753720543494474},
        {{"a", "d"}, {{"a", 2}, {"d", 1}}, 3, 1.5, 0.5, 6.455038615897228},
        {{"a", "b", "c", "d"}, {{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}}, 18, 0.9, 0.3, 6.979564306602059},
        {{"e", "a"}, {{"a", 7}, {"e", 2}}, 40, 1.2, 0.75, 5.781912346198866},
    };
    double worst = 0.0;
    for (const auto& c : cases) {
        st.doc_len = {{"doc", c.len}};
        worst = std::max(worst, std::abs(bm25_score(c.q, "doc", c.f, st, {c.k1, c.b}) - c.expect));
    }
    expect(o, worst < 1e-10, "max hand-evaluated error " + fmt("%.2e", worst));

    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> U(0, 1);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        CorpusStats s;
        s.num_docs = 1 + static_cast<std::int64_t>(rng() % 1000);
        s.doc_freq = {{"t", 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(s.num_docs))}};
        s.avg_doc_len = 1 + 100 * U(rng);
        const Bm25Params p{3 * U(rng) + 1e-3, U(rng)};
        const std::int64_t f = 1 + static_cast<std::int64_t>(rng() % 50);
        const double len = 1 + 200 * U(rng);
        auto score = [&](std::int64_t freq, double l) {
            s.doc_len = {{"doc", l}};
            return bm25_score({"t"}, "doc", {{"t", freq}}, s, p);
        };
        const double base = score(f, len);
        if (score(f + 1 + static_cast<std::int64_t>(rng() % 5), len) < base) ++bad;
        if (score(f, len * (1 + U(rng))) > base) ++bad;
    }
    expect(o, bad == 0, "monotonicity violations " + std::to_string(bad));
    return o;
}

struct E2E {
    EmbeddedSpace space;
    FitResult fit;
    RoughnessReport rough;
    std::vector<Clickstream> streams;
    GroundTruth truth;
};

E2E run_synthetic(SurfaceKind surface) {
    SynthConfig cfg;
    cfg.surface.kind = surface;
    cfg.num_users = 50;
    cfg.session_length_min = 5;
    cfg.session_length_max = 10;
    cfg.noise_scale = 0.0;
    auto out = synth_generate(cfg);
    E2E r;
    r.truth = out.truth;
    r.streams = extract_clickstreams(out.events, kDefaultGapThresholdMs, 2);
    auto pre = build_prespace(r.streams, DistanceMethod::tfidf_cosine, out.corpus, {});
    auto sk = form_simplices(link_nearest_neighbors(pre, default_neighbor_count(2)), 2);
    r.space = embed_layers(pre, sk, 2);
    r.fit = fit_metric_field(r.space);
    r.rough = roughness(r.space, r.fit.field);
    return r;
}

Outcome end_to_end() {
    Outcome o;
    Timer t;
    auto flat = run_synthetic(SurfaceKind::flat);
    const double secs = t.seconds();

    // per layer: similarity alignment of embedded onto planted points
    double worst_ratio = 0.0;
    for (std::size_t layer = 0; layer < flat.space.num_layers(); ++layer) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < flat.space.points.size(); ++r)
            if (flat.space.points[r].pos == layer) rows.push_back(r);
        if (rows.size() < 3) continue;
        Eigen::MatrixXd emb(static_cast<Eigen::Index>(rows.size()), 2), planted(emb.rows(), 2);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto p = flat.space.points[rows[i]];
            const auto& ev = flat.streams[p.stream].events[p.pos];
            emb.row(static_cast<Eigen::Index>(i)) = flat.space.coords.row(static_cast<Eigen::Index>(rows[i])).head(2);
            planted.row(static_cast<Eigen::Index>(i)) = flat.truth.planted[std::stoul(ev.doc_id.substr(1))].transpose();
        }
        auto T = fit_rigid(emb, planted, Reflection::allow, true);
        const double resid = rms_deviation(planted, T.apply(emb));
        const double diam = pairwise_distances(planted).maxCoeff();
        worst_ratio = std::max(worst_ratio, resid / diam);
    }
    expect(o, worst_ratio < 0.05, "worst layer residual " + fmt("%.2f", 100 * worst_ratio) + "% of diameter");

    // spatial block of every fitted interior node against c * I
    const auto& field = flat.fit.field;
    const auto& grid = field.grid();
    std::vector<std::size_t> nodes;
    double trace_sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (flat.fit.report.status[i] != NodeFit::fitted || !grid.interior(grid.position(i))) continue;
        nodes.push_back(i);
        trace_sum += field.sample(i).topLeftCorner(2, 2).trace() / 2.0;
    }
    const double c = nodes.empty() ? 0.0 : trace_sum / double(nodes.size());
    double worst_dev = nodes.empty() ? INFINITY : 0.0;
    for (auto i : nodes) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(field.sample(i).topLeftCorner(2, 2), Eigen::EigenvaluesOnly);
        worst_dev = std::max(worst_dev, (eig.eigenvalues().array() - c).abs().maxCoeff() / c);
    }
    expect(o, worst_dev <= 0.15, "metric deviation from " + fmt("%.3g", c) + " I: " + fmt("%.1f", 100 * worst_dev) + "% over " +
                                     std::to_string(nodes.size()) + " nodes");

    auto bump = run_synthetic(SurfaceKind::bump);
    expect(o, flat.rough.gradient_rms < bump.rough.gradient_rms,
           "gradient_rms flat " + fmt("%.3g", flat.rough.gradient_rms) + " vs bump " + fmt("%.3g", bump.rough.gradient_rms));
    expect(o, secs < 60.0, "runtime " + fmt("%.1f", secs) + " s");
    return o;
}

Outcome sessionization() {
    Outcome o;
    const std::size_t N = 1'000'000;
    const std::int64_t gap = 30 * 60 * 1000;
    std::mt19937_64 rng(505);
    std::vector<ClickEvent> ev;
    ev.reserve(N);
    for (std::size_t i = 0; i < N; ++i)
        ev.push_back({"u" + std::to_string(rng() % 20000), static_cast<std::int64_t>(rng() % (30LL * 24 * 3600 * 1000)),
                      {"q"}, "d" + std::to_string(i), {}});
    Timer t;
    auto streams = extract_clickstreams(ev, gap, 1);
    const double secs = t.seconds();

    std::vector<char> seen(N, 0);
    std::size_t total = 0, bad = 0;
    std::map<std::string, std::int64_t> last_end;
    for (const auto& s : streams) {
        for (std::size_t i = 0; i < s.events.size(); ++i) {
            const auto idx = std::stoul(s.events[i].doc_id.substr(1));
            if (seen[idx]++) ++bad;
            if (s.events[i].user_key != s.user_key) ++bad;
            if (i > 0) {
                const auto d = s.events[i].timestamp_ms - s.events[i - 1].timestamp_ms;
                if (d < 0 || d > gap) ++bad;
            }
        }
        total += s.events.size();
        auto it = last_end.find(s.user_key);
        if (it != last_end.end() && s.events.front().timestamp_ms - it->second <= gap) ++bad;
        last_end[s.user_key] = s.events.back().timestamp_ms;
    }
    expect(o, bad == 0 && total == N, "property violations " + std::to_string(bad) + ", events kept " + std::to_string(total));
    const double rate = double(N) / secs;
    expect(o, rate >= 1e5, "throughput " + fmt("%.3g", rate) + " events/s");
    return o;
}

Outcome comparison() {
    Outcome o;
    std::mt19937_64 rng(606);
    auto a = test::make_space(test::random_walks(200, 8, 2, rng));

    auto self = compare_environments(a, a, identity_correspondence(a, a));
    expect(o, self.procrustes_residual < 1e-8 && self.deviation_max < 1e-8,
           "self residual " + fmt("%.1e", self.procrustes_residual) + " deviation " + fmt("%.1e", self.deviation_max));

    auto b = a;
    Eigen::MatrixXd R = test::random_rotation(3, rng);
    b.coords = (a.coords * R.transpose()).rowwise() + Eigen::RowVector3d(3, -1, 2);
    auto rigid = compare_environments(a, b, identity_correspondence(a, b));
    expect(o, rigid.procrustes_residual < 1e-8, "rigid residual " + fmt("%.1e", rigid.procrustes_residual));

    const double delta = 1e-5;
    auto c = a;
    c.coords.row(static_cast<Eigen::Index>(c.threads[42].rows[3])) += delta * Eigen::RowVector3d(0.0, 0.6, 0.8);
    auto pert = compare_environments(a, c, identity_correspondence(a, c));
    expect(o, pert.deviation_max >= delta / 2 && pert.deviation_max <= delta,
           "perturbed max deviation " + fmt("%.4g", pert.deviation_max / delta) + " delta");
    return o;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return files;
}

Outcome determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "irspace_acceptance_determinism";
    fs::remove_all(root);
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"one", "two"}) {
        PipelineConfig c;
        c.synth.num_users = 20;
        c.synth.seed = 77;
        c.geodesic.from_thread = "u4#0";
        c.outdir = (root / name).string();
        fs::create_directories(c.outdir);
        for (Stage s : all_stages())
            if (s != Stage::compare) run_stage(s, c);
        runs.push_back(snapshot(c.outdir));
    }
    std::size_t differing = 0;
    for (const auto& [path, bytes] : runs[0]) {
        auto it = runs[1].find(path);
        if (it == runs[1].end() || it->second != bytes) ++differing;
    }
    expect(o, differing == 0 && runs[0].size() == runs[1].size() && !runs[0].empty(),
           std::to_string(runs[0].size()) + " files, " + std::to_string(differing) + " differ");
    fs::remove_all(root);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"flat-field geodesics", flat_geodesics},
        {"sphere connection and geodesics", sphere_connection},
        {"speed conservation", speed_conservation},
        {"layer embedding", embedding},
        {"bm25 scoring", bm25},
        {"synthetic end-to-end", end_to_end},
        {"sessionization at scale", sessionization},
        {"environment comparison", comparison},
        {"reproducible artifacts", determinism},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
