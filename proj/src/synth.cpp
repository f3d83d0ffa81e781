#include "irspace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include <json.hpp>

#include "irspace/error.hpp"

namespace irspace {

namespace {

using nlohmann::json;

constexpr std::int64_t kEpochMs = 1'700'000'000'000;
constexpr std::int64_t kSessionSpacingMs = 2 * 60 * 60 * 1000;

// Vocabulary anchors on a regular lattice enclosing the surface with term_radius margin.
struct Lattice {
    Eigen::Vector3d origin;
    double spacing = 1.0;
    int nx = 1, ny = 1, nz = 1;

    Eigen::Vector3d anchor(int i, int j, int k) const {
        return origin + spacing * Eigen::Vector3d(i, j, k);
    }
    int index(int i, int j, int k) const { return (k * ny + j) * nx + i; }
};

std::pair<double, double> height_range(const Surface& s) {
    double lo = 0.0, hi = 0.0;
    constexpr int kSamples = 64;
    for (int i = 0; i <= kSamples; ++i)
        for (int j = 0; j <= kSamples; ++j) {
            double h = s.height(double(i) / kSamples, double(j) / kSamples);
            lo = std::min(lo, h);
            hi = std::max(hi, h);
        }
    return {lo, hi};
}

Lattice make_lattice(const SynthConfig& cfg) {
    const double r = cfg.term_radius;
    auto [zlo, zhi] = height_range(cfg.surface);
    const double extent = 1.0 + 2.0 * r;
    Lattice lat;
    if (zhi - zlo <= 0.0) {
        int k = std::max(2, static_cast<int>(std::floor(std::sqrt(double(cfg.vocabulary_size)))));
        lat.spacing = extent / (k - 1);
        lat.nx = lat.ny = k;
        lat.nz = 1;
        lat.origin = Eigen::Vector3d(-r, -r, zlo);
    } else {
        const double zextent = (zhi - zlo) + 2.0 * r;
        lat.spacing = std::cbrt(extent * extent * zextent / cfg.vocabulary_size);
        lat.nx = lat.ny = static_cast<int>(std::floor(extent / lat.spacing)) + 1;
        lat.nz = static_cast<int>(std::floor(zextent / lat.spacing)) + 1;
        lat.origin = Eigen::Vector3d(-r, -r, zlo - r);
    }
    return lat;
}

std::string term_name(int index) { return "w" + std::to_string(index); }

// Returns (doc_terms, query_terms) for a click at surface point p.
std::pair<std::vector<std::string>, std::vector<std::string>> click_terms(const Lattice& lat,
                                                                          const Eigen::Vector3d& p,
                                                                          double radius) {
    auto range = [&](double c, int n, int axis) {
        double lo = (c - radius - lat.origin[axis]) / lat.spacing;
        double hi = (c + radius - lat.origin[axis]) / lat.spacing;
        return std::pair{std::max(0, static_cast<int>(std::ceil(lo))),
                         std::min(n - 1, static_cast<int>(std::floor(hi)))};
    };
    auto [i0, i1] = range(p.x(), lat.nx, 0);
    auto [j0, j1] = range(p.y(), lat.ny, 1);
    auto [k0, k1] = range(p.z(), lat.nz, 2);

    std::vector<std::pair<double, int>> inside;
    const double r2 = radius * radius;
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                double d2 = (lat.anchor(i, j, k) - p).squaredNorm();
                if (d2 <= r2) inside.emplace_back(d2, lat.index(i, j, k));
            }
    // Nearest lattice anchor as fallback keeps the query non-empty.
    if (inside.empty()) {
        int i = std::clamp(static_cast<int>(std::lround((p.x() - lat.origin.x()) / lat.spacing)), 0, lat.nx - 1);
        int j = std::clamp(static_cast<int>(std::lround((p.y() - lat.origin.y()) / lat.spacing)), 0, lat.ny - 1);
        int k = std::clamp(static_cast<int>(std::lround((p.z() - lat.origin.z()) / lat.spacing)), 0, lat.nz - 1);
        inside.emplace_back((lat.anchor(i, j, k) - p).squaredNorm(), lat.index(i, j, k));
    }

    std::vector<int> doc_idx;
    doc_idx.reserve(inside.size());
    for (const auto& a : inside) doc_idx.push_back(a.second);
    std::sort(doc_idx.begin(), doc_idx.end());

    std::sort(inside.begin(), inside.end());
    std::vector<std::string> query;
    for (std::size_t q = 0; q < std::min<std::size_t>(2, inside.size()); ++q) query.push_back(term_name(inside[q].second));

    std::vector<std::string> doc;
    doc.reserve(doc_idx.size());
    for (int idx : doc_idx) doc.push_back(term_name(idx));
    return {std::move(doc), std::move(query)};
}

}  // namespace

SurfaceKind parse_surface_kind(std::string_view name) {
    if (name == "flat") return SurfaceKind::flat;
    if (name == "bump") return SurfaceKind::bump;
    if (name == "height_grid") return SurfaceKind::height_grid;
    throw ValidationError("unknown surface '" + std::string(name) + "' (expected flat, bump or height_grid)");
}

std::string_view to_string(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::flat: return "flat";
        case SurfaceKind::bump: return "bump";
        case SurfaceKind::height_grid: return "height_grid";
    }
    return "flat";
}

double Surface::height(double x, double y) const {
    switch (kind) {
        case SurfaceKind::flat:
            return 0.0;
        case SurfaceKind::bump: {
            double r2 = (Eigen::Vector2d(x, y) - bump_center).squaredNorm();
            double R2 = bump_radius * bump_radius;
            return r2 < R2 ? std::sqrt(R2 - r2) : 0.0;
        }
        case SurfaceKind::height_grid: {
            if (heights.size() == 0) return 0.0;
            const auto nx = heights.rows(), ny = heights.cols();
            auto locate = [](double u, Eigen::Index n) {
                if (n == 1) return std::pair<Eigen::Index, double>{0, 0.0};
                double g = std::clamp(u, 0.0, 1.0) * double(n - 1);
                auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(g)), n - 2);
                return std::pair<Eigen::Index, double>{i, g - double(i)};
            };
            auto [i, fx] = locate(x, nx);
            auto [j, fy] = locate(y, ny);
            auto at = [&](Eigen::Index a, Eigen::Index b) {
                return heights(std::min(a, nx - 1), std::min(b, ny - 1));
            };
            return (1 - fx) * (1 - fy) * at(i, j) + fx * (1 - fy) * at(i + 1, j) + (1 - fx) * fy * at(i, j + 1) +
                   fx * fy * at(i + 1, j + 1);
        }
    }
    return 0.0;
}

void SynthConfig::validate() const {
    if (num_users < 1) throw ValidationError("SynthConfig.num_users must be >= 1");
    if (sessions_per_user < 1) throw ValidationError("SynthConfig.sessions_per_user must be >= 1");
    if (session_length_min < 2) throw ValidationError("SynthConfig.session_length_range min must be >= 2");
    if (session_length_max < session_length_min)
        throw ValidationError("SynthConfig.session_length_range max must be >= min");
    if (vocabulary_size < 4) throw ValidationError("SynthConfig.vocabulary_size must be >= 4");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
        throw ValidationError("SynthConfig.noise_scale must be >= 0");
    if (!(step_length > 0.0)) throw ValidationError("SynthConfig.step_length must be > 0");
    if (!(term_radius > 0.0)) throw ValidationError("SynthConfig.term_radius must be > 0");
    if (surface.kind == SurfaceKind::height_grid && surface.heights.size() == 0)
        throw ValidationError("SynthConfig.surface height_grid needs a non-empty heights grid");
}

SynthOutput synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto uniform_int = [&](int lo, int hi) {
        return lo + static_cast<int>(std::floor(unit(rng) * double(hi - lo + 1)));
    };

    const Lattice lat = make_lattice(cfg);
    SynthOutput out;
    auto inside = [](const Eigen::Vector2d& p) {
        return p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0;
    };

    for (int u = 0; u < cfg.num_users; ++u) {
        const std::string user = "u" + std::to_string(u);
        for (int s = 0; s < cfg.sessions_per_user; ++s) {
            const int length = std::min(uniform_int(cfg.session_length_min, cfg.session_length_max),
                                        cfg.session_length_max);
            Eigen::Vector2d p(uniform(0.15, 0.85), uniform(0.15, 0.85));
            double heading = uniform(0.0, 2.0 * std::numbers::pi);
            std::int64_t ts = kEpochMs + std::int64_t(u) * 1000 + std::int64_t(s) * kSessionSpacingMs;
            for (int c = 0; c < length; ++c) {
                if (c > 0) {
                    heading += uniform(-0.5, 0.5);
                    Eigen::Vector2d next;
                    for (int attempt = 0;; ++attempt) {
                        next = p + cfg.step_length * Eigen::Vector2d(std::cos(heading), std::sin(heading));
                        if (inside(next) || attempt >= 32) break;
                        heading = attempt == 0 ? heading + std::numbers::pi : uniform(0.0, 2.0 * std::numbers::pi);
                    }
                    if (cfg.noise_scale > 0.0) next += cfg.noise_scale * Eigen::Vector2d(gauss(rng), gauss(rng));
                    p = next;
                    ts += uniform_int(20'000, 120'000);
                }
                const Eigen::Vector3d surface_point(p.x(), p.y(), cfg.surface.height(p.x(), p.y()));
                auto [doc, query] = click_terms(lat, surface_point, cfg.term_radius);
                ClickEvent e;
                e.user_key = user;
                e.timestamp_ms = ts;
                e.query_terms = std::move(query);
                e.doc_id = "d" + std::to_string(out.events.size());
                e.doc_terms = std::move(doc);
                out.events.push_back(std::move(e));
                out.truth.planted.push_back(p);
            }
        }
    }

    // Homogeneous index: one document per click, every vocabulary term in the
    // same fraction of documents.
    CorpusStats& corpus = out.corpus;
    corpus.num_docs = static_cast<std::int64_t>(out.events.size());
    const std::int64_t df = std::max<std::int64_t>(1, corpus.num_docs / 10);
    const int vocab = lat.nx * lat.ny * lat.nz;
    for (int t = 0; t < vocab; ++t) corpus.doc_freq[term_name(t)] = df;
    double total = 0.0;
    for (const auto& e : out.events) {
        double len = std::max<double>(1.0, double(e.doc_terms.size()));
        corpus.doc_len[e.doc_id] = len;
        total += len;
    }
    corpus.avg_doc_len = total / double(out.events.size());
    return out;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
    for (std::size_t i = 0; i < truth.planted.size(); ++i) {
        out << json{{"event", i}, {"x", truth.planted[i].x()}, {"y", truth.planted[i].y()}}.dump() << '\n';
    }
}

GroundTruth read_ground_truth(std::istream& in) {
    if (!in.good()) throw InputError("ground truth stream is not readable");
    GroundTruth truth;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded()) throw InputError("ground truth: invalid json line");
        auto idx = obj.at("event").get<std::size_t>();
        if (idx >= truth.planted.size()) truth.planted.resize(idx + 1, Eigen::Vector2d::Zero());
        truth.planted[idx] = Eigen::Vector2d(obj.at("x").get<double>(), obj.at("y").get<double>());
    }
    return truth;
}

}  // namespace irspace
