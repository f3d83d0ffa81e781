#include "irspace/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "irspace/error.hpp"
#include "irspace/frechet.hpp"

namespace irspace {

std::vector<double> metric_distortion(const MetricField<double>& field, int n) {
    if (n < 1 || n > field.dim()) throw ValidationError("spatial dimension does not fit the metric field");
    std::vector<double> out;
    out.reserve(field.samples().size());
    for (const auto& g : field.samples()) {
        Eigen::MatrixXd block = g.topLeftCorner(n, n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
        // identical eigenvalues give exactly zero instead of a rounding residue
        out.push_back(hi == lo || lo <= 0.0 ? 0.0 : std::log(hi / lo));
    }
    return out;
}

JumpStats jump_stats(const EmbeddedSpace& space) {
    std::vector<double> steps;
    for (const auto& th : space.threads)
        for (std::size_t i = 1; i < th.rows.size(); ++i) {
            auto a = space.coords.row(static_cast<Eigen::Index>(th.rows[i - 1])).head(space.n);
            auto b = space.coords.row(static_cast<Eigen::Index>(th.rows[i])).head(space.n);
            steps.push_back((b - a).norm());
        }
    JumpStats js;
    js.steps = steps.size();
    if (steps.empty()) return js;
    std::sort(steps.begin(), steps.end());
    const std::size_t N = steps.size();
    double median = N % 2 ? steps[N / 2] : 0.5 * (steps[N / 2 - 1] + steps[N / 2]);
    js.median_step = median;
    double unit = median > 0.0 ? median : steps.back();
    if (!(unit > 0.0)) return js;  // every step has zero length
    double sum = 0.0;
    for (double s : steps) sum += s;
    js.mean = sum / double(N) / unit;
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * double(N)));
    js.p95 = steps[std::max<std::size_t>(rank, 1) - 1] / unit;
    js.max = steps.back() / unit;
    return js;
}

RoughnessReport roughness(const EmbeddedSpace& space, const MetricField<double>& field, const RoughnessOptions& opts) {
    if (field.dim() != space.n + 1) throw ValidationError("metric field dimension does not match the embedded space");
    if (!(opts.prominence >= 0.0)) throw ValidationError("diagnose.prominence must be >= 0");
    const auto& grid = field.grid();
    const int m = grid.dim();

    RoughnessReport rep;
    rep.n = space.n;
    rep.spatial_nodes.assign(grid.node_counts().begin(), grid.node_counts().begin() + space.n);
    rep.prominence = opts.prominence;
    rep.distortion = metric_distortion(field, space.n);
    rep.jumps = jump_stats(space);
    const auto& D = rep.distortion;

    double sum_sq = 0.0;
    std::size_t counted = 0;
    std::size_t combos = 1;
    for (int a = 0; a < m; ++a) combos *= 3;
    std::vector<int> nb(static_cast<std::size_t>(m));
    for (std::size_t node = 0; node < grid.size(); ++node) {
        const auto idx = grid.unflatten(node);

        bool inner = true;
        double g2 = 0.0;
        for (int a = 0; a < space.n && inner; ++a) {
            if (idx[a] == 0 || idx[a] == grid.nodes(a) - 1) { inner = false; break; }
            auto lo = idx, hi = idx;
            --lo[a];
            ++hi[a];
            const double d = (D[grid.flatten(hi)] - D[grid.flatten(lo)]) / (2.0 * grid.spacing()(a));
            g2 += d * d;
        }
        if (inner) {
            sum_sq += g2;
            ++counted;
        }

        if (!(D[node] > opts.prominence)) continue;
        bool peak = true;
        for (std::size_t c = 0; c < combos && peak; ++c) {
            std::size_t rest = c;
            bool self = true, inside = true;
            for (int a = 0; a < m; ++a) {
                const int off = static_cast<int>(rest % 3) - 1;
                rest /= 3;
                if (off != 0) self = false;
                nb[a] = idx[a] + off;
                if (nb[a] < 0 || nb[a] >= grid.nodes(a)) inside = false;
            }
            if (self || !inside) continue;
            if (D[grid.flatten(nb)] >= D[node]) peak = false;
        }
        if (peak) {
            rep.peaks.push_back({node, D[node]});
            rep.max_peak_height = std::max(rep.max_peak_height, D[node]);
        }
    }
    rep.gradient_rms = counted ? std::sqrt(sum_sq / double(counted)) : 0.0;
    rep.peak_count = rep.peaks.size();
    return rep;
}

SmoothingDelta smoothing_delta(const RoughnessReport& before, const RoughnessReport& after) {
    if (before.n != after.n || before.spatial_nodes != after.spatial_nodes || before.prominence != after.prominence)
        throw ComparabilityError("roughness reports come from different configurations (n, grid or prominence differ)");
    SmoothingDelta d;
    d.gradient_rms = after.gradient_rms - before.gradient_rms;
    d.peak_count = static_cast<long long>(after.peak_count) - static_cast<long long>(before.peak_count);
    d.max_peak_height = after.max_peak_height - before.max_peak_height;
    d.jump_mean = after.jumps.mean - before.jumps.mean;
    d.jump_p95 = after.jumps.p95 - before.jumps.p95;
    d.jump_max = after.jumps.max - before.jumps.max;
    d.improved = after.gradient_rms < before.gradient_rms && after.max_peak_height < before.max_peak_height;
    return d;
}

Correspondence identity_correspondence(const EmbeddedSpace& a, const EmbeddedSpace& b) {
    Correspondence out;
    for (const auto& th : a.threads)
        if (b.thread(th.stream_id)) out.emplace_back(th.stream_id, th.stream_id);
    return out;
}

namespace {

Eigen::MatrixXd gather(const EmbeddedSpace& s, const std::vector<std::size_t>& rows, std::size_t count) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count), s.coords.cols());
    for (std::size_t i = 0; i < count; ++i) out.row(static_cast<Eigen::Index>(i)) = s.coords.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

}  // namespace

ComparisonReport compare_environments(const EmbeddedSpace& a, const EmbeddedSpace& b,
                                      const Correspondence& correspondence) {
    if (correspondence.empty()) throw ValidationError("correspondence is empty");
    if (a.coords.cols() != b.coords.cols())
        throw ComparabilityError("spaces have different dimensions (" + std::to_string(a.n) + " vs " +
                                 std::to_string(b.n) + ")");

    struct Used {
        const Thread* ta;
        const Thread* tb;
    };
    std::vector<Used> used;
    ComparisonReport rep;
    for (const auto& [ida, idb] : correspondence) {
        const Thread* ta = a.thread(ida);
        const Thread* tb = b.thread(idb);
        if (!ta) throw ValidationError("thread '" + ida + "' does not exist in the first space");
        if (!tb) throw ValidationError("thread '" + idb + "' does not exist in the second space");
        if (ta->rows.size() < 2 || tb->rows.size() < 2) {
            rep.warnings.push_back("skipped pair " + ida + " / " + idb + ": thread shorter than 2 points");
            continue;
        }
        used.push_back({ta, tb});
    }
    if (used.empty()) throw ValidationError("no usable thread pairs in the correspondence");

    std::size_t total = 0;
    for (const auto& u : used) total += std::min(u.ta->rows.size(), u.tb->rows.size());
    Eigen::MatrixXd pa(static_cast<Eigen::Index>(total), a.coords.cols()), pb(pa.rows(), pa.cols());
    Eigen::Index r = 0;
    for (const auto& u : used) {
        const std::size_t k = std::min(u.ta->rows.size(), u.tb->rows.size());
        pa.middleRows(r, static_cast<Eigen::Index>(k)) = gather(a, u.ta->rows, k);
        pb.middleRows(r, static_cast<Eigen::Index>(k)) = gather(b, u.tb->rows, k);
        r += static_cast<Eigen::Index>(k);
    }

    rep.alignment = fit_rigid(pb, pa, Reflection::forbid);
    rep.procrustes_residual = rms_deviation(pa, rep.alignment.apply(pb));
    rep.correspondence_size = used.size();

    double sum = 0.0;
    for (const auto& u : used) {
        Eigen::MatrixXd xa = gather(a, u.ta->rows, u.ta->rows.size());
        Eigen::MatrixXd xb = rep.alignment.apply(gather(b, u.tb->rows, u.tb->rows.size()));
        const std::size_t k = std::min(u.ta->rows.size(), u.tb->rows.size());
        PairDeviation pd{u.ta->stream_id, u.tb->stream_id, k, discrete_frechet(xa, xb),
                         rms_deviation(xa.topRows(static_cast<Eigen::Index>(k)), xb.topRows(static_cast<Eigen::Index>(k)))};
        sum += pd.frechet;
        rep.deviation_max = std::max(rep.deviation_max, pd.frechet);
        rep.pairs.push_back(std::move(pd));
    }
    rep.deviation_mean = sum / double(rep.pairs.size());
    return rep;
}

}  // namespace irspace
