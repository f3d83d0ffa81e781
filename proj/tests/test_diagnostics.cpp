#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "irspace/diagnostics.hpp"
#include "irspace/error.hpp"
#include "support.hpp"

using namespace irspace;
using irspace::test::make_space;
using irspace::test::random_rotation;
using irspace::test::random_walks;

namespace {

Grid<double> box3(int nodes = 11) {
    return Grid<double>::spanning(Eigen::Vector3d(-2, -2, -1), Eigen::Vector3d(2, 2, 5), {nodes, nodes, nodes});
}

MetricField<double> bump_field(const Grid<double>& grid, const Eigen::Vector3d& c, double amp) {
    return MetricField<double>::from_function(
        grid,
        [&](const Eigen::VectorXd& x) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
            g(0, 0) += amp * std::exp(-(x - c).squaredNorm() / (2 * 0.6 * 0.6));
            return g;
        },
        1e-8);
}

EmbeddedSpace uniform_steps() {
    std::vector<Eigen::MatrixXd> th;
    for (int t = 0; t < 4; ++t) {
        Eigen::MatrixXd w(6, 2);
        for (int i = 0; i < 6; ++i) w.row(i) << i * std::cos(t), i * std::sin(t);
        th.push_back(w);
    }
    return make_space(th);
}

RoughnessReport report(double grad, std::size_t peaks, double height) {
    RoughnessReport r;
    r.n = 2;
    r.spatial_nodes = {10, 10};
    r.prominence = 0.5;
    r.gradient_rms = grad;
    r.peak_count = peaks;
    r.max_peak_height = height;
    return r;
}

}  // namespace

TEST_CASE("identity field is perfectly smooth") {
    auto space = uniform_steps();
    auto f = MetricField<double>::from_function(box3(), [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(3, 3); }, 1e-8);
    auto r = roughness(space, f);
    CHECK(r.gradient_rms == 0.0);
    CHECK(r.peak_count == 0);
    CHECK(r.max_peak_height == 0.0);
    for (double d : r.distortion) CHECK(d == 0.0);
    CHECK(r.spatial_nodes == std::vector<int>{11, 11});
}

TEST_CASE("a single anisotropy bump yields one peak at its centre") {
    auto grid = box3();
    const auto centre = grid.flatten({5, 5, 5});
    auto f = bump_field(grid, grid.position(centre), 3.0);
    auto r = roughness(uniform_steps(), f);
    REQUIRE(r.peak_count == 1);
    CHECK(r.peaks[0].node == centre);
    CHECK(r.max_peak_height == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(r.gradient_rms > 0.0);

    auto lowered = roughness(uniform_steps(), f, {2.0});
    CHECK(lowered.peak_count == 0);
}

TEST_CASE("distortion uses the leading spatial block") {
    auto f = MetricField<double>::from_function(
        box3(5),
        [](const Eigen::VectorXd&) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
            g(2, 2) = 50.0;
            g(0, 0) = std::exp(1.0);
            return g;
        },
        1e-8);
    for (double d : metric_distortion(f, 2)) CHECK(d == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(metric_distortion(f, 4), ValidationError);
}

TEST_CASE("uniform steps give unit jump statistics") {
    auto js = jump_stats(uniform_steps());
    CHECK(js.steps == 20);
    CHECK(js.mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(js.p95 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(js.max == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(js.median_step == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("jump statistics against a direct computation") {
    Eigen::MatrixXd w(5, 1);
    w << 0, 1, 3, 6, 16;  // steps 1 2 3 10
    auto js = jump_stats(make_space({w}));
    CHECK(js.median_step == 2.5);
    CHECK(js.mean == doctest::Approx(16.0 / 4 / 2.5));
    CHECK(js.p95 == doctest::Approx(4.0));
    CHECK(js.max == doctest::Approx(4.0));
}

TEST_CASE("smoothing delta") {
    auto same = smoothing_delta(report(1, 3, 2), report(1, 3, 2));
    CHECK(same.gradient_rms == 0.0);
    CHECK(same.peak_count == 0);
    CHECK(same.max_peak_height == 0.0);
    CHECK_FALSE(same.improved);

    auto better = smoothing_delta(report(1, 3, 2), report(0.5, 1, 1.5));
    CHECK(better.improved);
    CHECK(better.peak_count == -2);
    CHECK(better.gradient_rms == -0.5);

    CHECK_FALSE(smoothing_delta(report(1, 3, 2), report(0.5, 3, 2.5)).improved);
    CHECK_FALSE(smoothing_delta(report(1, 3, 2), report(1.5, 3, 1.5)).improved);

    auto other = report(1, 3, 2);
    other.prominence = 0.6;
    CHECK_THROWS_AS(smoothing_delta(report(1, 3, 2), other), ComparabilityError);
    other = report(1, 3, 2);
    other.spatial_nodes = {12, 10};
    CHECK_THROWS_AS(smoothing_delta(report(1, 3, 2), other), ComparabilityError);
}

TEST_CASE("comparing a space with itself") {
    std::mt19937_64 rng(11);
    auto a = make_space(random_walks(10, 6, 2, rng));
    auto r = compare_environments(a, a, identity_correspondence(a, a));
    CHECK(r.correspondence_size == 10);
    CHECK(r.procrustes_residual < 1e-8);
    CHECK(r.deviation_mean < 1e-8);
    CHECK(r.deviation_max < 1e-8);
    CHECK(r.warnings.empty());
}

TEST_CASE("a rigid copy is recovered") {
    std::mt19937_64 rng(12);
    auto a = make_space(random_walks(12, 7, 3, rng));
    auto b = a;
    Eigen::MatrixXd R = random_rotation(4, rng);
    b.coords = (a.coords * R.transpose()).rowwise() + Eigen::RowVector4d(5, -2, 1, 3);
    auto r = compare_environments(a, b, identity_correspondence(a, b));
    CHECK(r.procrustes_residual < 1e-8);
    CHECK(r.deviation_max < 1e-8);
    CHECK(r.alignment.rotation.determinant() == doctest::Approx(1.0));
}

TEST_CASE("a single perturbed point shows up within [delta/2, delta]") {
    std::mt19937_64 rng(13);
    auto a = make_space(random_walks(50, 8, 2, rng));
    for (double delta : {1e-3, 1e-4, 1e-6}) {
        auto b = a;
        const auto row = static_cast<Eigen::Index>(b.threads[17].rows[4]);
        b.coords.row(row) += delta * Eigen::RowVector3d(0.6, 0.8, 0.0);
        auto r = compare_environments(a, b, identity_correspondence(a, b));
        CHECK(r.deviation_max >= delta / 2);
        CHECK(r.deviation_max <= delta);
        CHECK(r.pairs[17].frechet == r.deviation_max);
    }
}

TEST_CASE("residual is symmetric in its arguments") {
    std::mt19937_64 rng(14);
    auto a = make_space(random_walks(20, 6, 2, rng));
    auto b = make_space(random_walks(20, 6, 2, rng));
    auto ab = compare_environments(a, b, identity_correspondence(a, b));
    auto ba = compare_environments(b, a, identity_correspondence(b, a));
    CHECK(std::abs(ab.procrustes_residual - ba.procrustes_residual) < 1e-10);
}

TEST_CASE("jump statistics are invariant under spatial rigid motion") {
    std::mt19937_64 rng(15);
    auto a = make_space(random_walks(15, 9, 3, rng));
    auto b = a;
    Eigen::MatrixXd R = random_rotation(3, rng);
    b.coords.leftCols(3) = (a.coords.leftCols(3) * R.transpose()).rowwise() + Eigen::RowVector3d(1, 2, 3);
    auto ja = jump_stats(a), jb = jump_stats(b);
    CHECK(std::abs(ja.mean - jb.mean) < 1e-10);
    CHECK(std::abs(ja.p95 - jb.p95) < 1e-10);
    CHECK(std::abs(ja.max - jb.max) < 1e-10);
}

TEST_CASE("comparison input errors") {
    std::mt19937_64 rng(16);
    auto a = make_space(random_walks(3, 5, 2, rng));
    auto c = make_space(random_walks(3, 5, 3, rng));
    CHECK_THROWS_AS(compare_environments(a, a, {}), ValidationError);
    CHECK_THROWS_AS(compare_environments(a, a, {{"s0", "nope"}}), ValidationError);
    CHECK_THROWS_AS(compare_environments(a, c, {{"s0", "s0"}}), ComparabilityError);

    std::vector<Eigen::MatrixXd> th = random_walks(3, 5, 2, rng);
    th.push_back(Eigen::MatrixXd::Zero(1, 2));
    auto d = make_space(th);
    auto r = compare_environments(d, d, identity_correspondence(d, d));
    CHECK(r.correspondence_size == 3);
    CHECK(r.warnings.size() == 1);
    CHECK_THROWS_AS(compare_environments(d, d, {{"s3", "s3"}}), ValidationError);
}
