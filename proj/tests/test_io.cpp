#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "irspace/error.hpp"
#include "irspace/io.hpp"
#include "irspace/synth.hpp"
#include "support.hpp"

using namespace irspace;

namespace {

struct Artifacts {
    std::vector<Clickstream> streams;
    LayeredPreSpace prespace;
    EmbeddedSpace space;
    FitResult fit;
    Trajectory<double> trajectory;
    RoughnessReport roughness;
};

const Artifacts& artifacts() {
    static const Artifacts a = [] {
        SynthConfig cfg;
        cfg.num_users = 8;
        auto out = synth_generate(cfg);
        Artifacts r;
        r.streams = extract_clickstreams(out.events, kDefaultGapThresholdMs, 2);
        r.prespace = build_prespace(r.streams, DistanceMethod::bm25_sym, out.corpus, {});
        auto sk = form_simplices(link_nearest_neighbors(r.prespace, default_neighbor_count(2)), 2);
        r.space = embed_layers(r.prespace, sk, 2);
        FitOptions fo;
        fo.nodes_per_axis = 8;
        r.fit = fit_metric_field(r.space, fo);
        const auto& g = r.fit.field.grid();
        Eigen::VectorXd x0 = g.position(g.flatten({4, 4, 2}));
        r.trajectory = integrate_geodesic(r.fit.field, x0, Eigen::VectorXd(Eigen::Vector3d(0.01, 0.0, 0.05)), 1.0, 0.05).trajectory;
        r.roughness = roughness(r.space, r.fit.field);
        return r;
    }();
    return a;
}

template <typename T, typename W, typename R>
void check_round_trip(const T& value, W write, R read) {
    std::ostringstream first;
    write(first, value);
    std::istringstream in(first.str());
    auto back = read(in);
    std::ostringstream second;
    write(second, back);
    CHECK(!first.str().empty());
    CHECK(first.str() == second.str());
}

}  // namespace

TEST_CASE("clickstreams round-trip") {
    const auto& a = artifacts();
    check_round_trip(a.streams, [](std::ostream& o, const auto& v) { write_streams(o, v); }, [](std::istream& i) { return read_streams(i); });
    std::ostringstream os;
    write_streams(os, a.streams);
    std::istringstream is(os.str());
    auto back = read_streams(is);
    REQUIRE(back.size() == a.streams.size());
    for (std::size_t s = 0; s < back.size(); ++s) CHECK(back[s].events == a.streams[s].events);
}

TEST_CASE("prespace round-trip") {
    const auto& a = artifacts();
    check_round_trip(a.prespace, [](std::ostream& o, const auto& v) { write_prespace(o, v); }, [](std::istream& i) { return read_prespace(i); });
}

TEST_CASE("embedded space round-trip rebuilds threads") {
    const auto& a = artifacts();
    check_round_trip(a.space, [](std::ostream& o, const auto& v) { write_space(o, v); }, [](std::istream& i) { return read_space(i); });
    std::ostringstream os;
    write_space(os, a.space);
    std::istringstream is(os.str());
    auto back = read_space(is);
    CHECK(back.coords == a.space.coords);
    REQUIRE(back.threads.size() == a.space.threads.size());
    for (std::size_t t = 0; t < back.threads.size(); ++t) {
        CHECK(back.threads[t].stream_id == a.space.threads[t].stream_id);
        CHECK(back.threads[t].rows == a.space.threads[t].rows);
    }
}

TEST_CASE("metric field round-trip") {
    const auto& a = artifacts();
    check_round_trip(a.fit.field, [](std::ostream& o, const auto& v) { write_metric_field(o, v); },
                     [](std::istream& i) { return read_metric_field(i); });
    std::ostringstream os;
    write_metric_field(os, a.fit.field);
    std::istringstream is(os.str());
    auto back = read_metric_field(is);
    CHECK(back.eps_pd() == a.fit.field.eps_pd());
    for (std::size_t i = 0; i < back.samples().size(); ++i) CHECK(back.sample(i) == a.fit.field.sample(i));
}

TEST_CASE("trajectory round-trip") {
    const auto& a = artifacts();
    REQUIRE(a.trajectory.size() >= 2);
    check_round_trip(a.trajectory, [](std::ostream& o, const auto& v) { write_trajectory_csv(o, v); },
                     [](std::istream& i) { return read_trajectory_csv(i); });
}

TEST_CASE("roughness report round-trip") {
    const auto& a = artifacts();
    check_round_trip(a.roughness, [](std::ostream& o, const auto& v) { write_roughness_jsonl(o, v); },
                     [](std::istream& i) { return read_roughness_jsonl(i); });
}

TEST_CASE("corpus and ground truth round-trip") {
    SynthConfig cfg;
    cfg.num_users = 4;
    auto out = synth_generate(cfg);
    check_round_trip(out.corpus, [](std::ostream& o, const auto& v) { write_corpus(o, v); }, [](std::istream& i) { return read_corpus(i); });
    check_round_trip(out.truth, [](std::ostream& o, const auto& v) { write_ground_truth(o, v); },
                     [](std::istream& i) { return read_ground_truth(i); });
}

TEST_CASE("correspondence parsing") {
    std::istringstream in("# pairs\na\tb\n\nc\td\n");
    auto c = read_correspondence(in);
    REQUIRE(c.size() == 2);
    CHECK(c[1] == std::pair<std::string, std::string>{"c", "d"});
    std::istringstream bad("a b\n");
    CHECK_THROWS_AS(read_correspondence(bad), InputError);
}

TEST_CASE("malformed artifacts are input errors") {
    std::istringstream garbage("{\"kind\":\"nope\"}\n");
    CHECK_THROWS_AS(read_space(garbage), InputError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_metric_field(empty), InputError);
}

TEST_CASE("atomic write and missing input") {
    auto dir = fs::temp_directory_path() / "irspace_io_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file_atomic(dir / "a.txt", "hello\n");
    CHECK(read_file(dir / "a.txt") == "hello\n");
    for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().filename() == "a.txt");
    try {
        read_file(dir / "none.jsonl", "embed");
        FAIL("expected MissingInputError");
    } catch (const MissingInputError& e) {
        CHECK(std::string(e.what()).find("embed") != std::string::npos);
    }
    fs::remove_all(dir);
}
