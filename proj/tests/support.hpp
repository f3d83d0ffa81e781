#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irspace/skeleton.hpp"

namespace irspace::test {

// Builds a space from per-thread spatial coordinates (row i of a thread sits on layer i).
inline EmbeddedSpace make_space(const std::vector<Eigen::MatrixXd>& threads) {
    EmbeddedSpace s;
    s.n = static_cast<int>(threads.front().cols());
    std::size_t layers = 0;
    for (std::size_t t = 0; t < threads.size(); ++t) {
        s.stream_ids.push_back("s" + std::to_string(t));
        layers = std::max(layers, static_cast<std::size_t>(threads[t].rows()));
    }
    for (std::uint32_t pos = 0; pos < layers; ++pos)
        for (std::uint32_t t = 0; t < threads.size(); ++t)
            if (pos < threads[t].rows()) s.points.push_back({t, pos});
    s.coords.resize(static_cast<Eigen::Index>(s.points.size()), s.n + 1);
    for (std::size_t r = 0; r < s.points.size(); ++r) {
        const auto p = s.points[r];
        s.coords.row(static_cast<Eigen::Index>(r)) << threads[p.stream].row(p.pos), double(p.pos);
    }
    for (std::uint32_t t = 0; t < threads.size(); ++t) {
        Thread th{s.stream_ids[t], {}};
        for (std::uint32_t pos = 0; pos < threads[t].rows(); ++pos) th.rows.push_back(*s.row_of({t, pos}));
        for (std::size_t i = 1; i < th.rows.size(); ++i)
            s.edges.push_back({th.rows[i - 1], th.rows[i],
                               (threads[t].row(i) - threads[t].row(i - 1)).norm(), EdgeKind::thread});
        s.threads.push_back(std::move(th));
    }
    s.stress_per_layer.assign(layers, 0.0);
    s.converged.assign(layers, true);
    s.stress_history.assign(layers, {});
    return s;
}

inline std::vector<Eigen::MatrixXd> random_walks(std::size_t count, Eigen::Index len, int n, std::mt19937_64& rng) {
    std::normal_distribution<double> N01;
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t t = 0; t < count; ++t) {
        Eigen::MatrixXd w(len, n);
        for (Eigen::Index i = 0; i < len; ++i)
            for (int a = 0; a < n; ++a) w(i, a) = (i ? w(i - 1, a) : 3.0 * N01(rng)) + N01(rng);
        out.push_back(std::move(w));
    }
    return out;
}

inline Eigen::MatrixXd random_rotation(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> N01;
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = N01(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
}

}  // namespace irspace::test
