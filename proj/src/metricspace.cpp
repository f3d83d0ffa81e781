#include "irspace/metricspace.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "irspace/error.hpp"
#include "irspace/format.hpp"

namespace irspace {

namespace {

using nlohmann::json;

// Sparse tf-idf vector, sorted by term.
struct WeightedTerms {
    std::vector<std::pair<std::string, double>> weights;
    double norm2 = 0.0;
};

WeightedTerms tfidf_vector(const ClickEvent& e, const CorpusStats& stats) {
    TermFreqs counts;
    for (const auto& t : e.query_terms) ++counts[t];
    for (const auto& t : e.doc_terms) ++counts[t];
    WeightedTerms v;
    v.weights.reserve(counts.size());
    for (const auto& [term, count] : counts) {
        double w = static_cast<double>(count) * idf(term, stats);
        v.weights.emplace_back(term, w);
        v.norm2 += w * w;
    }
    return v;
}

// Merge over the sorted term lists, so dot(a, b) and dot(b, a) perform the
// same products in the same order.
double cosine_distance(const WeightedTerms& a, const WeightedTerms& b) {
    if (a.weights.empty() || b.weights.empty()) return 1.0;
    if (a.norm2 <= 0.0 || b.norm2 <= 0.0) return 1.0;
    double dot = 0.0;
    auto ia = a.weights.begin();
    auto ib = b.weights.begin();
    while (ia != a.weights.end() && ib != b.weights.end()) {
        int c = ia->first.compare(ib->first);
        if (c < 0) {
            ++ia;
        } else if (c > 0) {
            ++ib;
        } else {
            dot += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    double cos = dot / std::sqrt(a.norm2 * b.norm2);
    return std::clamp(1.0 - cos, 0.0, 1.0);
}

struct Bm25Side {
    const ClickEvent* event;
    TermFreqs freqs;
};

double bm25_distance(const Bm25Side& a, const Bm25Side& b, const CorpusStats& stats,
                     const Bm25Params& params) {
    double ab = bm25_score(a.event->query_terms, b.event->doc_id, b.freqs, stats, params);
    double ba = bm25_score(b.event->query_terms, a.event->doc_id, a.freqs, stats, params);
    double mean = (ab + ba) / 2.0;
    return 1.0 / (1.0 + mean);
}

}  // namespace

void CorpusStats::validate() const {
    if (num_docs < 1) throw ValidationError("CorpusStats.num_docs must be >= 1");
    if (!(avg_doc_len > 0.0) || !std::isfinite(avg_doc_len))
        throw ValidationError("CorpusStats.avg_doc_len must be positive");
    for (const auto& [term, df] : doc_freq) {
        if (df < 1 || df > num_docs)
            throw ValidationError("CorpusStats.doc_freq[" + term + "] outside [1, num_docs]");
    }
}

CorpusStats corpus_from_events(const std::vector<ClickEvent>& events) {
    std::map<std::string, const std::vector<std::string>*> docs;
    for (const auto& e : events) {
        auto it = docs.find(e.doc_id);
        if (it == docs.end()) {
            docs.emplace(e.doc_id, &e.doc_terms);
        } else if (it->second->empty() && !e.doc_terms.empty()) {
            it->second = &e.doc_terms;
        }
    }
    CorpusStats stats;
    stats.num_docs = static_cast<std::int64_t>(docs.size());
    double total = 0.0;
    for (const auto& [id, terms] : docs) {
        double len = std::max<double>(1.0, static_cast<double>(terms->size()));
        stats.doc_len[id] = len;
        total += len;
        std::set<std::string> distinct(terms->begin(), terms->end());
        for (const auto& t : distinct) ++stats.doc_freq[t];
    }
    stats.avg_doc_len = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    return stats;
}

void write_corpus(std::ostream& out, const CorpusStats& stats) {
    out << json{{"num_docs", stats.num_docs}, {"avg_doc_len", stats.avg_doc_len}}.dump() << '\n';
    for (const auto& [term, df] : stats.doc_freq) out << json{{"term", term}, {"df", df}}.dump() << '\n';
    for (const auto& [doc, len] : stats.doc_len) out << json{{"doc", doc}, {"len", len}}.dump() << '\n';
}

CorpusStats read_corpus(std::istream& in) {
    if (!in.good()) throw InputError("corpus stream is not readable");
    CorpusStats stats;
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object())
            throw InputError("corpus line " + std::to_string(lineno) + ": invalid json");
        if (obj.contains("num_docs")) {
            stats.num_docs = obj.at("num_docs").get<std::int64_t>();
            stats.avg_doc_len = obj.at("avg_doc_len").get<double>();
            header = true;
        } else if (obj.contains("term")) {
            stats.doc_freq[obj.at("term").get<std::string>()] = obj.at("df").get<std::int64_t>();
        } else if (obj.contains("doc")) {
            stats.doc_len[obj.at("doc").get<std::string>()] = obj.at("len").get<double>();
        } else {
            throw InputError("corpus line " + std::to_string(lineno) + ": unrecognized record");
        }
    }
    if (!header) throw InputError("corpus sidecar lacks the num_docs/avg_doc_len header");
    stats.validate();
    return stats;
}

void Bm25Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1))
        throw ValidationError("Bm25Params.k1 = " + format_double(k1) + " must be >= 0");
    if (!(b >= 0.0 && b <= 1.0))
        throw ValidationError("Bm25Params.b = " + format_double(b) + " must be in [0, 1]");
}

TermFreqs term_freqs(const std::vector<std::string>& terms) {
    TermFreqs f;
    for (const auto& t : terms) ++f[t];
    return f;
}

double idf(std::string_view term, const CorpusStats& stats) {
    auto it = stats.doc_freq.find(std::string(term));
    double n = it == stats.doc_freq.end() ? 0.0 : static_cast<double>(it->second);
    double N = static_cast<double>(stats.num_docs);
    return std::log((N - n + 0.5) / (n + 0.5) + 1.0);
}

double bm25_score(const std::vector<std::string>& query_terms, const std::string& doc_id,
                  const TermFreqs& freqs, const CorpusStats& stats, const Bm25Params& params) {
    auto len_it = stats.doc_len.find(doc_id);
    if (len_it == stats.doc_len.end())
        throw CorpusMismatchError("document '" + doc_id + "' is not in the corpus statistics");
    const double norm = params.k1 * (1.0 - params.b + params.b * len_it->second / stats.avg_doc_len);
    double score = 0.0;
    for (const auto& q : query_terms) {
        auto f_it = freqs.find(q);
        if (f_it == freqs.end() || f_it->second == 0) continue;
        const double f = static_cast<double>(f_it->second);
        score += idf(q, stats) * f * (params.k1 + 1.0) / (f + norm);
    }
    return score;
}

DistanceMethod parse_distance_method(std::string_view name) {
    if (name == "tfidf_cosine") return DistanceMethod::tfidf_cosine;
    if (name == "bm25_sym") return DistanceMethod::bm25_sym;
    throw ValidationError("unknown distance method '" + std::string(name) +
                          "' (expected tfidf_cosine or bm25_sym)");
}

std::string_view to_string(DistanceMethod method) {
    return method == DistanceMethod::tfidf_cosine ? "tfidf_cosine" : "bm25_sym";
}

double click_distance(const ClickEvent& a, const ClickEvent& b, DistanceMethod method,
                      const CorpusStats& stats, const Bm25Params& params) {
    if (method == DistanceMethod::tfidf_cosine) {
        return cosine_distance(tfidf_vector(a, stats), tfidf_vector(b, stats));
    }
    Bm25Side sa{&a, term_freqs(a.doc_terms)};
    Bm25Side sb{&b, term_freqs(b.doc_terms)};
    return bm25_distance(sa, sb, stats, params);
}

std::optional<std::size_t> Layer::index_of(PointId p) const {
    auto it = std::lower_bound(points.begin(), points.end(), p);
    if (it == points.end() || *it != p) return std::nullopt;
    return static_cast<std::size_t>(it - points.begin());
}

std::string LayeredPreSpace::label(PointId p) const {
    return stream_ids.at(p.stream) + ":" + std::to_string(p.pos);
}

std::size_t LayeredPreSpace::num_points() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.points.size();
    return n;
}

LayeredPreSpace build_prespace(const std::vector<Clickstream>& streams, DistanceMethod method,
                               const CorpusStats& stats, const Bm25Params& params) {
    if (streams.empty()) throw ValidationError("build_prespace needs at least one clickstream");
    std::size_t depth = 0;
    for (const auto& s : streams) {
        if (s.size() < 2)
            throw ValidationError("clickstream '" + s.stream_id + "' is shorter than 2 clicks");
        depth = std::max(depth, s.size());
    }
    if (method == DistanceMethod::bm25_sym) params.validate();

    LayeredPreSpace space;
    space.layers.resize(depth);
    for (std::uint32_t si = 0; si < streams.size(); ++si) {
        space.stream_ids.push_back(streams[si].stream_id);
        for (std::uint32_t t = 0; t < streams[si].size(); ++t) space.layers[t].points.push_back({si, t});
    }

    if (method == DistanceMethod::tfidf_cosine) {
        std::vector<std::vector<WeightedTerms>> vecs(streams.size());
        for (std::size_t si = 0; si < streams.size(); ++si)
            for (const auto& e : streams[si].events) vecs[si].push_back(tfidf_vector(e, stats));
        auto vec_of = [&](PointId p) -> const WeightedTerms& { return vecs[p.stream][p.pos]; };
        for (auto& layer : space.layers) {
            const auto n = static_cast<Eigen::Index>(layer.points.size());
            layer.distances = Eigen::MatrixXd::Zero(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    double d = cosine_distance(vec_of(layer.points[i]), vec_of(layer.points[j]));
                    layer.distances(i, j) = layer.distances(j, i) = d;
                }
        }
        for (std::uint32_t si = 0; si < streams.size(); ++si)
            for (std::uint32_t t = 0; t + 1 < streams[si].size(); ++t)
                space.thread_edges.push_back(
                    {{si, t}, {si, t + 1}, cosine_distance(vecs[si][t], vecs[si][t + 1])});
    } else {
        std::vector<std::vector<Bm25Side>> sides(streams.size());
        for (std::size_t si = 0; si < streams.size(); ++si)
            for (const auto& e : streams[si].events) sides[si].push_back({&e, term_freqs(e.doc_terms)});
        auto side_of = [&](PointId p) -> const Bm25Side& { return sides[p.stream][p.pos]; };
        for (auto& layer : space.layers) {
            const auto n = static_cast<Eigen::Index>(layer.points.size());
            layer.distances = Eigen::MatrixXd::Zero(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    double d = bm25_distance(side_of(layer.points[i]), side_of(layer.points[j]), stats, params);
                    layer.distances(i, j) = layer.distances(j, i) = d;
                }
        }
        for (std::uint32_t si = 0; si < streams.size(); ++si)
            for (std::uint32_t t = 0; t + 1 < streams[si].size(); ++t)
                space.thread_edges.push_back(
                    {{si, t}, {si, t + 1}, bm25_distance(sides[si][t], sides[si][t + 1], stats, params)});
    }
    return space;
}

void write_layer_csv(std::ostream& out, const LayeredPreSpace& space, std::size_t layer) {
    const auto& l = space.layers.at(layer);
    out << "point";
    for (const auto& p : l.points) out << ',' << space.label(p);
    out << '\n';
    for (std::size_t i = 0; i < l.points.size(); ++i) {
        out << space.label(l.points[i]);
        for (std::size_t j = 0; j < l.points.size(); ++j)
            out << ',' << format_double(l.distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << '\n';
    }
}

}  // namespace irspace
