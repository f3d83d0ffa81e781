#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "irspace/logmodel.hpp"

namespace irspace {

/// Collection statistics feeding IDF and document-length normalization.
struct CorpusStats {
    std::int64_t num_docs = 0;
    std::map<std::string, std::int64_t> doc_freq;
    double avg_doc_len = 0.0;
    std::map<std::string, double> doc_len;

    void validate() const;
    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Documents are the distinct doc ids of the log, each taking the terms of its
/// first click with non-empty text. A document without text counts as length 1.
CorpusStats corpus_from_events(const std::vector<ClickEvent>& events);

void write_corpus(std::ostream& out, const CorpusStats& stats);
CorpusStats read_corpus(std::istream& in);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    void validate() const;
};

using TermFreqs = std::map<std::string, std::int64_t>;

TermFreqs term_freqs(const std::vector<std::string>& terms);

/// ln((N - n + 0.5) / (n + 0.5) + 1); never negative.
double idf(std::string_view term, const CorpusStats& stats);

/// Okapi BM25 of a query against one document. Throws CorpusMismatchError for
/// a doc id unknown to the corpus.
double bm25_score(const std::vector<std::string>& query_terms, const std::string& doc_id,
                  const TermFreqs& freqs, const CorpusStats& stats, const Bm25Params& params);

enum class DistanceMethod { tfidf_cosine, bm25_sym };

DistanceMethod parse_distance_method(std::string_view name);
std::string_view to_string(DistanceMethod method);

/// Distance in [0, 1] between two clicks.
///  - tfidf_cosine: 1 - cosine of raw-count x idf vectors over query and doc terms.
///  - bm25_sym: 1 / (1 + mean of the two cross scores query(a)->doc(b), query(b)->doc(a)).
double click_distance(const ClickEvent& a, const ClickEvent& b, DistanceMethod method,
                      const CorpusStats& stats, const Bm25Params& params);

/// A point of the pre-space: the pos-th click of stream `stream`.
struct PointId {
    std::uint32_t stream = 0;
    std::uint32_t pos = 0;

    friend auto operator<=>(const PointId&, const PointId&) = default;
};

struct Layer {
    std::vector<PointId> points;  // ascending
    Eigen::MatrixXd distances;

    std::optional<std::size_t> index_of(PointId p) const;
};

struct ThreadEdge {
    PointId from;
    PointId to;
    double distance = 0.0;
};

struct LayeredPreSpace {
    std::vector<std::string> stream_ids;
    std::vector<Layer> layers;
    std::vector<ThreadEdge> thread_edges;

    std::string label(PointId p) const;
    std::size_t num_points() const;
};

/// Layer t holds the t-th click of every stream longer than t, with the full
/// pairwise distance matrix; consecutive clicks of a stream are joined by a
/// thread edge. Requires non-empty input and streams of length >= 2.
LayeredPreSpace build_prespace(const std::vector<Clickstream>& streams, DistanceMethod method,
                               const CorpusStats& stats, const Bm25Params& params);

/// Distance matrix of one layer as CSV with point labels as row and column headers.
void write_layer_csv(std::ostream& out, const LayeredPreSpace& space, std::size_t layer);

}  // namespace irspace
