#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ngcg/geoeval.hpp"
#include "ngcg/matrix.hpp"

namespace ngcg {

struct IndexEntry {
    std::string id;
    std::vector<double> vec;
    GeoPoint geo;
};

// Immutable candidate database. Rows are re-normalized on build so cosine
// ranking and L2 ranking coincide.
struct EmbeddingIndex {
    std::vector<std::string> ids;
    Matrix vectors;  // N x d, unit rows
    std::vector<GeoPoint> geo;
    std::unordered_map<std::string, int> row_of;

    int size() const { return vectors.rows; }
    int dim() const { return vectors.cols; }
};

struct RetrievalResult {
    std::vector<std::string> ids;     // best first
    std::vector<double> scores;       // cosine similarity, non-increasing
};

EmbeddingIndex build_index(const std::vector<IndexEntry>& entries);

// Exhaustive exact scan; ties broken by ascending id. K > N returns all N.
RetrievalResult query_topk(const EmbeddingIndex& index, const std::vector<double>& query,
                           int k);

// Embedding file: magic "NGCGEMB1", u32 N, u32 d, N*d float32 LE row-major,
// then per entry u16 id length, id bytes, f64 lat, f64 lon. An optional
// "NGCGHASH" + u64 config digest trailer follows the records.
void write_embedding_file(const std::string& path, const std::vector<IndexEntry>& entries,
                          std::optional<std::uint64_t> config_hash = std::nullopt);
std::vector<IndexEntry> read_embedding_file(const std::string& path,
                                            std::uint64_t* config_hash_out = nullptr);

}  // namespace ngcg
