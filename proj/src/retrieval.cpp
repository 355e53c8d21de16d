#include "ngcg/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

namespace ngcg {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

EmbeddingIndex build_index(const std::vector<IndexEntry>& entries) {
    if (entries.empty()) throw ContractError("build_index: no entries");
    const int d = static_cast<int>(entries.front().vec.size());
    if (d == 0) throw DimensionError("build_index: zero-dimensional embedding");

    EmbeddingIndex index;
    index.vectors = Matrix(static_cast<int>(entries.size()), d);
    index.ids.reserve(entries.size());
    index.geo.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (static_cast<int>(e.vec.size()) != d)
            throw DimensionError("build_index: embedding dim mismatch for id " + e.id);
        if (!index.row_of.emplace(e.id, static_cast<int>(i)).second)
            throw DataError("build_index: duplicate id " + e.id);
        double sq = 0.0;
        for (double v : e.vec) {
            if (!std::isfinite(v)) throw NumericError("build_index: non-finite embedding");
            sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm < 1e-154) throw NumericError("build_index: zero-norm embedding for " + e.id);
        for (int j = 0; j < d; ++j) index.vectors.at(static_cast<int>(i), j) = e.vec[j] / norm;
        index.ids.push_back(e.id);
        index.geo.push_back(e.geo);
    }
    return index;
}

RetrievalResult query_topk(const EmbeddingIndex& index, const std::vector<double>& query,
                           int k) {
    if (k < 1) throw ContractError("query_topk: K must be >= 1");
    if (static_cast<int>(query.size()) != index.dim())
        throw DimensionError("query_topk: query dim mismatch");
    double sq = 0.0;
    for (double v : query) sq += v * v;
    if (std::fabs(std::sqrt(sq) - 1.0) > 1e-6)
        throw ContractError("query_topk: query is not unit-norm");

    const int n = index.size();
    std::vector<double> scores(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* row = &index.vectors.data[static_cast<std::size_t>(i) * index.dim()];
        double s = 0.0;
        for (int j = 0; j < index.dim(); ++j) s += query[j] * row[j];
        scores[i] = s;
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return index.ids[a] < index.ids[b];
    });
    const int take = std::min(k, n);
    RetrievalResult result;
    result.ids.reserve(take);
    result.scores.reserve(take);
    for (int i = 0; i < take; ++i) {
        result.ids.push_back(index.ids[order[i]]);
        result.scores.push_back(scores[order[i]]);
    }
    return result;
}

namespace {

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("embedding file: truncated");
    return v;
}

}  // namespace

void write_embedding_file(const std::string& path, const std::vector<IndexEntry>& entries,
                          std::optional<std::uint64_t> config_hash) {
    if (entries.empty()) throw ContractError("write_embedding_file: no entries");
    const auto dim = static_cast<std::uint32_t>(entries.front().vec.size());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_embedding_file: cannot open " + path);
    out.write("NGCGEMB1", 8);
    put(out, static_cast<std::uint32_t>(entries.size()));
    put(out, dim);
    for (const auto& e : entries) {
        if (e.vec.size() != dim) throw DimensionError("write_embedding_file: dim mismatch");
        for (double v : e.vec) put(out, static_cast<float>(v));
    }
    for (const auto& e : entries) {
        if (e.id.size() > 0xffff) throw ContractError("write_embedding_file: id too long");
        put(out, static_cast<std::uint16_t>(e.id.size()));
        out.write(e.id.data(), static_cast<std::streamsize>(e.id.size()));
        put(out, e.geo.lat);
        put(out, e.geo.lon);
    }
    if (config_hash) {
        out.write("NGCGHASH", 8);
        put(out, *config_hash);
    }
    if (!out) throw DataError("write_embedding_file: write failed");
}

std::vector<IndexEntry> read_embedding_file(const std::string& path,
                                            std::uint64_t* config_hash_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_embedding_file: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "NGCGEMB1", 8) != 0)
        throw DataError("read_embedding_file: bad magic");
    const auto n = get<std::uint32_t>(in);
    const auto dim = get<std::uint32_t>(in);
    std::vector<IndexEntry> entries(n);
    for (auto& e : entries) {
        e.vec.resize(dim);
        for (auto& v : e.vec) v = static_cast<double>(get<float>(in));
    }
    for (auto& e : entries) {
        const auto len = get<std::uint16_t>(in);
        e.id.resize(len);
        in.read(e.id.data(), len);
        if (!in) throw DataError("read_embedding_file: truncated id");
        const double lat = get<double>(in);
        const double lon = get<double>(in);
        e.geo = GeoPoint(lat, lon);
    }
    char trailer[8];
    in.read(trailer, 8);
    if (in && std::memcmp(trailer, "NGCGHASH", 8) == 0) {
        const auto h = get<std::uint64_t>(in);
        if (config_hash_out) *config_hash_out = h;
    } else if (config_hash_out) {
        *config_hash_out = 0;
    }
    return entries;
}

}  // namespace ngcg
