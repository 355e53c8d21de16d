#include "ngcg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ngcg/rng.hpp"

namespace ngcg {

namespace {

constexpr int kFactorBase = 2;     // ids [2, 2 + m*buckets)
constexpr double kMetersPerDeg = kEarthRadiusM * M_PI / 180.0;

int filler_base(const GenParams& p) { return kFactorBase + p.latent_dim * p.buckets; }

void validate(const GenParams& p) {
    if (p.n_scenes < 2) throw ConfigError("generate: need at least 2 scenes");
    if (p.noise < 0.0) throw ConfigError("generate: noise must be >= 0");
    if (p.latent_dim < 1 || p.buckets < 2) throw ConfigError("generate: bad latent config");
    if (p.patches < 1 || p.patch_features < 1) throw ConfigError("generate: bad grid config");
    if (p.spacing_m <= 0.0) throw ConfigError("generate: spacing must be > 0");
    if (!(p.train_fraction > 0.0 && p.train_fraction < 1.0))
        throw ConfigError("generate: train_fraction must be in (0, 1)");
    // token ids must fit the default 256-entry vocabulary with filler room
    if (filler_base(p) + 8 > 256) throw ConfigError("generate: token budget exceeds vocabulary");
}

int bucket_of(double z, int buckets) {
    const int b = static_cast<int>(std::floor((z + 1.0) / 2.0 * buckets));
    return std::clamp(b, 0, buckets - 1);
}

double bucket_center(int bucket, int buckets) {
    return -1.0 + (bucket + 0.5) * 2.0 / buckets;
}

TokenSequence make_text(const std::vector<double>& z, const GenParams& p, Rng& rng) {
    std::vector<int> content;
    for (int k = 0; k < p.latent_dim; ++k)
        content.push_back(kFactorBase + k * p.buckets + bucket_of(z[k], p.buckets));
    const int fillers = 256 - filler_base(p);
    for (int i = 0; i < 4; ++i)
        content.push_back(filler_base(p) + static_cast<int>(rng.integer(fillers)));
    // redundant repeats stretch the length into [12, 24]
    const int extra = static_cast<int>(rng.integer(13));
    for (int i = 0; i < extra; ++i) {
        const int k = static_cast<int>(rng.integer(p.latent_dim));
        content.push_back(content[k]);
    }
    rng.shuffle(content);
    content.push_back(kEosId);
    return make_token_sequence(std::move(content), static_cast<int>(content.size()) - 1);
}

}  // namespace

std::vector<const SceneRecord*> Corpus::split_items(const std::string& split) const {
    std::vector<const SceneRecord*> out;
    for (const auto& item : items)
        if (item.split == split) out.push_back(&item);
    return out;
}

Corpus generate(const GenParams& p) {
    validate(p);
    Rng rng(p.seed);
    Corpus corpus;
    corpus.params = p;

    // fixed smooth latent-to-grid map, one per corpus
    const int gf = p.patches * p.patch_features;
    Matrix map = random_normal(p.latent_dim, gf, 1.0 / std::sqrt(double(p.latent_dim)), rng);

    // jittered lattice: cell 1.5x spacing, jitter 0.225x, so the minimum
    // pairwise separation stays above spacing_m with margin
    const int side = static_cast<int>(std::ceil(std::sqrt(double(p.n_scenes))));
    const double cell_deg = 1.5 * p.spacing_m / kMetersPerDeg;
    const double jitter_deg = 0.225 * p.spacing_m / kMetersPerDeg;

    std::vector<int> order(p.n_scenes);
    for (int i = 0; i < p.n_scenes; ++i) order[i] = i;
    rng.shuffle(order);
    int n_train = static_cast<int>(std::lround(p.n_scenes * p.train_fraction));
    n_train = std::clamp(n_train, 1, p.n_scenes - 1);
    std::vector<std::string> split(p.n_scenes);
    for (int i = 0; i < p.n_scenes; ++i)
        split[order[i]] = i < n_train ? "train" : "test";

    char idbuf[32];
    for (int i = 0; i < p.n_scenes; ++i) {
        SceneRecord rec;
        std::snprintf(idbuf, sizeof idbuf, "scene-%06d", i);
        rec.id = idbuf;
        rec.split = split[i];

        rec.z.resize(p.latent_dim);
        for (double& v : rec.z) v = rng.uniform(-1.0, 1.0);

        rec.text = make_text(rec.z, p, rng);

        // the grid sees mostly the quantized lattice point (the same factors the
        // text encodes) plus a small continuous residual that keeps distinct
        // scenes at distinct grids
        std::vector<double> zin(p.latent_dim);
        for (int k = 0; k < p.latent_dim; ++k) {
            const double center = bucket_center(bucket_of(rec.z[k], p.buckets), p.buckets);
            zin[k] = center + 0.1 * (rec.z[k] - center);
        }
        rec.grid = Matrix(p.patches, p.patch_features);
        for (int j = 0; j < gf; ++j) {
            double pre = 0.0;
            for (int k = 0; k < p.latent_dim; ++k) pre += zin[k] * map.at(k, j);
            rec.grid.data[j] = std::tanh(pre) + p.noise * rng.normal();
        }

        const int row = i / side, col = i % side;
        const double lat = (row + 0.5) * cell_deg + rng.uniform(-jitter_deg, jitter_deg);
        const double lon = (col + 0.5) * cell_deg + rng.uniform(-jitter_deg, jitter_deg);
        rec.geo = GeoPoint(lat, lon);

        corpus.items.push_back(std::move(rec));
    }
    return corpus;
}

Corpus generate(int n_scenes, std::uint64_t seed, double noise, int latent_dim) {
    GenParams p;
    p.n_scenes = n_scenes;
    p.seed = seed;
    p.noise = noise;
    p.latent_dim = latent_dim;
    return generate(p);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::ostringstream out;
    for (const auto& rec : corpus.items) {
        nlohmann::json j;
        j["id"] = rec.id;
        j["split"] = rec.split;
        j["lat"] = rec.geo.lat;
        j["lon"] = rec.geo.lon;
        j["tokens"] = rec.text.tokens;
        j["eos_index"] = rec.text.eos_index;
        std::vector<std::vector<double>> grid(rec.grid.rows);
        for (int r = 0; r < rec.grid.rows; ++r)
            grid[r].assign(&rec.grid.data[std::size_t(r) * rec.grid.cols],
                           &rec.grid.data[std::size_t(r) * rec.grid.cols] + rec.grid.cols);
        j["grid"] = grid;
        out << j.dump() << "\n";
    }
    return out.str();
}

void write_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_corpus: cannot open " + path);
    out << corpus_to_jsonl(corpus);
    if (!out) throw DataError("write_corpus: write failed");
}

Corpus read_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_corpus: cannot open " + path);
    Corpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("read_corpus: invalid JSON line");
        SceneRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.split = j.at("split").get<std::string>();
        if (rec.split != "train" && rec.split != "test")
            throw DataError("read_corpus: bad split label for " + rec.id);
        rec.geo = GeoPoint(j.at("lat").get<double>(), j.at("lon").get<double>());
        rec.text = make_token_sequence(j.at("tokens").get<std::vector<int>>(),
                                       j.at("eos_index").get<int>());
        const auto grid = j.at("grid").get<std::vector<std::vector<double>>>();
        if (grid.empty() || grid.front().empty())
            throw DataError("read_corpus: empty grid for " + rec.id);
        rec.grid = Matrix(static_cast<int>(grid.size()), static_cast<int>(grid.front().size()));
        for (int r = 0; r < rec.grid.rows; ++r) {
            if (static_cast<int>(grid[r].size()) != rec.grid.cols)
                throw DataError("read_corpus: ragged grid for " + rec.id);
            for (int c = 0; c < rec.grid.cols; ++c) rec.grid.at(r, c) = grid[r][c];
        }
        require_finite(rec.grid, "corpus grid");
        corpus.items.push_back(std::move(rec));
    }
    if (corpus.items.empty()) throw DataError("read_corpus: empty corpus");
    corpus.params.n_scenes = static_cast<int>(corpus.items.size());
    corpus.params.patches = corpus.items.front().grid.rows;
    corpus.params.patch_features = corpus.items.front().grid.cols;
    return corpus;
}

}  // namespace ngcg
