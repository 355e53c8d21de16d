#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ngcg/encoder.hpp"
#include "ngcg/geoeval.hpp"

namespace ngcg {

struct GenParams {
    int n_scenes = 1024;
    std::uint64_t seed = 7;
    double noise = 0.02;
    int latent_dim = 8;          // m latent factors
    int buckets = 8;             // quantization buckets per factor
    int patches = 16;            // P
    int patch_features = 8;      // F
    double spacing_m = 200.0;    // guaranteed minimum pairwise distance
    double train_fraction = 0.875;
};

// One synthetic scene: a latent vector, its tokenized description, its patch
// grid, and a lattice location.
struct SceneRecord {
    std::string id;
    std::string split;  // "train" or "test"
    GeoPoint geo;
    std::vector<double> z;
    TokenSequence text;
    Matrix grid;  // P x F
};

struct Corpus {
    GenParams params;
    std::vector<SceneRecord> items;

    std::vector<const SceneRecord*> split_items(const std::string& split) const;
};

// Deterministic in seed. Texts quantize each latent factor into vocabulary
// buckets plus filler tokens; grids come from a fixed smooth map of z plus
// Gaussian noise; locations sit on a jittered lattice whose minimum pairwise
// distance is at least spacing_m.
Corpus generate(const GenParams& params);
Corpus generate(int n_scenes, std::uint64_t seed, double noise, int latent_dim);

// JSON Lines, one record per scene:
// {"id", "split", "lat", "lon", "tokens", "eos_index", "grid"}
std::string corpus_to_jsonl(const Corpus& corpus);
void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

}  // namespace ngcg
