#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ngcg/geoeval.hpp"
#include "ngcg/graph.hpp"
#include "ngcg/lora.hpp"
#include "ngcg/matrix.hpp"

namespace ngcg {

inline constexpr int kPadId = 0;
inline constexpr int kEosId = 1;

// Padded, masked token ids with a designated end-of-sequence position.
// Valid positions are exactly the prefix through eos_index.
struct TokenSequence {
    std::vector<int> tokens;
    std::vector<int> mask;
    int eos_index = 0;
};

// Builds the mask from eos_index and validates the invariants.
TokenSequence make_token_sequence(std::vector<int> tokens, int eos_index);
void validate_token_sequence(const TokenSequence& seq);

// Fixed-size patch grid standing in for a satellite image.
struct SceneGrid {
    Matrix patches;  // P x F
    GeoPoint geo;
};

struct ModelConfig {
    int dim = 64;
    int layers = 2;
    int heads = 4;
    int vocab = 256;
    int max_len = 64;
    int patches = 16;
    int patch_features = 8;
    std::uint64_t init_seed = 1234;

    int head_dim() const { return dim / heads; }
    int mlp_dim() const { return 4 * dim; }
};

struct LayerParams {
    Matrix ln1_g, ln1_b;
    Matrix wq, wk, wv, wo;  // d x d, applied as X*W
    Matrix ln2_g, ln2_b;
    Matrix w1, w2;          // d x 4d, 4d x d
};

// Shared trunk weights plus the two input embedders. The trunk is identical
// for text and image inputs; only tok_emb/pos_emb vs patch_proj differ.
struct EncoderParams {
    ModelConfig cfg;
    Matrix tok_emb;     // V x d
    Matrix pos_emb;     // L_max x d
    Matrix patch_proj;  // F x d
    std::vector<LayerParams> layers;
    Matrix lnf_g, lnf_b;
    std::map<std::string, bool> trainable;  // per-matrix frozen/trainable status
};

EncoderParams init_encoder(const ModelConfig& cfg);

std::vector<std::pair<std::string, Matrix*>> named_params(EncoderParams& p);
std::vector<std::pair<std::string, const Matrix*>> named_params(const EncoderParams& p);

// Attention and MLP matrices, the LoRA full-coverage target list.
std::vector<std::string> lora_target_names(const ModelConfig& cfg);

struct HiddenStates {
    Matrix h;  // T x d
    std::vector<int> mask;
    int eos_index = 0;
};

// Parameter nodes for one graph build. Trainable names become parameter nodes,
// everything else constants; adapter nodes are keyed "lora.<target>.A"/".B".
struct BoundParams {
    ModelConfig cfg;
    std::map<std::string, graph::NodePtr> nodes;
    std::vector<graph::NodePtr> head_selector;    // d x head_dim constants
    std::vector<graph::NodePtr> head_selector_t;  // head_dim x d constants
    double lora_scaling = 0.0;
    bool has_adapters = false;

    const graph::NodePtr& at(const std::string& name) const;
};

BoundParams bind_params(const EncoderParams& params, const LoRASet* adapters,
                        const std::set<std::string>& trainable_names);

graph::NodePtr encode_text_graph(const BoundParams& bp, const TokenSequence& seq);
graph::NodePtr encode_image_graph(const BoundParams& bp, const SceneGrid& grid);

HiddenStates encode_text(const EncoderParams& params, const LoRASet* adapters,
                         const TokenSequence& seq);
HiddenStates encode_image(const EncoderParams& params, const LoRASet* adapters,
                          const SceneGrid& grid);

}  // namespace ngcg
