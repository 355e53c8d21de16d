#pragma once

#include <string>
#include <vector>

#include "ngcg/config.hpp"
#include "ngcg/gradcheck.hpp"

namespace ngcg {

// Text->image retrieval metrics on one split: queries are the split's texts,
// candidates its grids, truth the identity pairing.
EvalReport eval_split(const Checkpoint& model, const Corpus& corpus, const std::string& split,
                      bool strict_loc = false);

struct AblationRow {
    std::string axis_value;
    EvalReport report;
    std::uint64_t seed = 0;
    std::string config_hash;
};

// Grid axes: tau {0.02 0.03 0.05 0.07 0.1 learnable}, alpha {16 32 64 128} at
// r=16, pooling {eos query average}, mode {lora full}.
std::vector<AblationRow> run_ablation(const std::string& axis, const ExperimentConfig& base);

std::string ablation_csv(const std::vector<AblationRow>& rows);

// Finite-difference check of the InfoNCE loss composed through a small
// encoder, over every trainable parameter of the given mode.
GradCheckReport composite_gradcheck(std::uint64_t seed, TrainMode mode,
                                    double step = 1e-5, double tol = 1e-4);

// Max |analytic gradient| per frozen base matrix in LoRA mode; all zero, since
// gradients flow only to the adapters (and pooling query / log-temperature).
std::vector<std::pair<std::string, double>> frozen_gradient_report(std::uint64_t seed);

}  // namespace ngcg
