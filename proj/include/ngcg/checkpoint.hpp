#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ngcg/encoder.hpp"
#include "ngcg/lora.hpp"
#include "ngcg/objective.hpp"
#include "ngcg/pooling.hpp"

namespace ngcg {

// Full model state: trunk weights, optional adapters, pooling and loss setup.
struct Checkpoint {
    EncoderParams params;
    std::optional<LoRASet> adapters;
    PoolingConfig pooling;
    TemperatureConfig temp;
    LossDirection direction = LossDirection::Symmetric;
    std::uint64_t config_hash = 0;

    const LoRASet* adapter_ptr() const { return adapters ? &*adapters : nullptr; }
};

// Binary container: magic "NGCGCKPT", u32 format version, then named tensors
// (u32 name length, name bytes, u32 rows, u32 cols, row-major f64 LE).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ngcg
