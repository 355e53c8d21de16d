#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ngcg/matrix.hpp"

namespace ngcg {

struct EncoderParams;

// Trainable low-rank delta for one frozen base matrix. Follows the column
// convention: the base W0 is (out x in), a is (r x in), b is (out x r), and the
// effective update is (alpha/r) * b * a.
struct LoRAAdapter {
    std::string target;
    Matrix a;  // r x in, random init
    Matrix b;  // out x r, zero init
    double alpha = 0.0;
    int rank = 0;

    LoRAAdapter() = default;
    LoRAAdapter(std::string target_name, Matrix a_init, Matrix b_init, double alpha_val,
                int rank_val);

    double scaling() const { return alpha / rank; }
};

struct LoRASet {
    std::map<std::string, LoRAAdapter> adapters;  // keyed by target name
    double alpha = 0.0;
    int rank = 0;
};

// Creates one adapter per attention/MLP matrix (full coverage) and marks the
// base weights frozen. A ~ N(0, 1/sqrt(r)), B = 0, so the adapted model equals
// the base model at step 0.
LoRASet attach(EncoderParams& params, int rank, double alpha, std::uint64_t seed);

// h' = W0 x + (alpha/r) * B (A x), computed as two low-rank products.
Matrix adapted_forward(const Matrix& w0, const LoRAAdapter& adapter, const Matrix& x);

// W0 + (alpha/r) * B A as a dense matrix.
Matrix merge(const Matrix& w0, const LoRAAdapter& adapter);

struct PoolingConfig;

// All A and B matrices, plus the pooling query when the strategy has one.
// Base matrices are never included.
std::vector<std::string> trainable_parameters(const LoRASet& set, const PoolingConfig& pooling);

}  // namespace ngcg
