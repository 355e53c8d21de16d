#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "ngcg/errors.hpp"
#include "ngcg/rng.hpp"

namespace ngcg {

// Dense row-major matrix of doubles. The whole training stack runs in 64-bit;
// float32 appears only in the embedding file format.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw DimensionError("negative matrix dimension");
    }
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    double scalar() const;

    bool all_finite() const;
};

Matrix zeros(int rows, int cols);
Matrix identity(int n);
Matrix random_normal(int rows, int cols, double stddev, Rng& rng);
Matrix random_uniform(int rows, int cols, double lo, double hi, Rng& rng);

Matrix transposed(const Matrix& a);

// C += A*B, C += A*B^T, C += A^T*B. Shapes are the caller's responsibility.
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c);

Matrix matmul(const Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);

// FNV-1a over the raw bytes; used for frozen-weight checks and config digests.
std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t matrix_hash(const Matrix& a);

void require_finite(const Matrix& a, const std::string& what);

}  // namespace ngcg
