#include "ngcg/matrix.hpp"

#include <cmath>
#include <cstring>

namespace ngcg {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows = static_cast<int>(init.size());
    cols = rows > 0 ? static_cast<int>(init.begin()->size()) : 0;
    data.reserve(static_cast<std::size_t>(rows) * cols);
    for (const auto& row : init) {
        if (static_cast<int>(row.size()) != cols)
            throw DimensionError("ragged initializer list");
        data.insert(data.end(), row.begin(), row.end());
    }
}

double Matrix::scalar() const {
    if (!is_scalar()) throw ContractError("scalar() on non 1x1 matrix");
    return data[0];
}

bool Matrix::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }

Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix random_normal(int rows, int cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = stddev * rng.normal();
    return m;
}

Matrix random_uniform(int rows, int cols, double lo, double hi, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

Matrix transposed(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
    const int m = a.rows, k = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        const double* arow = &a.data[static_cast<std::size_t>(i) * k];
        double* crow = &c.data[static_cast<std::size_t>(i) * n];
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.data[static_cast<std::size_t>(p) * n];
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    // c (a.rows x b.rows) += a * b^T
    const int m = a.rows, k = a.cols, n = b.rows;
    for (int i = 0; i < m; ++i) {
        const double* arow = &a.data[static_cast<std::size_t>(i) * k];
        double* crow = &c.data[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) {
            const double* brow = &b.data[static_cast<std::size_t>(j) * k];
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    // c (a.cols x b.cols) += a^T * b
    const int m = a.cols, k = a.rows, n = b.cols;
    for (int p = 0; p < k; ++p) {
        const double* arow = &a.data[static_cast<std::size_t>(p) * m];
        const double* brow = &b.data[static_cast<std::size_t>(p) * n];
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = &c.data[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul shape mismatch: " + std::to_string(a.rows) + "x" +
                             std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                             std::to_string(b.cols));
    Matrix c(a.rows, b.cols);
    gemm_nn(a, b, c);
    return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t matrix_hash(const Matrix& a) {
    std::uint64_t h = fnv1a(&a.rows, sizeof(a.rows));
    h = fnv1a(&a.cols, sizeof(a.cols), h);
    return fnv1a(a.data.data(), a.data.size() * sizeof(double), h);
}

void require_finite(const Matrix& a, const std::string& what) {
    if (!a.all_finite()) throw NumericError("non-finite values in " + what);
}

}  // namespace ngcg
