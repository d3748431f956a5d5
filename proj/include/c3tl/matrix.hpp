#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "errors.hpp"

namespace c3tl {

/// Dense row-major matrix of doubles. All numeric state in the library
/// (expression deltas, latents, layer weights) lives in this type.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("matrix data length does not match rows*cols");
    }

    static Matrix row_vector(std::initializer_list<double> values) {
        return Matrix(1, values.size(), std::vector<double>(values));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    void require_same_shape(const Matrix& o) const {
        if (!same_shape(o)) throw DimensionError("matrix shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// out = A * B. The i-k-j loop order keeps every inner access contiguous.
inline void matmul_into(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree");
    out = Matrix(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = ad + i * k;
        double* orow = od + i * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = bd + kk * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out;
    matmul_into(a, b, out);
    return out;
}

/// out = A^T * B, without materializing the transpose.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_at_b: row counts disagree");
    Matrix out(a.cols(), b.cols());
    const std::size_t n = a.rows(), p = a.cols(), m = b.cols();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t kk = 0; kk < n; ++kk) {
        const double* arow = ad + kk * p;
        const double* brow = bd + kk * m;
        for (std::size_t i = 0; i < p; ++i) {
            const double av = arow[i];
            double* orow = od + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

/// out = A * B^T; rows of both operands are contiguous dot products.
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_a_bt: column counts disagree");
    Matrix out(a.rows(), b.rows());
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.data().data() + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = b.data().data() + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            out(i, j) = acc;
        }
    }
    return out;
}

/// Column sums as a 1 x cols row vector.
inline Matrix column_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += r[j];
    }
    return out;
}

/// Arithmetic mean of a list of 1 x q row vectors. Summation runs in
/// ascending list index order, which makes the result independent of how the
/// caller ordered any underlying set (callers pass canonically sorted lists).
inline Matrix mean_rows(const std::vector<Matrix>& rows) {
    if (rows.empty()) throw EmptyAggregationError("mean_rows: empty input list");
    const std::size_t q = rows.front().cols();
    Matrix acc(1, q);
    for (const Matrix& r : rows) {
        if (r.rows() != 1 || r.cols() != q)
            throw DimensionError("mean_rows: inputs must all be 1 x q");
        acc += r;
    }
    acc *= 1.0 / static_cast<double>(rows.size());
    return acc;
}

/// Mean over a contiguous row range [begin, end) of m, as a 1 x cols vector.
inline Matrix mean_row_range(const Matrix& m, std::size_t begin, std::size_t end) {
    if (begin >= end || end > m.rows())
        throw EmptyAggregationError("mean_row_range: empty or invalid range");
    Matrix acc(1, m.cols());
    for (std::size_t i = begin; i < end; ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) acc(0, j) += r[j];
    }
    acc *= 1.0 / static_cast<double>(end - begin);
    return acc;
}

inline double squared_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

}  // namespace c3tl
