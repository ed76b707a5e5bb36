#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tabgns {

/// Dense row-major matrix of doubles. The batch dimension, where present,
/// is always the row dimension.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
    static Matrix row_vector(const std::vector<double>& v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Throws ShapeError naming `what` unless the matrix has the expected shape.
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what);

/// Throws ShapeError unless the two sizes match.
void require_size(std::size_t actual, std::size_t expected, const std::string& what);

/// True when every entry is finite (no NaN, no infinities).
bool all_finite(const Matrix& m);
bool all_finite(const std::vector<double>& v);

/// Throws NumericError naming `what` on the first non-finite entry.
void require_finite(const Matrix& m, const std::string& what);
void require_finite(const std::vector<double>& v, const std::string& what);

} // namespace tabgns
