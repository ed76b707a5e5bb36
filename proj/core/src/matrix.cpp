#include "tabgns/matrix.hpp"

#include <cmath>

#include "tabgns/errors.hpp"

namespace tabgns {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require_size(rows[r].size(), m.cols(), "Matrix::from_rows row " + std::to_string(r));
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
    Matrix m(1, v.size());
    for (std::size_t c = 0; c < v.size(); ++c) m(0, c) = v[c];
    return m;
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void require_size(std::size_t actual, std::size_t expected, const std::string& what) {
    if (actual != expected) {
        throw ShapeError(what + ": expected size " + std::to_string(expected) + ", got " +
                         std::to_string(actual));
    }
}

bool all_finite(const Matrix& m) { return all_finite(m.values()); }

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void require_finite(const Matrix& m, const std::string& what) { require_finite(m.values(), what); }

void require_finite(const std::vector<double>& v, const std::string& what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericError(what + ": non-finite value at index " + std::to_string(i));
        }
    }
}

} // namespace tabgns
