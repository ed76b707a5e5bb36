#include "tabgns/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tabgns/errors.hpp"
#include "tabgns/parallel.hpp"

namespace tabgns {

namespace {

ActiveCols all_cols(std::size_t n) {
    ActiveCols cols(n);
    std::iota(cols.begin(), cols.end(), 0u);
    return cols;
}

} // namespace

DenseLayer make_dense_layer(std::size_t out_dim, std::size_t in_dim) {
    return DenseLayer{Matrix(out_dim, in_dim), std::vector<double>(out_dim, 0.0)};
}

void he_uniform_init(DenseLayer& layer, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim()));
    auto& w = layer.weight.values();
    for (double& v : w) v = rng.uniform_range(-bound, bound);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

std::vector<double> linear_forward(const std::vector<double>& x, const DenseLayer& layer) {
    require_size(x.size(), layer.in_dim(), "linear_forward input");
    std::vector<double> out(layer.bias);
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
        const double* w = layer.weight.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) acc += w[j] * x[j];
        out[i] += acc;
    }
    return out;
}

Matrix linear_forward(const Matrix& X, const DenseLayer& layer) {
    return linear_forward(X, layer, all_cols(layer.in_dim()));
}

Matrix linear_forward(const Matrix& X, const DenseLayer& layer, const ActiveCols& cols) {
    require_size(X.cols(), layer.in_dim(), "linear_forward batch input");
    const std::size_t out_dim = layer.out_dim();
    Matrix out(X.rows(), out_dim);
    // W transposed over just the active inputs so the inner axpy runs over
    // contiguous memory.
    const std::size_t n = cols.size();
    Matrix wt(n, out_dim);
    for (std::size_t k = 0; k < n; ++k) {
        double* wr = wt.row(k);
        for (std::size_t i = 0; i < out_dim; ++i) wr[i] = layer.weight(i, cols[k]);
    }
    parallel_rows(X.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            double* y = out.row(r);
            for (std::size_t i = 0; i < out_dim; ++i) y[i] = layer.bias[i];
            const double* x = X.row(r);
            for (std::size_t k = 0; k < n; ++k) {
                const double xv = x[cols[k]];
                if (xv == 0.0) continue;
                const double* wrow = wt.row(k);
                for (std::size_t i = 0; i < out_dim; ++i) y[i] += xv * wrow[i];
            }
        }
    });
    return out;
}

Matrix linear_forward(const Matrix& X, const DenseLayer& layer, const ActiveCols& in_cols,
                      const ActiveCols& out_cols) {
    require_size(X.cols(), layer.in_dim(), "linear_forward batch input");
    Matrix out(X.rows(), layer.out_dim());
    const std::size_t n = out_cols.size();
    if (n == 0) return out;

    // Compact W^T and bias slices over the kept inputs and outputs keep the
    // inner axpy contiguous; each kept output accumulates the same addends in
    // the same order as the full kernel, so its value is bit-identical.
    const std::size_t m = in_cols.size();
    Matrix wt(m, n);
    std::vector<double> bias(n);
    for (std::size_t k = 0; k < n; ++k) bias[k] = layer.bias[out_cols[k]];
    for (std::size_t q = 0; q < m; ++q) {
        double* wr = wt.row(q);
        for (std::size_t k = 0; k < n; ++k) wr[k] = layer.weight(out_cols[k], in_cols[q]);
    }

    parallel_rows(X.rows(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(n);
        for (std::size_t r = begin; r < end; ++r) {
            for (std::size_t k = 0; k < n; ++k) acc[k] = bias[k];
            const double* x = X.row(r);
            for (std::size_t q = 0; q < m; ++q) {
                const double xv = x[in_cols[q]];
                if (xv == 0.0) continue;
                const double* wr = wt.row(q);
                for (std::size_t k = 0; k < n; ++k) acc[k] += xv * wr[k];
            }
            double* y = out.row(r);
            for (std::size_t k = 0; k < n; ++k) y[out_cols[k]] = acc[k];
        }
    });
    return out;
}

std::vector<double> relu_forward(const std::vector<double>& z) {
    std::vector<double> a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    return a;
}

Matrix relu_forward(const Matrix& Z) {
    Matrix a(Z.rows(), Z.cols());
    const auto& zv = Z.values();
    auto& av = a.values();
    for (std::size_t i = 0; i < zv.size(); ++i) av[i] = zv[i] > 0.0 ? zv[i] : 0.0;
    return a;
}

void relu_inplace(Matrix& Z) {
    for (double& v : Z.values()) v = v > 0.0 ? v : 0.0;
}

LinearVecGrads linear_backward(const std::vector<double>& d_out, const std::vector<double>& x,
                               const DenseLayer& layer) {
    require_size(d_out.size(), layer.out_dim(), "linear_backward d_out");
    require_size(x.size(), layer.in_dim(), "linear_backward input");
    LinearVecGrads g;
    g.d_weight = Matrix(layer.out_dim(), layer.in_dim());
    g.d_bias = d_out;
    g.d_input.assign(layer.in_dim(), 0.0);
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
        double* dw = g.d_weight.row(i);
        const double* w = layer.weight.row(i);
        const double dv = d_out[i];
        for (std::size_t j = 0; j < x.size(); ++j) {
            dw[j] = dv * x[j];
            g.d_input[j] += w[j] * dv;
        }
    }
    return g;
}

LinearGrads linear_backward(const Matrix& d_out, const Matrix& X, const DenseLayer& layer) {
    require_size(X.cols(), layer.in_dim(), "linear_backward batch input");
    require_size(d_out.cols(), layer.out_dim(), "linear_backward batch d_out");
    require_size(d_out.rows(), X.rows(), "linear_backward batch rows");

    LinearGrads g;
    g.d_weight = Matrix(layer.out_dim(), layer.in_dim());
    g.d_bias.assign(layer.out_dim(), 0.0);
    g.d_input = Matrix(X.rows(), X.cols());

    parallel_rows(layer.out_dim(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double* dw = g.d_weight.row(i);
            for (std::size_t r = 0; r < X.rows(); ++r) {
                const double dv = d_out(r, i);
                if (dv == 0.0) continue;
                const double* x = X.row(r);
                for (std::size_t j = 0; j < X.cols(); ++j) dw[j] += dv * x[j];
            }
        }
    });

    for (std::size_t r = 0; r < d_out.rows(); ++r) {
        const double* drow = d_out.row(r);
        for (std::size_t i = 0; i < layer.out_dim(); ++i) g.d_bias[i] += drow[i];
    }

    parallel_rows(X.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            double* dx = g.d_input.row(r);
            const double* drow = d_out.row(r);
            for (std::size_t i = 0; i < layer.out_dim(); ++i) {
                const double dv = drow[i];
                if (dv == 0.0) continue;
                const double* w = layer.weight.row(i);
                for (std::size_t j = 0; j < X.cols(); ++j) dx[j] += dv * w[j];
            }
        }
    });

    return g;
}

LinearGrads linear_backward(const Matrix& d_out, const Matrix& X, const DenseLayer& layer,
                            const ActiveCols& cols) {
    require_size(X.cols(), layer.in_dim(), "linear_backward batch input");
    require_size(d_out.cols(), layer.out_dim(), "linear_backward batch d_out");
    require_size(d_out.rows(), X.rows(), "linear_backward batch rows");

    LinearGrads g;
    g.d_weight = Matrix(layer.out_dim(), layer.in_dim());
    g.d_bias.assign(layer.out_dim(), 0.0);
    g.d_input = Matrix(X.rows(), X.cols());
    const std::size_t n = cols.size();

    // Compact column slices of X and W keep the inner loops contiguous; the
    // per-entry accumulation order matches the full kernel bit for bit.
    Matrix xc(X.rows(), n);
    for (std::size_t r = 0; r < X.rows(); ++r) {
        double* row = xc.row(r);
        const double* x = X.row(r);
        for (std::size_t k = 0; k < n; ++k) row[k] = x[cols[k]];
    }
    Matrix wc(layer.out_dim(), n);
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
        double* row = wc.row(i);
        const double* w = layer.weight.row(i);
        for (std::size_t k = 0; k < n; ++k) row[k] = w[cols[k]];
    }

    // dW[i,:] = sum_r d_out[r,i] * X[r,:], partitioned by output row so the
    // batch reduction stays in one thread (bit-stable at any thread count).
    parallel_rows(layer.out_dim(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(n);
        for (std::size_t i = begin; i < end; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t r = 0; r < X.rows(); ++r) {
                const double dv = d_out(r, i);
                if (dv == 0.0) continue;
                const double* x = xc.row(r);
                for (std::size_t k = 0; k < n; ++k) acc[k] += dv * x[k];
            }
            double* dw = g.d_weight.row(i);
            for (std::size_t k = 0; k < n; ++k) dw[cols[k]] = acc[k];
        }
    });

    for (std::size_t r = 0; r < d_out.rows(); ++r) {
        const double* drow = d_out.row(r);
        for (std::size_t i = 0; i < layer.out_dim(); ++i) g.d_bias[i] += drow[i];
    }

    parallel_rows(X.rows(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(n);
        for (std::size_t r = begin; r < end; ++r) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double* drow = d_out.row(r);
            for (std::size_t i = 0; i < layer.out_dim(); ++i) {
                const double dv = drow[i];
                if (dv == 0.0) continue;
                const double* w = wc.row(i);
                for (std::size_t k = 0; k < n; ++k) acc[k] += dv * w[k];
            }
            double* dx = g.d_input.row(r);
            for (std::size_t k = 0; k < n; ++k) dx[cols[k]] = acc[k];
        }
    });

    return g;
}

LinearGrads linear_backward_params(const Matrix& d_out, const Matrix& X,
                                   const DenseLayer& layer) {
    require_size(X.cols(), layer.in_dim(), "linear_backward batch input");
    require_size(d_out.cols(), layer.out_dim(), "linear_backward batch d_out");
    require_size(d_out.rows(), X.rows(), "linear_backward batch rows");

    LinearGrads g;
    g.d_weight = Matrix(layer.out_dim(), layer.in_dim());
    g.d_bias.assign(layer.out_dim(), 0.0);

    parallel_rows(layer.out_dim(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double* dw = g.d_weight.row(i);
            for (std::size_t r = 0; r < X.rows(); ++r) {
                const double dv = d_out(r, i);
                if (dv == 0.0) continue;
                const double* x = X.row(r);
                for (std::size_t j = 0; j < X.cols(); ++j) dw[j] += dv * x[j];
            }
        }
    });

    for (std::size_t r = 0; r < d_out.rows(); ++r) {
        const double* drow = d_out.row(r);
        for (std::size_t i = 0; i < layer.out_dim(); ++i) g.d_bias[i] += drow[i];
    }

    return g;
}

Matrix linear_backward_input(const Matrix& d_out, const DenseLayer& layer) {
    require_size(d_out.cols(), layer.out_dim(), "linear_backward_input d_out");
    Matrix d_input(d_out.rows(), layer.in_dim());
    parallel_rows(d_out.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            double* dx = d_input.row(r);
            const double* drow = d_out.row(r);
            for (std::size_t i = 0; i < layer.out_dim(); ++i) {
                const double dv = drow[i];
                if (dv == 0.0) continue;
                const double* w = layer.weight.row(i);
                for (std::size_t j = 0; j < layer.in_dim(); ++j) dx[j] += dv * w[j];
            }
        }
    });
    return d_input;
}

std::vector<double> relu_backward(const std::vector<double>& d_a, const std::vector<double>& z) {
    require_size(d_a.size(), z.size(), "relu_backward");
    std::vector<double> d_z(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d_z[i] = z[i] > 0.0 ? d_a[i] : 0.0;
    return d_z;
}

Matrix relu_backward(const Matrix& d_a, const Matrix& Z) {
    require_shape(d_a, Z.rows(), Z.cols(), "relu_backward");
    Matrix d_z(Z.rows(), Z.cols());
    const auto& av = d_a.values();
    const auto& zv = Z.values();
    auto& dv = d_z.values();
    for (std::size_t i = 0; i < zv.size(); ++i) dv[i] = zv[i] > 0.0 ? av[i] : 0.0;
    return d_z;
}

} // namespace tabgns
