#pragma once

#include <cstdint>
#include <vector>

#include "tabgns/matrix.hpp"
#include "tabgns/rng.hpp"

namespace tabgns {

/// One fully connected layer: weight is out_dim x in_dim, bias has out_dim
/// entries.
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }

    bool operator==(const DenseLayer&) const = default;
};

/// Column subset for gated inputs: entries are input-column indices in
/// strictly increasing order. Kernels that take one assume the skipped
/// columns of the input are exactly zero.
using ActiveCols = std::vector<std::uint32_t>;

DenseLayer make_dense_layer(std::size_t out_dim, std::size_t in_dim);

/// He-uniform initialization, bound sqrt(6 / fan_in); biases zero. Draws
/// weights row-major so the layout pins the stream order.
void he_uniform_init(DenseLayer& layer, Rng& rng);

// ---- forward ------------------------------------------------------------

/// result[i] = sum_j weight[i,j] * x[j] + bias[i]
std::vector<double> linear_forward(const std::vector<double>& x, const DenseLayer& layer);

/// Batched variant; rows of X are samples. Output is batch x out_dim.
Matrix linear_forward(const Matrix& X, const DenseLayer& layer);

/// Batched variant that only reads the listed input columns.
Matrix linear_forward(const Matrix& X, const DenseLayer& layer, const ActiveCols& cols);

/// Restricted on both axes: only the `out_cols` outputs get their bias and
/// products (the others stay exactly zero), and only `in_cols` inputs are
/// read. Kept outputs accumulate in the same order as the full kernel, so
/// their values are bit-identical to the unrestricted result.
Matrix linear_forward(const Matrix& X, const DenseLayer& layer, const ActiveCols& in_cols,
                      const ActiveCols& out_cols);

std::vector<double> relu_forward(const std::vector<double>& z);
Matrix relu_forward(const Matrix& Z);

/// In-place variant for passes that will not need the pre-activations.
void relu_inplace(Matrix& Z);

// ---- backward -----------------------------------------------------------

struct LinearGrads {
    Matrix d_weight;            // out_dim x in_dim
    std::vector<double> d_bias; // out_dim
    Matrix d_input;             // batch x in_dim
};

struct LinearVecGrads {
    Matrix d_weight;
    std::vector<double> d_bias;
    std::vector<double> d_input;
};

/// dW[i,j] = d_out[i]*x[j]; db = d_out; dx[j] = sum_i weight[i,j]*d_out[i]
LinearVecGrads linear_backward(const std::vector<double>& d_out, const std::vector<double>& x,
                               const DenseLayer& layer);

/// Batched variant: dW and db sum over the batch, d_input is per row.
LinearGrads linear_backward(const Matrix& d_out, const Matrix& X, const DenseLayer& layer);

/// Restricted variant: d_weight and d_input columns outside `cols` stay
/// zero. Skipped input columns carry zero activations, and whatever gated
/// them to zero also zeroes their gradient downstream, so nothing is lost.
LinearGrads linear_backward(const Matrix& d_out, const Matrix& X, const DenseLayer& layer,
                            const ActiveCols& cols);

/// d_weight and d_bias only; d_input is left empty. Used on the first layer,
/// whose input gradient has no consumer.
LinearGrads linear_backward_params(const Matrix& d_out, const Matrix& X, const DenseLayer& layer);

/// d_input only: d_input[r,j] = sum_i weight[i,j] * d_out[r,i]. Used when
/// the layer's own weight gradient is not wanted (gate-only passes).
Matrix linear_backward_input(const Matrix& d_out, const DenseLayer& layer);

/// result[i] = d_a[i] if z[i] > 0 else 0 (subgradient 0 at z = 0)
std::vector<double> relu_backward(const std::vector<double>& d_a, const std::vector<double>& z);
Matrix relu_backward(const Matrix& d_a, const Matrix& Z);

} // namespace tabgns
