#pragma once

#include <cstdint>
#include <vector>

#include "tabgns/dense.hpp"
#include "tabgns/gates.hpp"
#include "tabgns/loss.hpp"
#include "tabgns/matrix.hpp"
#include "tabgns/rng.hpp"

namespace tabgns {

inline constexpr double kDefaultGateInit = -3.0;

/// Bounds of the architecture family: every candidate is an MLP with
/// `hidden_layers` hidden layers of width at most `max_width`.
struct SearchSpace {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::size_t hidden_layers = 5;
    std::size_t max_width = 512;
    Task task = Task::regression;

    bool operator==(const SearchSpace&) const = default;
};

/// Throws ConfigError unless every dimension is >= 1.
void validate(const SearchSpace& space);

/// The full-width gated network. layers[0] is max_width x input_dim, the
/// middle layers are max_width x max_width, the last is
/// output_dim x max_width. One gate logit per hidden neuron; input and
/// output neurons are never gated.
struct SuperNet {
    SearchSpace space;
    std::vector<DenseLayer> layers; // hidden_layers + 1 entries
    GateBank gates;

    bool operator==(const SuperNet&) const = default;
};

/// Weights He-uniform from `seed` (layer by layer, rows in order), biases
/// zero, every gate logit set to gate_init.
SuperNet init_supernet(const SearchSpace& space, std::uint64_t seed,
                       double gate_init = kDefaultGateInit);

enum class ForwardMode {
    stochastic,    // gates sampled with Gumbel noise, hard 0/1 mask (training)
    deterministic, // mask = [logit >= 0] with the keep-at-least-one fallback
    ungated,       // every neuron active
    soft,          // sampled noise but gated by the soft probability (tests)
};

// In deterministic and weights-only traces the mask is known before the
// matmul, so z/a columns it closes are skipped and left exactly zero;
// weights-only traces drop `a` altogether (h carries the same values).
struct LayerTrace {
    Matrix z;         // batch x W before ReLU
    Matrix a;         // batch x W after ReLU (empty in weights-only traces)
    Matrix h;         // batch x W after gating; masked entries exactly zero
    GateSample gates; // the per-batch gate draw (noise fields empty outside
                      // stochastic/soft modes)
    Matrix soft_rows; // per-sample noise only: batch x W probabilities
    Matrix hard_rows; // per-sample noise only: batch x W hard masks
};

struct ForwardTrace {
    ForwardMode mode = ForwardMode::deterministic;
    bool per_sample = false;
    bool weights_only = false; // closed-column activations skipped; no gate grads
    Matrix input;
    std::vector<LayerTrace> hidden;
    Matrix predictions;
};

/// Gated forward pass caching everything backward needs. Hidden layer:
/// z = W h + b, a = ReLU(z), h = a * gate; output layer is linear with no
/// gate. stochastic/soft modes draw noise from rng (required, one draw per
/// gate per batch unless noise_per_sample). Throws ShapeError on a column
/// mismatch, ConfigError when a noisy mode gets no rng.
ForwardTrace forward(const SuperNet& net, const Matrix& X, ForwardMode mode, Rng* rng = nullptr,
                     bool noise_per_sample = false);

/// Stochastic forward for a frozen-gate weight step: the sampled mask is
/// decided first and the z/ReLU work of the columns it closes is skipped
/// (their gated output is zero regardless). Consumes the same noise stream
/// as forward() and yields bit-identical predictions, h, and weight
/// gradients; gate-target backward rejects the trace since closed-column
/// activations are missing.
ForwardTrace forward_weights_only(const SuperNet& net, const Matrix& X, Rng& rng,
                                  bool noise_per_sample = false);

/// Replays the forward pass under externally fixed per-batch gate noise
/// (only the noise_on/noise_off fields of `noise` are read; probabilities
/// are recomputed from the current logits). soft = true gates by the soft
/// probability. This is what lets tests differentiate the loss at frozen
/// noise.
ForwardTrace forward_with_noise(const SuperNet& net, const Matrix& X,
                                const std::vector<GateSample>& noise, bool soft);

/// Deterministic-mode predictions without building a trace: same masks, same
/// kernels, same accumulation order as forward(..., deterministic), so the
/// output is bit-identical. Backs the epoch-end validation loss.
Matrix predict_deterministic(const SuperNet& net, const Matrix& X);

enum class GradTarget { weights, gates };

/// Exactly one of the two sets is populated, matching `which`.
struct SuperNetGrads {
    GradTarget which = GradTarget::weights;
    std::vector<Matrix> d_weight;            // per layer, weights target only
    std::vector<std::vector<double>> d_bias; // per layer, weights target only
    std::vector<double> d_logits;            // flat L*W, gates target only
};

/// Reverse pass over a cached trace; the loss gradient comes from the
/// space's task. The sampled mask multiplies the weight-path gradient
/// (d_a = d_h * gate), and each logit receives the straight-through sum
/// over the batch of d_h * a * p(1-p)/tau. Gate gradients require a
/// stochastic or soft trace that is not weights-only (ConfigError
/// otherwise); shape mismatches between net and trace raise ShapeError.
SuperNetGrads backward(const SuperNet& net, const ForwardTrace& trace, const Matrix& targets,
                       GradTarget which);

/// A concrete extracted network: per hidden layer the sorted kept neuron
/// indices, plus the sliced weights (no re-initialization).
struct Architecture {
    SearchSpace space;
    std::vector<std::vector<std::uint32_t>> kept;
    std::vector<DenseLayer> layers;

    bool operator==(const Architecture&) const = default;

    std::vector<std::size_t> hidden_widths() const;
};

/// Keep sets "logit >= 0"; a layer that would go empty keeps its single
/// highest-logit neuron instead (lowest index on ties). Shared by
/// extraction and the deterministic forward mask so the two always agree.
std::vector<std::vector<std::uint32_t>> deterministic_kept(const GateBank& gates);

Architecture extract_architecture(const SuperNet& net);

enum class ParamConvention {
    paper, // weights between consecutive hidden layers only, no biases
    full,  // all weights and biases, input to output
};

/// widths lists every layer size from input to output inclusive.
std::uint64_t count_parameters(const std::vector<std::size_t>& widths,
                               ParamConvention convention);
std::uint64_t count_parameters(const Architecture& arch, ParamConvention convention);

/// input, hidden..., output
std::vector<std::size_t> layer_widths(const Architecture& arch);

/// Sum of sigmoid(logit) over all gates: the expected number of open
/// neurons under the current parameters.
double expected_size(const SuperNet& net);

/// Gates with logit >= 0, i.e. what extraction keeps before the empty-layer
/// fallback.
std::size_t open_count(const SuperNet& net);

/// Plain MLP forward over an arbitrary dense stack (ReLU on all but the
/// last layer). Shared by extracted networks, fixed-architecture training
/// and the synthetic-data teacher.
struct MlpTrace {
    Matrix input;
    std::vector<Matrix> z; // per hidden layer
    std::vector<Matrix> a;
    Matrix predictions;
};

MlpTrace mlp_forward(const std::vector<DenseLayer>& layers, const Matrix& X);

struct MlpGrads {
    std::vector<Matrix> d_weight;
    std::vector<std::vector<double>> d_bias;
};

MlpGrads mlp_backward(const std::vector<DenseLayer>& layers, const MlpTrace& trace,
                      const Matrix& targets, Task task);

/// Fully connected stack input -> hidden... -> output, He-uniform init.
std::vector<DenseLayer> make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                 std::size_t output_dim, Rng& rng);

Matrix predict(const Architecture& arch, const Matrix& X);

} // namespace tabgns
