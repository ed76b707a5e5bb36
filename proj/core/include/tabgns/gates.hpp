#pragma once

#include <cstddef>
#include <vector>

#include "tabgns/rng.hpp"

namespace tabgns {

/// Numerically stable logistic function.
double sigmoid(double x);

/// One learnable logit per hidden neuron (input/output neurons carry no
/// gate). Logit (l, j) lives at l * width + j.
struct GateBank {
    std::size_t hidden_layers = 0;
    std::size_t width = 0;
    double tau = 1.0;
    std::vector<double> logits; // hidden_layers * width

    double& logit(std::size_t layer, std::size_t j) { return logits[layer * width + j]; }
    double logit(std::size_t layer, std::size_t j) const { return logits[layer * width + j]; }

    bool operator==(const GateBank&) const = default;
};

GateBank make_gate_bank(std::size_t hidden_layers, std::size_t width, double gate_init,
                        double tau = 1.0);

/// One stochastic realization of a group of gates: the Gumbel noise pair,
/// the soft probability, and the hard 0/1 value per gate.
struct GateSample {
    std::vector<double> noise_on;  // o1, the "on" branch draw
    std::vector<double> noise_off; // o2, the "off" branch draw
    std::vector<double> soft;      // p in (0,1)
    std::vector<double> hard;      // exactly 0.0 or 1.0
};

/// n independent Gumbel(0,1) draws: -ln(-ln(u)) with u uniform on (0,1).
std::vector<double> sample_gumbel(Rng& rng, std::size_t n);

/// p = sigmoid((g + o1 - o2) / tau), clamped to [1e-12, 1 - 1e-12] so the
/// straight-through backward stays finite under saturation.
/// Throws ConfigError when tau <= 0.
double gate_soft_prob(double g, double o1, double o2, double tau);

/// Hard threshold: 1 iff p >= 0.5 (the two-category argmax; ties open).
double gate_hard(double p);

/// Straight-through gradient into the logit: d_g = d_z * p * (1 - p) / tau.
double gate_backward(double d_z, double p, double tau);

/// Noise-free open probability sigmoid(g); the extraction/size-reporting
/// signal. >= 0.5 exactly when g >= 0.
double deterministic_open_prob(double g);

/// Samples every gate of one hidden layer: fresh noise per gate, soft
/// probability and hard mask. logits points at `width` consecutive logits.
GateSample sample_gate_layer(const double* logits, std::size_t width, double tau, Rng& rng);

} // namespace tabgns
