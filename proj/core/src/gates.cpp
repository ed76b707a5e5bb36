#include "tabgns/gates.hpp"

#include <cmath>

#include "tabgns/errors.hpp"

namespace tabgns {

namespace {
constexpr double kProbFloor = 1e-12;
constexpr double kProbCeil = 1.0 - 1e-12;
} // namespace

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

GateBank make_gate_bank(std::size_t hidden_layers, std::size_t width, double gate_init,
                        double tau) {
    if (tau <= 0.0) throw ConfigError("gate temperature must be positive");
    GateBank bank;
    bank.hidden_layers = hidden_layers;
    bank.width = width;
    bank.tau = tau;
    bank.logits.assign(hidden_layers * width, gate_init);
    return bank;
}

std::vector<double> sample_gumbel(Rng& rng, std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = rng.gumbel();
    return out;
}

double gate_soft_prob(double g, double o1, double o2, double tau) {
    if (tau <= 0.0) throw ConfigError("gate temperature must be positive");
    const double p = sigmoid((g + o1 - o2) / tau);
    if (p < kProbFloor) return kProbFloor;
    if (p > kProbCeil) return kProbCeil;
    return p;
}

double gate_hard(double p) { return p >= 0.5 ? 1.0 : 0.0; }

double gate_backward(double d_z, double p, double tau) { return d_z * p * (1.0 - p) / tau; }

double deterministic_open_prob(double g) { return sigmoid(g); }

GateSample sample_gate_layer(const double* logits, std::size_t width, double tau, Rng& rng) {
    GateSample s;
    s.noise_on.resize(width);
    s.noise_off.resize(width);
    s.soft.resize(width);
    s.hard.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
        s.noise_on[j] = rng.gumbel();
        s.noise_off[j] = rng.gumbel();
        s.soft[j] = gate_soft_prob(logits[j], s.noise_on[j], s.noise_off[j], tau);
        s.hard[j] = gate_hard(s.soft[j]);
    }
    return s;
}

} // namespace tabgns
