#include "tabgns/optim.hpp"

#include <cmath>

#include "tabgns/errors.hpp"
#include "tabgns/matrix.hpp"

namespace tabgns {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void check_step_inputs(const std::vector<double>& params, const std::vector<double>& grads,
                       const OptimizerState& state, const std::string& block) {
    require_size(grads.size(), params.size(), "optimizer gradient block '" + block + "'");
    require_size(state.m.size(), params.size(), "optimizer state block '" + block + "'");
    if (state.learning_rate <= 0.0) {
        throw ConfigError("optimizer learning rate must be positive");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("non-finite gradient in block '" + block + "' at index " +
                               std::to_string(i));
        }
    }
}
} // namespace

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "adaptive" || s == "adam") return OptimizerKind::adam;
    if (s == "plain-sgd" || s == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + s + "' (expected 'adaptive' or 'plain-sgd')");
}

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adaptive" : "plain-sgd";
}

OptimizerState make_optimizer_state(std::size_t size, double learning_rate) {
    OptimizerState s;
    s.m.assign(size, 0.0);
    s.v.assign(size, 0.0);
    s.step = 0;
    s.learning_rate = learning_rate;
    return s;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               OptimizerState& state, const std::string& block) {
    check_step_inputs(params, grads, state, block);
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double m_corr = 1.0 - std::pow(kBeta1, t);
    const double v_corr = 1.0 - std::pow(kBeta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grads[i];
        state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / m_corr;
        const double v_hat = state.v[i] / v_corr;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
    }
}

void sgd_step(std::vector<double>& params, const std::vector<double>& grads,
              OptimizerState& state, const std::string& block) {
    check_step_inputs(params, grads, state, block);
    state.step += 1;
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= state.learning_rate * grads[i];
    }
}

void optimizer_step(OptimizerKind kind, std::vector<double>& params,
                    const std::vector<double>& grads, OptimizerState& state,
                    const std::string& block) {
    if (kind == OptimizerKind::adam) {
        adam_step(params, grads, state, block);
    } else {
        sgd_step(params, grads, state, block);
    }
}

double clip_global_norm(const std::vector<std::vector<double>*>& grads, double max_norm) {
    if (max_norm <= 0.0) return 1.0;
    double sq = 0.0;
    for (const auto* g : grads)
        for (double x : *g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return 1.0;
    const double factor = max_norm / norm;
    for (auto* g : grads)
        for (double& x : *g) x *= factor;
    return factor;
}

} // namespace tabgns
