#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tabgns {

enum class OptimizerKind { adam, sgd };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

/// Moment accumulators for one parameter block. Shapes always match the
/// block; the step counter increases by exactly 1 per applied step.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double learning_rate = 0.0;
};

OptimizerState make_optimizer_state(std::size_t size, double learning_rate);

/// Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8.
/// Throws NumericError naming `block` on a non-finite gradient entry.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               OptimizerState& state, const std::string& block = "params");

/// Plain gradient descent sharing the same state/step bookkeeping.
void sgd_step(std::vector<double>& params, const std::vector<double>& grads,
              OptimizerState& state, const std::string& block = "params");

void optimizer_step(OptimizerKind kind, std::vector<double>& params,
                    const std::vector<double>& grads, OptimizerState& state,
                    const std::string& block = "params");

/// Scales every gradient in place so the joint L2 norm is at most max_norm.
/// Returns the applied factor (1.0 when no clipping happened or
/// max_norm <= 0, which disables the guard).
double clip_global_norm(const std::vector<std::vector<double>*>& grads, double max_norm);

} // namespace tabgns
