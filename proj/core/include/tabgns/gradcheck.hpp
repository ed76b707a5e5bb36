#pragma once

#include <functional>
#include <vector>

namespace tabgns {

/// Central finite-difference gradient oracle.
///
/// Evaluates loss_fn at params +/- epsilon along every coordinate and
/// returns max_i |analytic[i] - numeric[i]| / max(1, |analytic[i]|, |numeric[i]|).
/// loss_fn must be deterministic; callers freeze any stochastic gate noise
/// before handing it in. Throws ConfigError when epsilon <= 0.
double finite_difference_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                               std::vector<double> params,
                               const std::vector<double>& analytic_grads, double epsilon);

} // namespace tabgns
