#include "tabgns/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tabgns/errors.hpp"
#include "tabgns/matrix.hpp"

namespace tabgns {

double finite_difference_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                               std::vector<double> params,
                               const std::vector<double>& analytic_grads, double epsilon) {
    if (epsilon <= 0.0) throw ConfigError("finite_difference_check: epsilon must be positive");
    require_size(analytic_grads.size(), params.size(), "finite_difference_check gradients");

    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + epsilon;
        const double up = loss_fn(params);
        params[i] = saved - epsilon;
        const double down = loss_fn(params);
        params[i] = saved;

        const double numeric = (up - down) / (2.0 * epsilon);
        const double analytic = analytic_grads[i];
        const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
    return worst;
}

} // namespace tabgns
