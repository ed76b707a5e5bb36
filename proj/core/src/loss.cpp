#include "tabgns/loss.hpp"

#include <cmath>

#include "tabgns/errors.hpp"

namespace tabgns {

namespace {

std::size_t checked_class_index(double raw, std::size_t n_classes, std::size_t row) {
    const double rounded = std::nearbyint(raw);
    if (!(rounded >= 0.0) || rounded >= static_cast<double>(n_classes) || rounded != raw) {
        throw DataError("invalid class index " + std::to_string(raw) + " at row " +
                        std::to_string(row) + " (classes: " + std::to_string(n_classes) + ")");
    }
    return static_cast<std::size_t>(rounded);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    require_shape(b, a.rows(), a.cols(), what);
}

} // namespace

Task task_from_string(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "classification") return Task::classification;
    throw ConfigError("unknown task '" + s + "' (expected 'regression' or 'classification')");
}

std::string to_string(Task t) { return t == Task::regression ? "regression" : "classification"; }

double mse_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse_loss");
    const auto& p = pred.values();
    const auto& t = target.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        acc += d * d;
    }
    return acc / static_cast<double>(p.size());
}

Matrix mse_loss_grad(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse_loss_grad");
    Matrix g(pred.rows(), pred.cols());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        g.values()[i] = scale * (pred.values()[i] - target.values()[i]);
    }
    return g;
}

double cross_entropy_loss(const Matrix& logits, const Matrix& class_targets) {
    require_shape(class_targets, logits.rows(), 1, "cross_entropy_loss targets");
    double acc = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double* z = logits.row(r);
        const std::size_t cls = checked_class_index(class_targets(r, 0), logits.cols(), r);
        double zmax = z[0];
        for (std::size_t c = 1; c < logits.cols(); ++c) zmax = std::max(zmax, z[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(z[c] - zmax);
        acc += std::log(sum) - (z[cls] - zmax);
    }
    return acc / static_cast<double>(logits.rows());
}

Matrix cross_entropy_loss_grad(const Matrix& logits, const Matrix& class_targets) {
    require_shape(class_targets, logits.rows(), 1, "cross_entropy_loss_grad targets");
    Matrix g(logits.rows(), logits.cols());
    const double inv_batch = 1.0 / static_cast<double>(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double* z = logits.row(r);
        const std::size_t cls = checked_class_index(class_targets(r, 0), logits.cols(), r);
        double zmax = z[0];
        for (std::size_t c = 1; c < logits.cols(); ++c) zmax = std::max(zmax, z[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(z[c] - zmax);
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            const double softmax = std::exp(z[c] - zmax) / sum;
            g(r, c) = (softmax - (c == cls ? 1.0 : 0.0)) * inv_batch;
        }
    }
    return g;
}

double accuracy(const Matrix& logits, const Matrix& class_targets) {
    require_shape(class_targets, logits.rows(), 1, "accuracy targets");
    if (logits.rows() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double* z = logits.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            if (z[c] > z[best]) best = c;
        }
        const std::size_t cls = checked_class_index(class_targets(r, 0), logits.cols(), r);
        if (best == cls) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

double task_loss(const Matrix& pred, const Matrix& target, Task task) {
    return task == Task::regression ? mse_loss(pred, target) : cross_entropy_loss(pred, target);
}

Matrix task_loss_grad(const Matrix& pred, const Matrix& target, Task task) {
    return task == Task::regression ? mse_loss_grad(pred, target)
                                    : cross_entropy_loss_grad(pred, target);
}

} // namespace tabgns
