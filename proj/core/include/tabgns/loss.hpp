#pragma once

#include <string>

#include "tabgns/matrix.hpp"

namespace tabgns {

enum class Task { regression, classification };

Task task_from_string(const std::string& s);
std::string to_string(Task t);

/// Mean squared error over every prediction entry (batch x outputs).
double mse_loss(const Matrix& pred, const Matrix& target);
Matrix mse_loss_grad(const Matrix& pred, const Matrix& target);

/// Mean softmax cross-entropy; targets hold one class index per row.
/// Throws DataError on an out-of-range class index.
double cross_entropy_loss(const Matrix& logits, const Matrix& class_targets);
Matrix cross_entropy_loss_grad(const Matrix& logits, const Matrix& class_targets);

/// Fraction of rows whose argmax logit equals the target class.
double accuracy(const Matrix& logits, const Matrix& class_targets);

/// Dispatch on the task; classification targets are class indices.
double task_loss(const Matrix& pred, const Matrix& target, Task task);
Matrix task_loss_grad(const Matrix& pred, const Matrix& target, Task task);

} // namespace tabgns
