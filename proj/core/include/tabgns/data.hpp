#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabgns/loss.hpp"
#include "tabgns/matrix.hpp"

namespace tabgns {

/// Round-trip exact text rendering of a double (%.17g). Shared by the CSV
/// writers and the run artifacts.
std::string format_double(double v);

/// One-hot provenance for a categorical column: encoded value order is
/// first appearance in the file, so encodings are stable across runs.
struct CategoryMap {
    std::string column;
    std::vector<std::string> values;

    bool operator==(const CategoryMap&) const = default;
};

/// Provenance of a synthetic teacher-student dataset; tests use it to know
/// the minimal sufficient architecture.
struct TeacherSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> widths;
    std::size_t output_dim = 1;
    double noise_std = 0.0;
    std::uint64_t seed = 0;

    bool operator==(const TeacherSpec&) const = default;
};

struct TabularDataset {
    Matrix features;  // rows x features
    Matrix targets;   // regression: rows x outputs; classification: rows x 1 class indices
    Task task = Task::regression;
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;
    std::size_t n_classes = 0; // classification only
    std::vector<std::string> class_labels;
    std::vector<CategoryMap> categories;
    std::optional<TeacherSpec> teacher;

    std::size_t rows() const { return features.rows(); }
    std::size_t n_features() const { return features.cols(); }
    std::size_t n_outputs() const {
        return task == Task::classification ? n_classes : targets.cols();
    }

    bool operator==(const TabularDataset&) const = default;
};

/// Throws DataError/ShapeError when shapes disagree, targets are non-finite
/// or class indices fall outside [0, n_classes).
void validate(const TabularDataset& d);

struct CsvOptions {
    std::vector<std::string> target_columns;      // names, or digit-strings as indices
    Task task = Task::regression;
    std::vector<std::string> categorical_columns; // one-hot encoded features
    bool impute_mean = false;                     // else missing cells fail fast
};

/// Header row required; comma delimiter, optional double quotes. Missing
/// cells ("", "nan", "na", case-insensitive) raise DataError naming row and
/// column unless impute_mean, which fills with the column mean. Categorical
/// feature columns expand to indicator columns named col=value.
/// Classification targets may be strings (labelled by first appearance) or
/// non-negative integers (used verbatim).
TabularDataset load_csv(const std::string& path, const CsvOptions& opts);

/// Inverse of load_csv for numeric data: header then rows, features first,
/// then target columns. Doubles print round-trip exact.
void save_csv(const TabularDataset& d, const std::string& path);

/// X ~ N(0,1), y = teacher(X) + noise_std * N(0,1) with a frozen
/// He-uniform teacher MLP (ReLU hidden, linear output). Everything derives
/// from `seed`; the teacher spec rides along in the result.
TabularDataset make_teacher_student(std::size_t input_dim,
                                    const std::vector<std::size_t>& teacher_widths,
                                    std::size_t n_rows, double noise_std, std::uint64_t seed,
                                    std::size_t output_dim = 1);

/// Per-feature z-score statistics from the train split. A standard
/// deviation below 1e-12 marks a constant column: centered, not divided.
struct Normalization {
    std::vector<double> feature_mean, feature_std;
    std::vector<double> target_mean, target_std; // regression targets only
    bool target_standardized = false;

    bool operator==(const Normalization&) const = default;
};

struct Splits {
    TabularDataset train, valid, test;
    std::array<double, 3> fractions{0.7, 0.15, 0.15};
    std::uint64_t split_seed = 0;
    bool normalized = false;
    Normalization norm;
};

/// Uniform random permutation from `seed`, then contiguous slices; the
/// train split absorbs the rounding remainder. Throws DataError when any
/// split would be empty, ConfigError on bad fractions.
Splits split(const TabularDataset& d, const std::array<double, 3>& fractions,
             std::uint64_t seed);

/// Z-scores features (and regression targets) of every split with
/// train-split statistics. Population standard deviation (divide by n).
Splits normalize(Splits s);

/// Maps standardized targets back to original units for metric reporting.
Matrix destandardize_targets(const Matrix& targets, const Normalization& norm);

/// Row order for one epoch: Fisher-Yates permutation seeded by
/// (shuffle_seed, epoch_index), chopped into batches; the final short batch
/// is kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n_rows, std::size_t batch_size,
                                                    std::uint64_t shuffle_seed,
                                                    std::uint64_t epoch_index);

struct Batch {
    Matrix X;
    Matrix y;
};

Batch gather(const TabularDataset& d, const std::vector<std::size_t>& rows);

std::vector<Batch> batches(const TabularDataset& d, std::size_t batch_size,
                           std::uint64_t shuffle_seed, std::uint64_t epoch_index);

} // namespace tabgns
