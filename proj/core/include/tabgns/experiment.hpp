#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tabgns/search.hpp"

namespace tabgns {

/// Where a run's data comes from: a CSV on disk, or (when csv is empty)
/// the synthetic teacher-student generator.
struct DataConfig {
    std::string csv;
    std::vector<std::string> targets;
    std::vector<std::string> categoricals;
    bool impute_mean = false;
    Task task = Task::regression;
    // synthetic generator knobs
    std::size_t input_dim = 10;
    std::vector<std::size_t> teacher_widths{8, 8};
    std::size_t rows = 20000;
    double noise_std = 0.1;
    std::size_t output_dim = 1;
    // split control; seed defaults to the run seed unless set explicitly
    std::array<double, 3> fractions{0.7, 0.15, 0.15};
    std::uint64_t seed = 0;
    bool seed_set = false;

    bool operator==(const DataConfig&) const = default;
};

struct ExperimentConfig {
    std::string method = "tabgns"; // tabgns | large-mlp | random-search
    std::string out;
    std::string checkpoint; // evaluate input
    std::size_t trials = 10;
    DataConfig data;
    SearchSpace space; // input/output dims 0 = derive from the data
    SearchConfig search;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parse a JSON config document onto the defaults. Unknown keys raise
/// ConfigError naming the key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Applies one --section.key=value override (file wins over defaults,
/// flags win over the file). Values are JSON literals where that parses,
/// otherwise plain strings; list fields also take comma-separated strings.
void apply_override(ExperimentConfig& config, const std::string& dotted_key,
                    const std::string& raw_value);

/// The resolved-config echo: every field, defaults filled, stable key
/// order; the data seed is omitted while it still follows the run seed.
/// parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

struct PreparedData {
    TabularDataset dataset;
    Splits splits;
    std::string hash; // content hash of the full dataset before splitting
};

/// Build the dataset named by the config (CSV or synthetic), split and
/// normalize it, and resolve derived fields (data seed, space dims/task)
/// in place.
PreparedData prepare_data(ExperimentConfig& config);

// Commands. Each runs the full pipeline, writes its artifacts under
// config.out and returns 0; failures are reported by throwing the error
// classes in errors.hpp, which the CLI maps to exit codes.
int cmd_search(ExperimentConfig config);
int cmd_baseline(ExperimentConfig config);
int cmd_evaluate(ExperimentConfig config);
int cmd_report(const ExperimentConfig& config, const std::vector<std::string>& run_dirs);

/// Stable exit-code mapping: ConfigError 2, DataError/ShapeError 3,
/// NumericError 4, IntegrityError 5, SchemaError 6, anything else 1.
int exit_code_for(const std::exception& e);

/// True when the single-threaded determinism path is active (thread cap
/// <= 1). Volatile wall-clock fields in report.json and history.csv are
/// then serialized as 0 so reruns are byte-identical; measured times always
/// land in timing.json.
bool determinism_path();

} // namespace tabgns
