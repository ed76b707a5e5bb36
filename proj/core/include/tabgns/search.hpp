#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tabgns/data.hpp"
#include "tabgns/optim.hpp"
#include "tabgns/supernet.hpp"

namespace tabgns {

struct SearchConfig {
    double lr_weights = 0.001;
    double lr_gates = 0.05;
    double tau = 1.0;
    double gate_init = kDefaultGateInit;
    std::size_t max_epochs = 300;
    std::size_t patience = 20;
    std::size_t batch_size = 256;
    std::size_t finetune_epochs = 20;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double grad_clip = 0.0;        // global-norm divergence guard; 0 disables
    bool noise_per_sample = false; // redraw gate noise per row, not per batch

    bool operator==(const SearchConfig&) const = default;
};

void validate(const SearchConfig& config);

/// One history row. Size fields are sampled at epoch entry, so row 0 shows
/// the initialization exactly; valid_loss is the epoch-end loss under the
/// deterministic gate mask (the early-stopping signal), train_loss the
/// row-weighted mean of the stochastic batch losses.
struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double expected_size = 0.0; // sum of sigmoid(logit) over all gates
    std::size_t open_count = 0; // gates with logit >= 0
    double wall_seconds = 0.0;
};

struct EvalMetrics {
    double loss = 0.0;     // MSE in original target units / cross-entropy
    double accuracy = 0.0; // classification only
    std::uint64_t params_paper = 0;
    std::uint64_t params_full = 0;
    double inference_seconds_per_1k = 0.0;
};

enum class StepKind { weights, gates };

/// Called after every optimizer step with (kind, epoch, batch, net). Lets
/// tests pin the freeze contract: a weight step leaves every gate logit
/// bit-identical, a gate step leaves every weight bit-identical.
using StepObserver = std::function<void(StepKind, std::size_t, std::size_t, const SuperNet&)>;

struct SearchResult {
    SuperNet net;              // best-validation-epoch snapshot
    Architecture architecture; // extracted from that snapshot
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_valid_loss = 0.0;
    EvalMetrics test_metrics; // extracted architecture before fine-tuning
    std::uint64_t seed = 0;
    std::size_t clip_events = 0;
    double wall_seconds = 0.0;
};

/// Alternating bilevel loop: per paired batch, one weight step on a train
/// batch (gates frozen) then one gate step on a validation batch (weights
/// frozen); validation batches cycle when there are fewer. Early stopping
/// on the deterministic validation loss with the configured patience; the
/// best-epoch snapshot is restored before extraction. Throws NumericError
/// naming epoch and batch if the loss or a gradient goes non-finite.
SearchResult search(const Splits& splits, const SearchSpace& space, const SearchConfig& config,
                    const StepObserver& observer = {});

struct TrainedModel {
    Architecture architecture;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_valid_loss = 0.0;
    EvalMetrics test_metrics;
    std::uint64_t seed = 0;
    std::size_t clip_events = 0;
    double wall_seconds = 0.0;
};

/// Warm-start training of an extracted architecture for finetune_epochs
/// (0 = no-op) under the usual early-stopping protocol. The entry weights
/// count as a snapshot candidate, so the result is never worse on
/// validation than the input.
TrainedModel finetune(const Architecture& arch, const Splits& splits, const SearchConfig& config);

/// Plain MLP training at fixed hidden widths for max_epochs; the Large-MLP
/// baseline is train_fixed with widths = max_width x hidden_layers.
TrainedModel train_fixed(const std::vector<std::size_t>& widths, const Splits& splits,
                         const SearchConfig& config);

struct RandomSearchResult {
    TrainedModel best; // best-by-validation candidate, fully retrained
    std::vector<std::vector<std::size_t>> sampled;
    std::vector<double> trial_valid_losses;
    std::size_t best_trial = 0;
    double wall_seconds = 0.0;
};

/// Samples `trials` width tuples uniformly from {1..max_width}^L, trains
/// each on a max_epochs/10 budget with seed = config.seed + trial index,
/// then fully retrains the best validation candidate.
RandomSearchResult random_search_baseline(const SearchSpace& space, const Splits& splits,
                                          const SearchConfig& config, std::size_t trials);

/// Metrics on a test split. Regression losses are reported in original
/// target units when the normalization that standardized them is passed.
EvalMetrics evaluate(const Architecture& arch, const TabularDataset& test,
                     const Normalization* norm = nullptr);

/// Same metrics for the SuperNet under its deterministic mask; parameter
/// counts refer to the architecture extraction would produce.
EvalMetrics evaluate(const SuperNet& net, const TabularDataset& test,
                     const Normalization* norm = nullptr);

/// Every RNG stream a run consumes, derived from the config seed; recorded
/// in run reports so reruns can be audited.
struct DerivedSeeds {
    std::uint64_t supernet_init = 0;
    std::uint64_t train_shuffle = 0;
    std::uint64_t valid_shuffle = 0;
    std::uint64_t gate_noise = 0;
    std::uint64_t fixed_init = 0;
    std::uint64_t fixed_shuffle = 0;
    std::uint64_t finetune_shuffle = 0;
};

DerivedSeeds derived_seeds(std::uint64_t seed);

} // namespace tabgns
