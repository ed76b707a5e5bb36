#include "tabgns/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "tabgns/errors.hpp"

namespace tabgns {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Stream tags for Rng::derive; one per independent random consumer.
enum Stream : std::uint64_t {
    kSupernetInit = 1,
    kTrainShuffle = 2,
    kValidShuffle = 3,
    kGateNoise = 4,
    kFixedInit = 5,
    kFixedShuffle = 6,
    kFinetuneShuffle = 7,
    kTrialWidths = 8,
};

void check_splits(const Splits& splits, std::size_t input_dim, std::size_t output_dim,
                  Task task) {
    if (splits.train.rows() == 0 || splits.valid.rows() == 0) {
        throw DataError("search needs non-empty train and validation splits");
    }
    if (splits.train.task != task) {
        throw ConfigError("space task is " + to_string(task) + " but the dataset is " +
                          to_string(splits.train.task));
    }
    require_size(splits.train.n_features(), input_dim, "train features vs input_dim");
    require_size(splits.valid.n_features(), input_dim, "valid features vs input_dim");
    if (splits.test.rows() > 0) {
        require_size(splits.test.n_features(), input_dim, "test features vs input_dim");
    }
    require_size(splits.train.n_outputs(), output_dim, "train outputs vs output_dim");
}

double checked_loss(const Matrix& pred, const Matrix& targets, Task task, const char* phase,
                    std::size_t epoch, std::size_t batch) {
    const double loss = task_loss(pred, targets, task);
    if (!std::isfinite(loss)) {
        throw NumericError(std::string(phase) + " loss diverged (non-finite) at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch));
    }
    return loss;
}

std::size_t apply_clip(const std::vector<std::vector<double>*>& grads, double max_norm) {
    return clip_global_norm(grads, max_norm) < 1.0 ? 1 : 0;
}

struct LayerOpt {
    OptimizerState weight;
    OptimizerState bias;
};

std::vector<LayerOpt> make_layer_opts(const std::vector<DenseLayer>& layers, double lr) {
    std::vector<LayerOpt> opts;
    opts.reserve(layers.size());
    for (const DenseLayer& l : layers) {
        opts.push_back({make_optimizer_state(l.weight.size(), lr),
                        make_optimizer_state(l.bias.size(), lr)});
    }
    return opts;
}

std::string block_name(const char* what, std::size_t layer) {
    return "layer " + std::to_string(layer) + " " + what;
}

// Shared fixed-architecture trainer: plain MLP, early stopping, best
// snapshot. The entry weights count as the initial snapshot so warm starts
// can only improve.
struct FixedOutcome {
    std::vector<DenseLayer> layers;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_valid_loss = 0.0;
    std::size_t clip_events = 0;
};

FixedOutcome train_layers(std::vector<DenseLayer> layers, const Splits& splits,
                          const SearchConfig& config, std::size_t epoch_budget,
                          std::uint64_t shuffle_seed) {
    const Task task = splits.train.task;
    if (splits.train.rows() == 0 || splits.valid.rows() == 0) {
        throw DataError("training needs non-empty train and validation splits");
    }

    std::size_t hidden_total = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) hidden_total += layers[l].out_dim();

    FixedOutcome out;
    out.best_valid_loss = checked_loss(mlp_forward(layers, splits.valid.features).predictions,
                                       splits.valid.targets, task, "validation", 0, 0);
    out.layers = layers;

    std::vector<LayerOpt> opts = make_layer_opts(layers, config.lr_weights);
    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < epoch_budget; ++epoch) {
        const auto t0 = Clock::now();
        double loss_sum = 0.0;
        const auto batch_rows =
            batch_indices(splits.train.rows(), config.batch_size, shuffle_seed, epoch);
        for (std::size_t b = 0; b < batch_rows.size(); ++b) {
            try {
                const Batch batch = gather(splits.train, batch_rows[b]);
                const MlpTrace trace = mlp_forward(layers, batch.X);
                loss_sum += checked_loss(trace.predictions, batch.y, task, "train", epoch, b) *
                            static_cast<double>(batch.X.rows());
                MlpGrads grads = mlp_backward(layers, trace, batch.y, task);
                if (config.grad_clip > 0.0) {
                    std::vector<std::vector<double>*> blocks;
                    for (std::size_t l = 0; l < layers.size(); ++l) {
                        blocks.push_back(&grads.d_weight[l].values());
                        blocks.push_back(&grads.d_bias[l]);
                    }
                    out.clip_events += apply_clip(blocks, config.grad_clip);
                }
                for (std::size_t l = 0; l < layers.size(); ++l) {
                    optimizer_step(config.optimizer, layers[l].weight.values(),
                                   grads.d_weight[l].values(), opts[l].weight,
                                   block_name("weights", l));
                    optimizer_step(config.optimizer, layers[l].bias, grads.d_bias[l],
                                   opts[l].bias, block_name("bias", l));
                }
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b) + ": " + e.what());
            }
        }

        const double valid_loss =
            checked_loss(mlp_forward(layers, splits.valid.features).predictions,
                         splits.valid.targets, task, "validation", epoch, 0);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(splits.train.rows());
        rec.valid_loss = valid_loss;
        rec.expected_size = static_cast<double>(hidden_total);
        rec.open_count = hidden_total;
        rec.wall_seconds = seconds_since(t0);
        out.history.push_back(rec);

        if (valid_loss < out.best_valid_loss) {
            out.best_valid_loss = valid_loss;
            out.best_epoch = epoch;
            out.layers = layers;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    return out;
}

Architecture wrap_architecture(std::vector<DenseLayer> layers, std::size_t input_dim,
                               std::size_t output_dim, Task task) {
    Architecture arch;
    arch.space.input_dim = input_dim;
    arch.space.output_dim = output_dim;
    arch.space.hidden_layers = layers.size() - 1;
    arch.space.task = task;
    arch.space.max_width = 1;
    arch.kept.resize(layers.size() - 1);
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        const std::size_t w = layers[l].out_dim();
        arch.space.max_width = std::max(arch.space.max_width, w);
        arch.kept[l].resize(w);
        for (std::size_t j = 0; j < w; ++j) arch.kept[l][j] = static_cast<std::uint32_t>(j);
    }
    arch.layers = std::move(layers);
    return arch;
}

std::size_t data_output_dim(const TabularDataset& d) {
    return d.task == Task::classification ? d.n_classes : d.targets.cols();
}

} // namespace

void validate(const SearchConfig& config) {
    if (config.lr_weights <= 0.0) throw ConfigError("lr_weights must be > 0");
    if (config.lr_gates <= 0.0) throw ConfigError("lr_gates must be > 0");
    if (config.tau <= 0.0) throw ConfigError("tau must be > 0");
    if (!std::isfinite(config.gate_init)) throw ConfigError("gate_init must be finite");
    if (config.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (config.patience < 1) throw ConfigError("patience must be >= 1");
    if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (config.grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0 (0 disables)");
}

DerivedSeeds derived_seeds(std::uint64_t seed) {
    DerivedSeeds d;
    d.supernet_init = Rng::derive(seed, kSupernetInit);
    d.train_shuffle = Rng::derive(seed, kTrainShuffle);
    d.valid_shuffle = Rng::derive(seed, kValidShuffle);
    d.gate_noise = Rng::derive(seed, kGateNoise);
    d.fixed_init = Rng::derive(seed, kFixedInit);
    d.fixed_shuffle = Rng::derive(seed, kFixedShuffle);
    d.finetune_shuffle = Rng::derive(seed, kFinetuneShuffle);
    return d;
}

SearchResult search(const Splits& splits, const SearchSpace& space, const SearchConfig& config,
                    const StepObserver& observer) {
    validate(space);
    validate(config);
    check_splits(splits, space.input_dim, space.output_dim, space.task);
    const auto run_start = Clock::now();
    const Task task = space.task;
    const DerivedSeeds seeds = derived_seeds(config.seed);

    SuperNet net = init_supernet(space, seeds.supernet_init, config.gate_init);
    net.gates.tau = config.tau;
    Rng noise_rng(seeds.gate_noise);

    std::vector<LayerOpt> weight_opts = make_layer_opts(net.layers, config.lr_weights);
    OptimizerState gate_opt = make_optimizer_state(net.gates.logits.size(), config.lr_gates);

    SearchResult result;
    result.seed = config.seed;
    result.best_valid_loss = std::numeric_limits<double>::infinity();
    SuperNet best = net;

    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto t0 = Clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.expected_size = expected_size(net);
        rec.open_count = open_count(net);

        const auto train_rows =
            batch_indices(splits.train.rows(), config.batch_size, seeds.train_shuffle, epoch);
        const auto valid_rows =
            batch_indices(splits.valid.rows(), config.batch_size, seeds.valid_shuffle, epoch);

        double loss_sum = 0.0;
        for (std::size_t b = 0; b < train_rows.size(); ++b) {
            try {
                // Step 1: weights on the train batch, gates untouched. The
                // frozen gates let the forward skip the columns its sampled
                // mask closes.
                const Batch tb = gather(splits.train, train_rows[b]);
                ForwardTrace trace =
                    forward_weights_only(net, tb.X, noise_rng, config.noise_per_sample);
                loss_sum += checked_loss(trace.predictions, tb.y, task, "train", epoch, b) *
                            static_cast<double>(tb.X.rows());
                SuperNetGrads wg = backward(net, trace, tb.y, GradTarget::weights);
                if (config.grad_clip > 0.0) {
                    std::vector<std::vector<double>*> blocks;
                    for (std::size_t l = 0; l < net.layers.size(); ++l) {
                        blocks.push_back(&wg.d_weight[l].values());
                        blocks.push_back(&wg.d_bias[l]);
                    }
                    result.clip_events += apply_clip(blocks, config.grad_clip);
                }
                for (std::size_t l = 0; l < net.layers.size(); ++l) {
                    optimizer_step(config.optimizer, net.layers[l].weight.values(),
                                   wg.d_weight[l].values(), weight_opts[l].weight,
                                   block_name("weights", l));
                    optimizer_step(config.optimizer, net.layers[l].bias, wg.d_bias[l],
                                   weight_opts[l].bias, block_name("bias", l));
                }
                if (observer) observer(StepKind::weights, epoch, b, net);

                // Step 2: gates on the paired validation batch, weights
                // untouched. Validation batches cycle when fewer.
                const Batch vb = gather(splits.valid, valid_rows[b % valid_rows.size()]);
                ForwardTrace vtrace = forward(net, vb.X, ForwardMode::stochastic, &noise_rng,
                                              config.noise_per_sample);
                checked_loss(vtrace.predictions, vb.y, task, "gate-step validation", epoch, b);
                SuperNetGrads gg = backward(net, vtrace, vb.y, GradTarget::gates);
                if (config.grad_clip > 0.0) {
                    result.clip_events += apply_clip({&gg.d_logits}, config.grad_clip);
                }
                optimizer_step(config.optimizer, net.gates.logits, gg.d_logits, gate_opt,
                               "gate logits");
                if (observer) observer(StepKind::gates, epoch, b, net);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b) + ": " + e.what());
            }
        }

        // Stopping signal: the loss of the architecture extraction would
        // produce right now (deterministic mask), not the noisy batch loss.
        const Matrix det = predict_deterministic(net, splits.valid.features);
        const double valid_loss =
            checked_loss(det, splits.valid.targets, task, "validation", epoch, 0);

        rec.train_loss = loss_sum / static_cast<double>(splits.train.rows());
        rec.valid_loss = valid_loss;
        rec.wall_seconds = seconds_since(t0);
        result.history.push_back(rec);

        if (valid_loss < result.best_valid_loss) {
            result.best_valid_loss = valid_loss;
            result.best_epoch = epoch;
            best = net;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }

    result.net = std::move(best);
    result.architecture = extract_architecture(result.net);
    result.test_metrics = evaluate(result.architecture, splits.test,
                                   splits.normalized ? &splits.norm : nullptr);
    result.wall_seconds = seconds_since(run_start);
    return result;
}

TrainedModel finetune(const Architecture& arch, const Splits& splits,
                      const SearchConfig& config) {
    validate(config);
    const auto t0 = Clock::now();
    FixedOutcome out = train_layers(arch.layers, splits, config, config.finetune_epochs,
                                    derived_seeds(config.seed).finetune_shuffle);

    TrainedModel model;
    model.architecture = arch;
    model.architecture.layers = std::move(out.layers);
    model.history = std::move(out.history);
    model.best_epoch = out.best_epoch;
    model.best_valid_loss = out.best_valid_loss;
    model.clip_events = out.clip_events;
    model.seed = config.seed;
    model.test_metrics = evaluate(model.architecture, splits.test,
                                  splits.normalized ? &splits.norm : nullptr);
    model.wall_seconds = seconds_since(t0);
    return model;
}

TrainedModel train_fixed(const std::vector<std::size_t>& widths, const Splits& splits,
                         const SearchConfig& config) {
    validate(config);
    if (widths.empty()) throw ConfigError("train_fixed needs at least one hidden width");
    for (std::size_t w : widths) {
        if (w == 0) throw ConfigError("hidden widths must be >= 1");
    }
    const auto t0 = Clock::now();
    const DerivedSeeds seeds = derived_seeds(config.seed);
    const std::size_t input_dim = splits.train.n_features();
    const std::size_t output_dim = data_output_dim(splits.train);

    Rng init_rng(seeds.fixed_init);
    std::vector<DenseLayer> layers = make_mlp(input_dim, widths, output_dim, init_rng);
    FixedOutcome out =
        train_layers(std::move(layers), splits, config, config.max_epochs, seeds.fixed_shuffle);

    TrainedModel model;
    model.architecture =
        wrap_architecture(std::move(out.layers), input_dim, output_dim, splits.train.task);
    model.history = std::move(out.history);
    model.best_epoch = out.best_epoch;
    model.best_valid_loss = out.best_valid_loss;
    model.clip_events = out.clip_events;
    model.seed = config.seed;
    model.test_metrics = evaluate(model.architecture, splits.test,
                                  splits.normalized ? &splits.norm : nullptr);
    model.wall_seconds = seconds_since(t0);
    return model;
}

RandomSearchResult random_search_baseline(const SearchSpace& space, const Splits& splits,
                                          const SearchConfig& config, std::size_t trials) {
    validate(space);
    validate(config);
    if (trials < 1) throw ConfigError("random search needs trials >= 1");
    const auto t0 = Clock::now();

    RandomSearchResult result;
    double best_loss = std::numeric_limits<double>::infinity();
    SearchConfig trial_config = config;
    trial_config.max_epochs = std::max<std::size_t>(1, config.max_epochs / 10);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = config.seed + t;
        Rng width_rng(Rng::derive(trial_seed, kTrialWidths));
        std::vector<std::size_t> widths(space.hidden_layers);
        for (std::size_t& w : widths) {
            w = 1 + static_cast<std::size_t>(width_rng.below(space.max_width));
        }
        trial_config.seed = trial_seed;
        TrainedModel trial = train_fixed(widths, splits, trial_config);
        result.sampled.push_back(widths);
        result.trial_valid_losses.push_back(trial.best_valid_loss);
        if (trial.best_valid_loss < best_loss) {
            best_loss = trial.best_valid_loss;
            result.best_trial = t;
        }
    }

    SearchConfig full_config = config;
    full_config.seed = config.seed + result.best_trial;
    result.best = train_fixed(result.sampled[result.best_trial], splits, full_config);
    result.wall_seconds = seconds_since(t0);
    return result;
}

namespace {

EvalMetrics metrics_for(const Matrix& predictions, const TabularDataset& test,
                        const Normalization* norm, std::uint64_t params_paper,
                        std::uint64_t params_full, double predict_seconds) {
    EvalMetrics m;
    m.params_paper = params_paper;
    m.params_full = params_full;
    if (test.task == Task::classification) {
        m.loss = cross_entropy_loss(predictions, test.targets);
        m.accuracy = accuracy(predictions, test.targets);
    } else if (norm != nullptr && norm->target_standardized) {
        m.loss = mse_loss(destandardize_targets(predictions, *norm),
                          destandardize_targets(test.targets, *norm));
    } else {
        m.loss = mse_loss(predictions, test.targets);
    }
    m.inference_seconds_per_1k = predict_seconds * 1000.0 / static_cast<double>(test.rows());
    return m;
}

} // namespace

EvalMetrics evaluate(const Architecture& arch, const TabularDataset& test,
                     const Normalization* norm) {
    if (test.rows() == 0) throw DataError("evaluate: empty test split");
    const auto t0 = Clock::now();
    const Matrix predictions = predict(arch, test.features);
    const double secs = seconds_since(t0);
    return metrics_for(predictions, test, norm, count_parameters(arch, ParamConvention::paper),
                       count_parameters(arch, ParamConvention::full), secs);
}

EvalMetrics evaluate(const SuperNet& net, const TabularDataset& test, const Normalization* norm) {
    if (test.rows() == 0) throw DataError("evaluate: empty test split");
    const auto t0 = Clock::now();
    const Matrix predictions = predict_deterministic(net, test.features);
    const double secs = seconds_since(t0);

    std::vector<std::size_t> widths;
    widths.push_back(net.space.input_dim);
    for (const auto& k : deterministic_kept(net.gates)) widths.push_back(k.size());
    widths.push_back(net.space.output_dim);
    return metrics_for(predictions, test, norm,
                       count_parameters(widths, ParamConvention::paper),
                       count_parameters(widths, ParamConvention::full), secs);
}

} // namespace tabgns
