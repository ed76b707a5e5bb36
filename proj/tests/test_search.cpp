#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "tabgns/errors.hpp"
#include "tabgns/search.hpp"

using namespace tabgns;

namespace {

// Small teacher-student problem shared by the search tests: quick to train
// but real enough that losses move.
const Splits& fixture_splits() {
    static const Splits s = normalize(
        split(make_teacher_student(4, {4}, 600, 0.05, 3), {0.7, 0.15, 0.15}, 3));
    return s;
}

SearchSpace fixture_space(std::size_t layers = 2, std::size_t width = 8) {
    SearchSpace space;
    space.input_dim = 4;
    space.output_dim = 1;
    space.hidden_layers = layers;
    space.max_width = width;
    space.task = Task::regression;
    return space;
}

SearchConfig fixture_config() {
    SearchConfig c;
    c.max_epochs = 6;
    c.patience = 10;
    c.batch_size = 64;
    c.finetune_epochs = 4;
    c.seed = 5;
    return c;
}

bool same_history(const std::vector<EpochRecord>& a, const std::vector<EpochRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].epoch != b[i].epoch || a[i].train_loss != b[i].train_loss ||
            a[i].valid_loss != b[i].valid_loss || a[i].expected_size != b[i].expected_size ||
            a[i].open_count != b[i].open_count) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("search config validation rejects unusable values") {
    SearchConfig c;
    CHECK_NOTHROW(validate(c)); // defaults are valid
    c.lr_weights = 0.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = SearchConfig{};
    c.tau = -1.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = SearchConfig{};
    c.max_epochs = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = SearchConfig{};
    c.patience = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = SearchConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = SearchConfig{};
    c.grad_clip = -0.5;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("derived seeds are distinct deterministic functions of the run seed") {
    const DerivedSeeds a = derived_seeds(7);
    const DerivedSeeds b = derived_seeds(7);
    CHECK(a.supernet_init == b.supernet_init);
    CHECK(a.gate_noise == b.gate_noise);
    const std::vector<std::uint64_t> all{a.supernet_init, a.train_shuffle, a.valid_shuffle,
                                         a.gate_noise,    a.fixed_init,    a.fixed_shuffle,
                                         a.finetune_shuffle};
    std::vector<std::uint64_t> uniq = all;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    CHECK(uniq.size() == all.size());
    CHECK(derived_seeds(8).supernet_init != a.supernet_init);
}

TEST_CASE("search produces a well-formed history and extraction") {
    SearchResult r = search(fixture_splits(), fixture_space(), fixture_config());
    REQUIRE(!r.history.empty());
    CHECK(r.history.size() <= 6);
    for (std::size_t e = 0; e < r.history.size(); ++e) CHECK(r.history[e].epoch == e);

    // row 0 sizes reflect the initialization exactly
    CHECK(r.history[0].expected_size ==
          doctest::Approx(16.0 * 0.04742587317756678).epsilon(1e-12));
    CHECK(r.history[0].open_count == 0);

    CHECK(r.best_epoch < r.history.size());
    double best = r.history[0].valid_loss;
    for (const EpochRecord& rec : r.history) best = std::min(best, rec.valid_loss);
    CHECK(r.best_valid_loss == best);

    const auto widths = r.architecture.hidden_widths();
    REQUIRE(widths.size() == 2);
    for (std::size_t w : widths) CHECK(w >= 1);
    CHECK(r.test_metrics.params_paper == count_parameters(r.architecture, ParamConvention::paper));
    CHECK(r.test_metrics.params_full == count_parameters(r.architecture, ParamConvention::full));
    CHECK(r.clip_events == 0); // clipping disabled by default
    CHECK(r.seed == 5);
    CHECK(std::isfinite(r.test_metrics.loss));
}

TEST_CASE("a one-epoch budget leaves exactly one history row") {
    SearchConfig c = fixture_config();
    c.max_epochs = 1;
    SearchResult r = search(fixture_splits(), fixture_space(), c);
    CHECK(r.history.size() == 1);
    CHECK(r.best_epoch == 0);
}

TEST_CASE("search is bit-reproducible for a fixed seed") {
    SearchResult a = search(fixture_splits(), fixture_space(), fixture_config());
    SearchResult b = search(fixture_splits(), fixture_space(), fixture_config());
    CHECK(a.net == b.net);
    CHECK(a.architecture == b.architecture);
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.best_valid_loss == b.best_valid_loss);
    CHECK(same_history(a.history, b.history));
    CHECK(a.test_metrics.loss == b.test_metrics.loss);

    SearchConfig other = fixture_config();
    other.seed = 6;
    SearchResult c = search(fixture_splits(), fixture_space(), other);
    CHECK(a.net != c.net);
}

TEST_CASE("weight steps freeze gates and gate steps freeze weights") {
    const SearchConfig config = fixture_config();
    const SearchSpace space = fixture_space();

    GateBank gates_before = make_gate_bank(space.hidden_layers, space.max_width,
                                           config.gate_init, config.tau);
    std::vector<DenseLayer> weights_after_step;
    bool have_weights = false;
    std::size_t weight_steps = 0, gate_steps = 0, freeze_violations = 0;
    StepKind last = StepKind::gates; // so the first observed step must be weights

    auto observer = [&](StepKind kind, std::size_t, std::size_t, const SuperNet& net) {
        if (kind == StepKind::weights) {
            if (last != StepKind::gates) ++freeze_violations; // strict alternation
            if (!(net.gates == gates_before)) ++freeze_violations;
            weights_after_step = net.layers;
            have_weights = true;
            ++weight_steps;
        } else {
            if (last != StepKind::weights) ++freeze_violations;
            if (!have_weights || !(net.layers == weights_after_step)) ++freeze_violations;
            gates_before = net.gates;
            ++gate_steps;
        }
        last = kind;
    };

    search(fixture_splits(), space, config, observer);
    CHECK(freeze_violations == 0);
    CHECK(weight_steps == gate_steps); // strictly paired
    CHECK(weight_steps > 0);
}

TEST_CASE("finetune warm start never loses validation ground") {
    SearchResult r = search(fixture_splits(), fixture_space(), fixture_config());

    SearchConfig none = fixture_config();
    none.finetune_epochs = 0;
    TrainedModel untouched = finetune(r.architecture, fixture_splits(), none);
    CHECK(untouched.architecture == r.architecture); // a 0-epoch budget is a no-op
    CHECK(untouched.history.empty());

    SearchConfig some = fixture_config();
    some.finetune_epochs = 5;
    TrainedModel tuned = finetune(r.architecture, fixture_splits(), some);
    CHECK(tuned.best_valid_loss <= untouched.best_valid_loss + 1e-9);
    CHECK(tuned.architecture.kept == r.architecture.kept); // widths never change
    CHECK(tuned.history.size() <= 5);

    TrainedModel again = finetune(r.architecture, fixture_splits(), some);
    CHECK(again.architecture == tuned.architecture);
    CHECK(again.best_valid_loss == tuned.best_valid_loss);
}

TEST_CASE("train_fixed trains the requested plain architecture") {
    SearchConfig c = fixture_config();
    c.max_epochs = 10;
    TrainedModel m = train_fixed({5, 3}, fixture_splits(), c);
    CHECK(m.architecture.hidden_widths() == std::vector<std::size_t>{5, 3});
    CHECK(m.history.size() <= 10);
    CHECK(m.best_epoch < m.history.size());
    CHECK(m.test_metrics.params_full ==
          count_parameters(std::vector<std::size_t>{4, 5, 3, 1}, ParamConvention::full));
    CHECK(std::isfinite(m.test_metrics.loss));

    TrainedModel again = train_fixed({5, 3}, fixture_splits(), c);
    CHECK(again.architecture == m.architecture);
    CHECK(same_history(again.history, m.history));

    CHECK_THROWS_AS(train_fixed({}, fixture_splits(), c), ConfigError);
    CHECK_THROWS_AS(train_fixed({0, 3}, fixture_splits(), c), ConfigError);
}

TEST_CASE("train_fixed drives a realizable noiseless fixture below 1e-3 MSE") {
    // the teacher is inside the search family, so near-zero error is attainable
    const Splits clean = normalize(
        split(make_teacher_student(3, {3}, 900, 0.0, 21), {0.7, 0.15, 0.15}, 21));
    SearchConfig c;
    c.max_epochs = 200;
    c.patience = 200;
    c.batch_size = 64;
    c.lr_weights = 0.01;
    c.seed = 2;
    TrainedModel m = train_fixed({16, 16}, clean, c);
    CHECK(m.test_metrics.loss < 1e-3);
}

TEST_CASE("random_search_baseline samples, scores and retrains the best trial") {
    SearchConfig c = fixture_config();
    c.max_epochs = 10;
    RandomSearchResult r = random_search_baseline(fixture_space(), fixture_splits(), c, 3);
    REQUIRE(r.sampled.size() == 3);
    REQUIRE(r.trial_valid_losses.size() == 3);
    for (const auto& widths : r.sampled) {
        REQUIRE(widths.size() == 2);
        for (std::size_t w : widths) {
            CHECK(w >= 1);
            CHECK(w <= 8);
        }
    }
    CHECK(r.best_trial < 3);
    const double best = *std::min_element(r.trial_valid_losses.begin(),
                                          r.trial_valid_losses.end());
    CHECK(r.trial_valid_losses[r.best_trial] == best);
    CHECK(r.best.architecture.hidden_widths() == r.sampled[r.best_trial]);

    RandomSearchResult again = random_search_baseline(fixture_space(), fixture_splits(), c, 3);
    CHECK(again.sampled == r.sampled);
    CHECK(again.trial_valid_losses == r.trial_valid_losses);
    CHECK(again.best.architecture == r.best.architecture);

    CHECK_THROWS_AS(random_search_baseline(fixture_space(), fixture_splits(), c, 0),
                    ConfigError);
}

TEST_CASE("supernet metrics match its extraction's metrics") {
    SearchResult r = search(fixture_splits(), fixture_space(), fixture_config());
    const Splits& s = fixture_splits();
    EvalMetrics via_net = evaluate(r.net, s.test, &s.norm);
    EvalMetrics via_arch = evaluate(r.architecture, s.test, &s.norm);
    CHECK(via_net.loss == via_arch.loss); // same predictions, bit for bit
    CHECK(via_net.params_paper == via_arch.params_paper);
    CHECK(via_net.params_full == via_arch.params_full);

    TabularDataset empty;
    CHECK_THROWS_AS(evaluate(r.architecture, empty, nullptr), DataError);
}

TEST_CASE("normalization is reported back in original target units") {
    SearchConfig c = fixture_config();
    c.max_epochs = 4;
    SearchResult r = search(fixture_splits(), fixture_space(), c);
    const Splits& s = fixture_splits();
    EvalMetrics raw = evaluate(r.architecture, s.test, nullptr);
    EvalMetrics orig = evaluate(r.architecture, s.test, &s.norm);
    REQUIRE(s.norm.target_standardized);
    const double scale = s.norm.target_std[0] * s.norm.target_std[0];
    CHECK(orig.loss == doctest::Approx(raw.loss * scale).epsilon(1e-12));
}

TEST_CASE("search rejects mismatched spaces and splits") {
    SearchSpace wrong_task = fixture_space();
    wrong_task.task = Task::classification;
    CHECK_THROWS_AS(search(fixture_splits(), wrong_task, fixture_config()), ConfigError);

    SearchSpace wrong_dim = fixture_space();
    wrong_dim.input_dim = 7;
    CHECK_THROWS_AS(search(fixture_splits(), wrong_dim, fixture_config()), ShapeError);
}

TEST_CASE("gradient clipping counts its interventions") {
    SearchConfig tight = fixture_config();
    tight.max_epochs = 2;
    tight.grad_clip = 1e-9; // everything clips
    SearchResult clipped = search(fixture_splits(), fixture_space(), tight);
    CHECK(clipped.clip_events > 0);

    SearchConfig loose = fixture_config();
    loose.max_epochs = 2;
    loose.grad_clip = 1e9; // nothing clips
    SearchResult free = search(fixture_splits(), fixture_space(), loose);
    CHECK(free.clip_events == 0);
}

TEST_CASE("diverging training raises NumericError naming the epoch") {
    SearchConfig hot = fixture_config();
    hot.optimizer = OptimizerKind::sgd;
    hot.lr_weights = 1e30;
    hot.max_epochs = 50;
    hot.patience = 50;
    CHECK_THROWS_WITH_AS(search(fixture_splits(), fixture_space(), hot),
                         doctest::Contains("epoch"), NumericError);
}

TEST_CASE("classification search reports accuracy") {
    TabularDataset d = make_teacher_student(4, {4}, 400, 0.0, 9);
    d.task = Task::classification;
    d.n_classes = 2;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        d.targets(r, 0) = d.targets(r, 0) > 0.0 ? 1.0 : 0.0;
    }
    Splits s = normalize(split(d, {0.7, 0.15, 0.15}, 9));

    SearchSpace space = fixture_space();
    space.task = Task::classification;
    space.output_dim = 2;
    SearchConfig c = fixture_config();
    c.max_epochs = 8;
    SearchResult r = search(s, space, c);
    CHECK(r.test_metrics.accuracy >= 0.0);
    CHECK(r.test_metrics.accuracy <= 1.0);
    CHECK(std::isfinite(r.test_metrics.loss));
}
