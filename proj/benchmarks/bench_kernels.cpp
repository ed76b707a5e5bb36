// Microbenchmarks for the kernels the search loop lives in: the dense and
// column-masked matmuls, the two alternating step passes, gate sampling,
// and inference on an extracted network. Only built when google-benchmark
// is installed (TABGNS_BUILD_BENCHMARKS=ON and find_package succeeds).

#include <benchmark/benchmark.h>

#include <cstddef>

#include "tabgns/dense.hpp"
#include "tabgns/gates.hpp"
#include "tabgns/matrix.hpp"
#include "tabgns/rng.hpp"
#include "tabgns/supernet.hpp"

using namespace tabgns;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.normal();
    return m;
}

// 3 hidden layers of 64 with the first `open_per_layer` gates open
SuperNet partly_open_net(std::size_t open_per_layer) {
    SearchSpace space;
    space.input_dim = 10;
    space.output_dim = 1;
    space.hidden_layers = 3;
    space.max_width = 64;
    SuperNet net = init_supernet(space, 11);
    for (std::size_t l = 0; l < space.hidden_layers; ++l) {
        for (std::size_t j = 0; j < space.max_width; ++j) {
            net.gates.logit(l, j) = j < open_per_layer ? 1.0 : -1.0;
        }
    }
    return net;
}

void BM_dense_forward(benchmark::State& state) {
    Rng rng(1);
    DenseLayer layer = make_dense_layer(64, 64);
    he_uniform_init(layer, rng);
    Matrix X = random_matrix(256, 64, rng);
    for (auto _ : state) {
        Matrix y = linear_forward(X, layer);
        benchmark::DoNotOptimize(y.values().data());
    }
    state.SetItemsProcessed(state.iterations() * 256 * 64 * 64);
}
BENCHMARK(BM_dense_forward);

// closed columns are skipped, so cost should track the open count
void BM_masked_predict(benchmark::State& state) {
    SuperNet net = partly_open_net(static_cast<std::size_t>(state.range(0)));
    Rng rng(2);
    Matrix X = random_matrix(256, 10, rng);
    for (auto _ : state) {
        Matrix y = predict_deterministic(net, X);
        benchmark::DoNotOptimize(y.values().data());
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_masked_predict)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

// one weight update's forward + backward at half-open gates
void BM_weight_step_pass(benchmark::State& state) {
    SuperNet net = partly_open_net(32);
    Rng rng(3);
    Matrix X = random_matrix(256, 10, rng);
    Matrix T = random_matrix(256, 1, rng);
    Rng noise(4);
    for (auto _ : state) {
        ForwardTrace trace = forward_weights_only(net, X, noise);
        SuperNetGrads grads = backward(net, trace, T, GradTarget::weights);
        benchmark::DoNotOptimize(grads.d_weight.data());
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_weight_step_pass);

// one gate update's forward + backward; needs every column's activations
void BM_gate_step_pass(benchmark::State& state) {
    SuperNet net = partly_open_net(32);
    Rng rng(5);
    Matrix X = random_matrix(256, 10, rng);
    Matrix T = random_matrix(256, 1, rng);
    Rng noise(6);
    for (auto _ : state) {
        ForwardTrace trace = forward(net, X, ForwardMode::stochastic, &noise);
        SuperNetGrads grads = backward(net, trace, T, GradTarget::gates);
        benchmark::DoNotOptimize(grads.d_logits.data());
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_gate_step_pass);

void BM_gate_layer_sample(benchmark::State& state) {
    GateBank bank = make_gate_bank(1, 512, -1.0);
    Rng rng(7);
    for (auto _ : state) {
        GateSample s = sample_gate_layer(bank.logits.data(), bank.width, bank.tau, rng);
        benchmark::DoNotOptimize(s.hard.data());
    }
    state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_gate_layer_sample);

void BM_extracted_predict(benchmark::State& state) {
    SuperNet net = partly_open_net(32);
    Architecture arch = extract_architecture(net);
    Rng rng(8);
    Matrix X = random_matrix(256, 10, rng);
    for (auto _ : state) {
        Matrix y = predict(arch, X);
        benchmark::DoNotOptimize(y.values().data());
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_extracted_predict);

} // namespace

BENCHMARK_MAIN();
