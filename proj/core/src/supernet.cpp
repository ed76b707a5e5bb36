#include "tabgns/supernet.hpp"

#include <algorithm>
#include <utility>

#include "tabgns/errors.hpp"

namespace tabgns {

namespace {

ActiveCols open_cols(const std::vector<double>& hard) {
    ActiveCols cols;
    for (std::size_t j = 0; j < hard.size(); ++j) {
        if (hard[j] == 1.0) cols.push_back(static_cast<std::uint32_t>(j));
    }
    return cols;
}

ActiveCols full_cols(std::size_t n) {
    ActiveCols cols(n);
    for (std::size_t j = 0; j < n; ++j) cols[j] = static_cast<std::uint32_t>(j);
    return cols;
}

// Column-uniform masks let the next layer skip closed columns entirely.
bool column_uniform(const ForwardTrace& t) {
    return !t.per_sample &&
           (t.mode == ForwardMode::stochastic || t.mode == ForwardMode::deterministic);
}

Matrix gate_columns(const Matrix& a, const std::vector<double>& gate) {
    Matrix h(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* ar = a.row(r);
        double* hr = h.row(r);
        for (std::size_t j = 0; j < a.cols(); ++j) hr[j] = ar[j] * gate[j];
    }
    return h;
}

Matrix gate_rows(const Matrix& a, const Matrix& gate) {
    Matrix h(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) h.values()[i] = a.values()[i] * gate.values()[i];
    return h;
}

DenseLayer slice_layer(const DenseLayer& src, const std::vector<std::uint32_t>* rows,
                       const std::vector<std::uint32_t>* cols) {
    const std::size_t out_dim = rows ? rows->size() : src.out_dim();
    const std::size_t in_dim = cols ? cols->size() : src.in_dim();
    DenseLayer dst = make_dense_layer(out_dim, in_dim);
    for (std::size_t i = 0; i < out_dim; ++i) {
        const std::size_t si = rows ? (*rows)[i] : i;
        const double* srow = src.weight.row(si);
        double* drow = dst.weight.row(i);
        for (std::size_t j = 0; j < in_dim; ++j) drow[j] = srow[cols ? (*cols)[j] : j];
        dst.bias[i] = src.bias[si];
    }
    return dst;
}

void check_trace(const SuperNet& net, const ForwardTrace& trace) {
    const std::size_t L = net.space.hidden_layers;
    const std::size_t W = net.space.max_width;
    require_size(trace.hidden.size(), L, "backward trace layers");
    require_size(trace.input.cols(), net.space.input_dim, "backward trace input");
    for (const LayerTrace& lt : trace.hidden) {
        require_shape(lt.h, trace.input.rows(), W, "backward trace activations");
        // weights-only traces skip the pre-gate activations entirely
        if (!trace.weights_only) {
            require_shape(lt.a, trace.input.rows(), W, "backward trace activations");
        }
    }
    require_shape(trace.predictions, trace.input.rows(), net.space.output_dim,
                  "backward trace predictions");
}

} // namespace

void validate(const SearchSpace& space) {
    if (space.input_dim < 1 || space.output_dim < 1 || space.hidden_layers < 1 ||
        space.max_width < 1) {
        throw ConfigError("search space dimensions must all be >= 1 (got input " +
                          std::to_string(space.input_dim) + ", output " +
                          std::to_string(space.output_dim) + ", layers " +
                          std::to_string(space.hidden_layers) + ", width " +
                          std::to_string(space.max_width) + ")");
    }
}

SuperNet init_supernet(const SearchSpace& space, std::uint64_t seed, double gate_init) {
    validate(space);
    SuperNet net;
    net.space = space;
    Rng rng(seed);
    const std::size_t L = space.hidden_layers;
    const std::size_t W = space.max_width;
    net.layers.reserve(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
        const std::size_t in = (l == 0) ? space.input_dim : W;
        const std::size_t out = (l == L) ? space.output_dim : W;
        DenseLayer layer = make_dense_layer(out, in);
        he_uniform_init(layer, rng);
        net.layers.push_back(std::move(layer));
    }
    net.gates = make_gate_bank(L, W, gate_init);
    return net;
}

namespace {

ForwardTrace run_forward(const SuperNet& net, const Matrix& X, ForwardMode mode, Rng* rng,
                         bool per_sample, const std::vector<GateSample>* frozen,
                         bool weights_only) {
    require_size(X.cols(), net.space.input_dim, "forward input columns");
    const bool noisy = mode == ForwardMode::stochastic || mode == ForwardMode::soft;
    if (noisy && rng == nullptr && frozen == nullptr) {
        throw ConfigError("stochastic/soft forward needs a random source");
    }

    const std::size_t L = net.space.hidden_layers;
    const std::size_t W = net.space.max_width;
    const double tau = net.gates.tau;

    ForwardTrace t;
    t.mode = mode;
    t.per_sample = noisy && per_sample && frozen == nullptr;
    t.weights_only = weights_only;
    t.input = X;
    t.hidden.resize(L);

    std::vector<std::vector<std::uint32_t>> kept;
    if (mode == ForwardMode::deterministic) kept = deterministic_kept(net.gates);

    const Matrix* cur = &X;
    ActiveCols cols;
    bool have_cols = false;
    for (std::size_t l = 0; l < L; ++l) {
        LayerTrace& lt = t.hidden[l];

        // The mask comes first: when it is column-uniform and hard, the
        // matmul can skip the columns it closes outright.
        const double* logits = net.gates.logits.data() + l * W;
        if (noisy) {
            if (frozen != nullptr) {
                const GateSample& fixed = (*frozen)[l];
                require_size(fixed.noise_on.size(), W, "frozen gate noise");
                lt.gates.noise_on = fixed.noise_on;
                lt.gates.noise_off = fixed.noise_off;
                lt.gates.soft.resize(W);
                lt.gates.hard.resize(W);
                for (std::size_t j = 0; j < W; ++j) {
                    lt.gates.soft[j] =
                        gate_soft_prob(logits[j], fixed.noise_on[j], fixed.noise_off[j], tau);
                    lt.gates.hard[j] = gate_hard(lt.gates.soft[j]);
                }
            } else if (t.per_sample) {
                lt.soft_rows = Matrix(X.rows(), W);
                lt.hard_rows = Matrix(X.rows(), W);
                for (std::size_t r = 0; r < X.rows(); ++r) {
                    for (std::size_t j = 0; j < W; ++j) {
                        const double o1 = rng->gumbel();
                        const double o2 = rng->gumbel();
                        const double p = gate_soft_prob(logits[j], o1, o2, tau);
                        lt.soft_rows(r, j) = p;
                        lt.hard_rows(r, j) = gate_hard(p);
                    }
                }
            } else {
                lt.gates = sample_gate_layer(logits, W, tau, *rng);
            }
        } else if (mode == ForwardMode::deterministic) {
            lt.gates.soft.resize(W);
            lt.gates.hard.assign(W, 0.0);
            for (std::size_t j = 0; j < W; ++j) lt.gates.soft[j] = deterministic_open_prob(logits[j]);
            for (std::uint32_t j : kept[l]) lt.gates.hard[j] = 1.0;
        } else { // ungated
            lt.gates.hard.assign(W, 1.0);
        }

        const bool skip_closed =
            !t.per_sample && (mode == ForwardMode::deterministic ||
                              (mode == ForwardMode::stochastic && weights_only));
        if (skip_closed) {
            const ActiveCols open = open_cols(lt.gates.hard);
            lt.z = linear_forward(*cur, net.layers[l], have_cols ? cols : full_cols(cur->cols()),
                                  open);
            if (weights_only) {
                // nothing reads the pre-gate activations on this path
                lt.h = relu_forward(lt.z);
            } else {
                lt.a = relu_forward(lt.z);
                lt.h = lt.a; // closed columns are already exactly zero
            }
        } else {
            // z is not kept here: ReLU runs in place and a > 0 marks z > 0
            // for the backward mask.
            lt.a = have_cols ? linear_forward(*cur, net.layers[l], cols)
                             : linear_forward(*cur, net.layers[l]);
            relu_inplace(lt.a);
            if (t.per_sample) {
                lt.h = gate_rows(lt.a, mode == ForwardMode::soft ? lt.soft_rows : lt.hard_rows);
            } else {
                lt.h = gate_columns(lt.a,
                                    mode == ForwardMode::soft ? lt.gates.soft : lt.gates.hard);
            }
        }

        have_cols = column_uniform(t);
        if (have_cols) cols = open_cols(lt.gates.hard);
        cur = &lt.h;
    }

    t.predictions = have_cols ? linear_forward(*cur, net.layers[L], cols)
                              : linear_forward(*cur, net.layers[L]);
    return t;
}

} // namespace

ForwardTrace forward(const SuperNet& net, const Matrix& X, ForwardMode mode, Rng* rng,
                     bool noise_per_sample) {
    return run_forward(net, X, mode, rng, noise_per_sample, nullptr, false);
}

ForwardTrace forward_weights_only(const SuperNet& net, const Matrix& X, Rng& rng,
                                  bool noise_per_sample) {
    return run_forward(net, X, ForwardMode::stochastic, &rng, noise_per_sample, nullptr, true);
}

ForwardTrace forward_with_noise(const SuperNet& net, const Matrix& X,
                                const std::vector<GateSample>& noise, bool soft) {
    require_size(noise.size(), net.space.hidden_layers, "frozen gate noise layers");
    return run_forward(net, X, soft ? ForwardMode::soft : ForwardMode::stochastic, nullptr,
                       false, &noise, false);
}

Matrix predict_deterministic(const SuperNet& net, const Matrix& X) {
    require_size(X.cols(), net.space.input_dim, "forward input columns");
    const std::size_t L = net.space.hidden_layers;
    std::vector<std::vector<std::uint32_t>> kept = deterministic_kept(net.gates);
    Matrix buf;
    const Matrix* cur = &X;
    ActiveCols cols;
    for (std::size_t l = 0; l < L; ++l) {
        Matrix z = linear_forward(*cur, net.layers[l],
                                  l == 0 ? full_cols(X.cols()) : cols, kept[l]);
        relu_inplace(z);
        buf = std::move(z);
        cur = &buf;
        cols = std::move(kept[l]);
    }
    return linear_forward(*cur, net.layers[L], cols);
}

SuperNetGrads backward(const SuperNet& net, const ForwardTrace& trace, const Matrix& targets,
                       GradTarget which) {
    check_trace(net, trace);
    const bool noisy =
        trace.mode == ForwardMode::stochastic || trace.mode == ForwardMode::soft;
    if (which == GradTarget::gates && !noisy) {
        throw ConfigError("gate gradients need a stochastic or soft trace");
    }
    if (which == GradTarget::gates && trace.weights_only) {
        throw ConfigError("gate gradients need a full trace, not a weights-only one");
    }

    const std::size_t L = net.space.hidden_layers;
    const std::size_t W = net.space.max_width;
    const double tau = net.gates.tau;
    const std::size_t rows = trace.input.rows();

    SuperNetGrads g;
    g.which = which;
    if (which == GradTarget::weights) {
        g.d_weight.resize(L + 1);
        g.d_bias.resize(L + 1);
    } else {
        g.d_logits.assign(L * W, 0.0);
    }

    const bool uniform = column_uniform(trace);
    Matrix d_h; // gradient wrt the gated output feeding the layer above
    {
        Matrix d_out = task_loss_grad(trace.predictions, targets, net.space.task);
        const LayerTrace& top = trace.hidden[L - 1];
        if (which == GradTarget::weights) {
            LinearGrads lg = uniform
                                 ? linear_backward(d_out, top.h, net.layers[L],
                                                   open_cols(top.gates.hard))
                                 : linear_backward(d_out, top.h, net.layers[L]);
            g.d_weight[L] = std::move(lg.d_weight);
            g.d_bias[L] = std::move(lg.d_bias);
            d_h = std::move(lg.d_input);
        } else {
            d_h = linear_backward_input(d_out, net.layers[L]);
        }
    }

    for (std::size_t l = L; l-- > 0;) {
        const LayerTrace& lt = trace.hidden[l];

        if (which == GradTarget::gates) {
            // d_g[j] = sum_r d_h[r,j] * a[r,j] * p(1-p)/tau (straight-through)
            if (trace.per_sample) {
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* dh = d_h.row(r);
                    const double* a = lt.a.row(r);
                    const double* p = lt.soft_rows.row(r);
                    for (std::size_t j = 0; j < W; ++j) {
                        g.d_logits[l * W + j] += dh[j] * a[j] * p[j] * (1.0 - p[j]) / tau;
                    }
                }
            } else {
                std::vector<double> acc(W, 0.0);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* dh = d_h.row(r);
                    const double* a = lt.a.row(r);
                    for (std::size_t j = 0; j < W; ++j) acc[j] += dh[j] * a[j];
                }
                for (std::size_t j = 0; j < W; ++j) {
                    g.d_logits[l * W + j] = gate_backward(acc[j], lt.gates.soft[j], tau);
                }
            }
        }

        // One fused pass: the sampled gate multiplies the weight-path
        // gradient, and the ReLU mask zeroes it where the unit was off.
        // Traces without z use a, whose positive entries are exactly z's.
        const Matrix& mask = lt.z.size() != 0 ? lt.z : lt.a;
        Matrix d_z(rows, W);
        if (trace.per_sample) {
            const Matrix& gate =
                trace.mode == ForwardMode::soft ? lt.soft_rows : lt.hard_rows;
            for (std::size_t i = 0; i < d_z.size(); ++i) {
                d_z.values()[i] =
                    mask.values()[i] > 0.0 ? d_h.values()[i] * gate.values()[i] : 0.0;
            }
        } else {
            const std::vector<double>& gate =
                trace.mode == ForwardMode::soft ? lt.gates.soft : lt.gates.hard;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dh = d_h.row(r);
                const double* mk = mask.row(r);
                double* dz = d_z.row(r);
                for (std::size_t j = 0; j < W; ++j) {
                    dz[j] = mk[j] > 0.0 ? dh[j] * gate[j] : 0.0;
                }
            }
        }

        const Matrix& in = (l == 0) ? trace.input : trace.hidden[l - 1].h;
        if (which == GradTarget::weights) {
            // The first layer's input gradient has no consumer, so skip it.
            LinearGrads lg =
                (l == 0) ? linear_backward_params(d_z, in, net.layers[l])
                : uniform ? linear_backward(d_z, in, net.layers[l],
                                            open_cols(trace.hidden[l - 1].gates.hard))
                          : linear_backward(d_z, in, net.layers[l]);
            g.d_weight[l] = std::move(lg.d_weight);
            g.d_bias[l] = std::move(lg.d_bias);
            d_h = std::move(lg.d_input);
        } else if (l > 0) {
            d_h = linear_backward_input(d_z, net.layers[l]);
        }
    }
    return g;
}

std::vector<std::size_t> Architecture::hidden_widths() const {
    std::vector<std::size_t> w;
    w.reserve(kept.size());
    for (const auto& k : kept) w.push_back(k.size());
    return w;
}

std::vector<std::vector<std::uint32_t>> deterministic_kept(const GateBank& gates) {
    std::vector<std::vector<std::uint32_t>> kept(gates.hidden_layers);
    for (std::size_t l = 0; l < gates.hidden_layers; ++l) {
        for (std::size_t j = 0; j < gates.width; ++j) {
            if (gates.logit(l, j) >= 0.0) kept[l].push_back(static_cast<std::uint32_t>(j));
        }
        if (kept[l].empty()) {
            // A severed layer would disconnect the network; keep the best
            // single neuron instead (lowest index on ties).
            std::size_t best = 0;
            for (std::size_t j = 1; j < gates.width; ++j) {
                if (gates.logit(l, j) > gates.logit(l, best)) best = j;
            }
            kept[l].push_back(static_cast<std::uint32_t>(best));
        }
    }
    return kept;
}

Architecture extract_architecture(const SuperNet& net) {
    Architecture arch;
    arch.space = net.space;
    arch.kept = deterministic_kept(net.gates);
    const std::size_t L = net.space.hidden_layers;
    arch.layers.reserve(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
        const std::vector<std::uint32_t>* rows = (l == L) ? nullptr : &arch.kept[l];
        const std::vector<std::uint32_t>* cols = (l == 0) ? nullptr : &arch.kept[l - 1];
        arch.layers.push_back(slice_layer(net.layers[l], rows, cols));
    }
    return arch;
}

std::uint64_t count_parameters(const std::vector<std::size_t>& widths,
                               ParamConvention convention) {
    if (widths.size() < 2) throw ConfigError("count_parameters needs at least input and output");
    for (std::size_t w : widths) {
        if (w == 0) throw ConfigError("count_parameters: zero layer width");
    }
    std::uint64_t total = 0;
    if (convention == ParamConvention::paper) {
        // Weight matrices between consecutive hidden layers only.
        for (std::size_t i = 1; i + 2 < widths.size(); ++i) {
            total += static_cast<std::uint64_t>(widths[i]) * widths[i + 1];
        }
    } else {
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            total += static_cast<std::uint64_t>(widths[i] + 1) * widths[i + 1];
        }
    }
    return total;
}

std::vector<std::size_t> layer_widths(const Architecture& arch) {
    std::vector<std::size_t> widths;
    widths.reserve(arch.kept.size() + 2);
    widths.push_back(arch.space.input_dim);
    for (const auto& k : arch.kept) widths.push_back(k.size());
    widths.push_back(arch.space.output_dim);
    return widths;
}

std::uint64_t count_parameters(const Architecture& arch, ParamConvention convention) {
    return count_parameters(layer_widths(arch), convention);
}

double expected_size(const SuperNet& net) {
    double total = 0.0;
    for (double g : net.gates.logits) total += deterministic_open_prob(g);
    return total;
}

std::size_t open_count(const SuperNet& net) {
    std::size_t n = 0;
    for (double g : net.gates.logits) {
        if (g >= 0.0) ++n;
    }
    return n;
}

MlpTrace mlp_forward(const std::vector<DenseLayer>& layers, const Matrix& X) {
    if (layers.empty()) throw ConfigError("mlp_forward: empty layer stack");
    require_size(X.cols(), layers.front().in_dim(), "mlp_forward input columns");
    MlpTrace t;
    t.input = X;
    const std::size_t n = layers.size();
    t.z.reserve(n - 1);
    t.a.reserve(n - 1);
    const Matrix* cur = &X;
    for (std::size_t l = 0; l + 1 < n; ++l) {
        t.z.push_back(linear_forward(*cur, layers[l]));
        t.a.push_back(relu_forward(t.z.back()));
        cur = &t.a.back();
    }
    t.predictions = linear_forward(*cur, layers.back());
    return t;
}

MlpGrads mlp_backward(const std::vector<DenseLayer>& layers, const MlpTrace& trace,
                      const Matrix& targets, Task task) {
    const std::size_t n = layers.size();
    require_size(trace.z.size(), n - 1, "mlp_backward trace");
    MlpGrads g;
    g.d_weight.resize(n);
    g.d_bias.resize(n);
    Matrix d = task_loss_grad(trace.predictions, targets, task);
    for (std::size_t l = n; l-- > 0;) {
        if (l != n - 1) d = relu_backward(d, trace.z[l]);
        const Matrix& in = (l == 0) ? trace.input : trace.a[l - 1];
        LinearGrads lg = linear_backward(d, in, layers[l]);
        g.d_weight[l] = std::move(lg.d_weight);
        g.d_bias[l] = std::move(lg.d_bias);
        d = std::move(lg.d_input);
    }
    return g;
}

std::vector<DenseLayer> make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                 std::size_t output_dim, Rng& rng) {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("make_mlp: zero input/output dim");
    for (std::size_t h : hidden) {
        if (h == 0) throw ConfigError("make_mlp: zero hidden width");
    }
    std::vector<DenseLayer> layers;
    layers.reserve(hidden.size() + 1);
    std::size_t in = input_dim;
    for (std::size_t h : hidden) {
        layers.push_back(make_dense_layer(h, in));
        he_uniform_init(layers.back(), rng);
        in = h;
    }
    layers.push_back(make_dense_layer(output_dim, in));
    he_uniform_init(layers.back(), rng);
    return layers;
}

Matrix predict(const Architecture& arch, const Matrix& X) {
    require_size(X.cols(), arch.space.input_dim, "predict input columns");
    return mlp_forward(arch.layers, X).predictions;
}

} // namespace tabgns
