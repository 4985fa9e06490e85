#include "volcal/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "volcal/error.hpp"
#include "volcal/rng.hpp"

namespace volcal {

namespace {

double head(OutputActivation a, double x) {
    switch (a) {
        case OutputActivation::sigmoid: return sigmoid(x);
        case OutputActivation::hard_sigmoid: return hard_sigmoid(x);
        case OutputActivation::identity: return x;
    }
    return x;
}

// Derivative of the head given its input x and output y.
double head_derivative(OutputActivation a, double x, double y) {
    switch (a) {
        case OutputActivation::sigmoid: return y * (1.0 - y);
        case OutputActivation::hard_sigmoid: return (x > -2.5 && x < 2.5) ? 0.2 : 0.0;
        case OutputActivation::identity: return 1.0;
    }
    return 1.0;
}

// Pre-activations z[l] and activations a[l] (a[0] is the input).
struct Trace {
    std::vector<Matrix> z;
    std::vector<Matrix> a;
};

Trace run(const MlpSpec& spec, const MlpWeights& w, const Matrix& x) {
    check_shapes(spec, w);
    if (x.cols() != spec.inputs())
        throw DimensionError("network expects " + std::to_string(spec.inputs()) + " inputs, got " +
                             std::to_string(x.cols()));
    const std::size_t n = x.rows();
    const std::size_t layers = spec.layers();
    Trace t;
    t.a.reserve(layers + 1);
    t.z.reserve(layers);
    t.a.push_back(x);
    for (std::size_t l = 0; l < layers; ++l) {
        const DenseLayer& layer = w.layers[l];
        const std::size_t in = layer.w.cols();
        const std::size_t out = layer.w.rows();
        const bool last = l + 1 == layers;
        Matrix z(n, out);
        Matrix a(n, out);
        const Matrix& prev = t.a.back();
        bool finite = true;
        for (std::size_t r = 0; r < n; ++r) {
            const auto pr = prev.row(r);
            for (std::size_t o = 0; o < out; ++o) {
                const auto wr = layer.w.row(o);
                double acc = layer.b[o];
                for (std::size_t i = 0; i < in; ++i) acc += wr[i] * pr[i];
                z(r, o) = acc;
                const double v = last ? head(spec.output, acc) : selu(acc);
                a(r, o) = v;
                finite = finite && std::isfinite(v);
            }
        }
        if (!finite) throw NonFiniteError("non-finite activation in layer " + std::to_string(l + 1));
        t.z.push_back(std::move(z));
        t.a.push_back(std::move(a));
    }
    return t;
}

}  // namespace

std::string_view activation_name(OutputActivation a) {
    switch (a) {
        case OutputActivation::sigmoid: return "sigmoid";
        case OutputActivation::hard_sigmoid: return "hard_sigmoid";
        case OutputActivation::identity: return "identity";
    }
    return "unknown";
}

OutputActivation parse_activation(std::string_view name) {
    for (auto a : {OutputActivation::sigmoid, OutputActivation::hard_sigmoid, OutputActivation::identity})
        if (activation_name(a) == name) return a;
    throw ValidationError("unknown output activation '" + std::string(name) +
                          "' (expected sigmoid, hard_sigmoid or identity)");
}

void MlpSpec::validate() const {
    if (layer_sizes.size() < 3)
        throw ValidationError("network needs an input, at least one hidden layer and an output");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw ValidationError("layer sizes must be positive");
}

double selu(double x) { return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x); }

double selu_derivative(double x) { return x >= 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double hard_sigmoid(double x) { return std::clamp(0.2 * x + 0.5, 0.0, 1.0); }

std::size_t param_count(const MlpSpec& spec) {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l)
        total += (spec.layer_sizes[l] + 1) * spec.layer_sizes[l + 1];
    return total;
}

MlpWeights zeros_like(const MlpSpec& spec) {
    spec.validate();
    MlpWeights w;
    for (std::size_t l = 0; l < spec.layers(); ++l)
        w.layers.push_back({Matrix(spec.layer_sizes[l + 1], spec.layer_sizes[l]),
                            std::vector<double>(spec.layer_sizes[l + 1], 0.0)});
    return w;
}

MlpWeights init_weights(const MlpSpec& spec, std::uint64_t seed) {
    MlpWeights w = zeros_like(spec);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        Rng rng = Rng::substream(seed, l);
        const double sd = 1.0 / std::sqrt(static_cast<double>(spec.layer_sizes[l]));
        for (double& v : w.layers[l].w.data()) v = sd * rng.normal();
    }
    return w;
}

void check_shapes(const MlpSpec& spec, const MlpWeights& w) {
    spec.validate();
    if (w.layers.size() != spec.layers())
        throw DimensionError("weights have " + std::to_string(w.layers.size()) + " layers, spec has " +
                             std::to_string(spec.layers()));
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const auto& layer = w.layers[l];
        if (layer.w.rows() != spec.layer_sizes[l + 1] || layer.w.cols() != spec.layer_sizes[l] ||
            layer.b.size() != spec.layer_sizes[l + 1])
            throw DimensionError("layer " + std::to_string(l + 1) + " weights do not match the spec");
    }
}

Matrix forward(const MlpSpec& spec, const MlpWeights& w, const Matrix& x) {
    return std::move(run(spec, w, x).a.back());
}

std::vector<double> forward(const MlpSpec& spec, const MlpWeights& w, std::span<const double> x) {
    Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
    const Matrix out = forward(spec, w, in);
    return std::vector<double>(out.data().begin(), out.data().end());
}

double loss_mse(const Matrix& pred, const Matrix& target, std::span<const double> weights) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw DimensionError("prediction and target shapes differ");
    if (!weights.empty() && weights.size() != pred.cols())
        throw DimensionError("loss weights have " + std::to_string(weights.size()) + " entries for " +
                             std::to_string(pred.cols()) + " columns");
    if (pred.empty()) throw DimensionError("loss of an empty batch");
    double sum = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            const double d = pred(r, c) - target(r, c);
            sum += (weights.empty() ? 1.0 : weights[c]) * d * d;
        }
    }
    return sum / static_cast<double>(pred.size());
}

std::pair<MlpWeights, double> gradients(const MlpSpec& spec, const MlpWeights& w, const Matrix& x,
                                        const Matrix& y, std::span<const double> weights) {
    Trace t = run(spec, w, x);
    const Matrix& pred = t.a.back();
    const double loss = loss_mse(pred, y, weights);
    const std::size_t n = x.rows();
    const std::size_t layers = spec.layers();
    const double scale = 2.0 / static_cast<double>(pred.size());

    MlpWeights g = zeros_like(spec);
    // delta = dL/dz for the current layer.
    Matrix delta(n, spec.outputs());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < spec.outputs(); ++c) {
            const double wc = weights.empty() ? 1.0 : weights[c];
            delta(r, c) = scale * wc * (pred(r, c) - y(r, c)) *
                          head_derivative(spec.output, t.z.back()(r, c), pred(r, c));
        }
    }
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& a_prev = t.a[l];
        const DenseLayer& layer = w.layers[l];
        DenseLayer& gl = g.layers[l];
        const std::size_t in = layer.w.cols();
        const std::size_t out = layer.w.rows();
        for (std::size_t r = 0; r < n; ++r) {
            const auto ar = a_prev.row(r);
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta(r, o);
                gl.b[o] += d;
                auto gw = gl.w.row(o);
                for (std::size_t i = 0; i < in; ++i) gw[i] += d * ar[i];
            }
        }
        if (l == 0) break;
        Matrix next(n, in);
        const Matrix& z_prev = t.z[l - 1];
        for (std::size_t r = 0; r < n; ++r) {
            auto nr = next.row(r);
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta(r, o);
                const auto wr = layer.w.row(o);
                for (std::size_t i = 0; i < in; ++i) nr[i] += d * wr[i];
            }
            for (std::size_t i = 0; i < in; ++i) nr[i] *= selu_derivative(z_prev(r, i));
        }
        delta = std::move(next);
    }
    return {std::move(g), loss};
}

Matrix input_jacobian(const MlpSpec& spec, const MlpWeights& w, std::span<const double> x,
                      std::vector<double>* output) {
    Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
    const Trace t = run(spec, w, in);
    const std::size_t layers = spec.layers();
    // Forward-mode: j = d a_l / d x, carried through every layer.
    Matrix j = Matrix::identity(spec.inputs());
    for (std::size_t l = 0; l < layers; ++l) {
        const Matrix& wl = w.layers[l].w;
        Matrix next = matmul(wl, j);
        const bool last = l + 1 == layers;
        for (std::size_t o = 0; o < next.rows(); ++o) {
            const double z = t.z[l](0, o);
            const double d = last ? head_derivative(spec.output, z, t.a[l + 1](0, o)) : selu_derivative(z);
            for (double& v : next.row(o)) v *= d;
        }
        j = std::move(next);
    }
    if (output) {
        const auto out = t.a.back().data();
        output->assign(out.begin(), out.end());
    }
    return j;
}

AdamState AdamState::zeros(const MlpSpec& spec) { return {zeros_like(spec), zeros_like(spec), 0}; }

void adam_step(MlpWeights& w, AdamState& state, const MlpWeights& grad, const AdamConfig& cfg) {
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto update = [&](std::span<double> p, std::span<double> m, std::span<double> v, std::span<const double> g) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    };
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        update(w.layers[l].w.data(), state.m.layers[l].w.data(), state.v.layers[l].w.data(),
               grad.layers[l].w.data());
        update(w.layers[l].b, state.m.layers[l].b, state.v.layers[l].b, grad.layers[l].b);
    }
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::update(std::size_t epoch, double loss) {
    if (loss < best_) {
        best_ = loss;
        best_epoch_ = epoch;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

void TrainConfig::validate() const {
    if (!(adam.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    if (max_epochs == 0) throw ValidationError("max epochs must be positive");
    if (patience == 0) throw ValidationError("patience must be at least 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ValidationError("validation fraction must lie in (0, 1)");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ValidationError("Adam betas must lie in [0, 1)");
    for (double v : loss_weights)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be non-negative");
}

namespace {

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
    return out;
}

}  // namespace

std::pair<MlpWeights, TrainReport> train(const MlpSpec& spec, const Matrix& x, const Matrix& y,
                                         const TrainConfig& cfg) {
    return train(spec, init_weights(spec, mix_seed(cfg.seed, 1)), x, y, cfg);
}

std::pair<MlpWeights, TrainReport> train(const MlpSpec& spec, MlpWeights w, const Matrix& x, const Matrix& y,
                                         const TrainConfig& cfg) {
    cfg.validate();
    check_shapes(spec, w);
    if (x.rows() != y.rows()) throw DimensionError("inputs and targets have different row counts");
    if (x.cols() != spec.inputs() || y.cols() != spec.outputs())
        throw DimensionError("data shape " + std::to_string(x.cols()) + " -> " + std::to_string(y.cols()) +
                             " does not match network " + std::to_string(spec.inputs()) + " -> " +
                             std::to_string(spec.outputs()));
    if (!cfg.loss_weights.empty() && cfg.loss_weights.size() != spec.outputs())
        throw DimensionError("loss weights must have one entry per output");
    const std::size_t n = x.rows();
    if (n < 2) throw ValidationError("training needs at least 2 samples");

    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = Rng::substream(cfg.seed, 2);
    shuffle(order, split_rng);
    const std::span<const std::size_t> val_idx(order.data() + (n - n_val), n_val);
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n - n_val));
    std::sort(train_idx.begin(), train_idx.end());
    const Matrix x_train = gather(x, train_idx), y_train = gather(y, train_idx);
    const Matrix x_val = gather(x, val_idx), y_val = gather(y, val_idx);

    TrainReport report;
    report.n_train = train_idx.size();
    report.n_val = n_val;
    AdamState state = AdamState::zeros(spec);
    EarlyStopping stopper(cfg.patience);
    MlpWeights best = w;
    std::vector<std::size_t> perm(train_idx.size());
    const std::uint64_t shuffle_seed = mix_seed(cfg.seed, 3);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng = Rng::substream(shuffle_seed, epoch);
        shuffle(perm, rng);
        for (std::size_t start = 0, batch = 1; start < perm.size(); start += cfg.batch_size, ++batch) {
            const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
            const std::span<const std::size_t> rows(perm.data() + start, end - start);
            std::pair<MlpWeights, double> step;
            try {
                step = gradients(spec, w, gather(x_train, rows), gather(y_train, rows), cfg.loss_weights);
            } catch (const NonFiniteError& e) {
                throw NonFiniteError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " +
                                     e.what());
            }
            auto& [g, loss] = step;
            if (!std::isfinite(loss))
                throw NonFiniteError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch));
            adam_step(w, state, g, cfg.adam);
        }
        const double train_loss = loss_mse(forward(spec, w, x_train), y_train, cfg.loss_weights);
        const double val_loss = loss_mse(forward(spec, w, x_val), y_val, cfg.loss_weights);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw NonFiniteError("non-finite loss after epoch " + std::to_string(epoch));
        report.train_loss.push_back(train_loss);
        report.val_loss.push_back(val_loss);
        report.stopped_epoch = epoch;
        if (stopper.update(epoch, val_loss)) best = w;
        if (stopper.stop()) break;
    }
    report.best_epoch = stopper.best_epoch();
    return {std::move(best), std::move(report)};
}

}  // namespace volcal
